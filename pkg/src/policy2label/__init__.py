"""Generate and audit app-store privacy nutrition labels from privacy policies.

Pipeline: document processing (clean, gate, split, segment) -> data-practice
classification -> LLM-driven yes/no label generation, plus evaluation against
ground truth and under-claim auditing of declared labels.
"""

from .categories import CATEGORIES, DataPracticeCategory
from .classification import (
    ExternalScoresClassifier,
    KeywordPracticeClassifier,
    OneVsRestPracticeClassifier,
    classify,
    classify_segments,
)
from .documents import (
    CleanText,
    MediaKind,
    QualityVerdict,
    RawDocument,
    Segment,
    Sentence,
    clean_html,
    fetch_policy,
    filter_language,
    quality_check,
    split_sentences,
)
from .embeddings import (
    SentenceEmbedder,
    WordVectorStore,
    cosine_similarity,
    embed_sentence,
    load_vectors,
)
from .evaluation import (
    ConfusionCounts,
    EvalReport,
    SectionMetrics,
    UnderclaimFinding,
    build_report,
    compare_labels,
    detect_underclaims,
    detection_rate,
    macro_metrics,
)
from .generation import (
    CostStats,
    GenerationConfig,
    Strategy,
    build_prompt,
    chunk_context,
    generate_label,
    generate_label_full_llm,
    parse_answer,
    retrieve_relevant,
)
from .llm import HttpCompletionClient, KeywordMockLlm, LlmClient, ReplayLlm
from .schema import (
    Attribute,
    LabelOrigin,
    LabelSchema,
    Presence,
    PrivacyLabel,
    ProvenanceEntry,
    Section,
    bundled_schema_path,
    is_omnibus,
    load_label,
    load_schema,
    save_label,
    select_segments,
    validate_label,
)
from .segmentation import PolicySegmenter, SegmenterConfig, segment

__version__ = "0.1.0"
