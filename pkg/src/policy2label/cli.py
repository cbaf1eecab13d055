"""Command-line entry point wiring the pipeline end to end.

One subcommand per pipeline stage (fetch, segment, classify, generate, audit,
eval, train-classifier) so each stage is independently runnable. All
intermediate artifacts are JSON. Exit codes are the only success/failure
signal: 0 success, 2 quality-gate rejection, 3 LLM failure, 4 configuration
or schema error, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .categories import CATEGORIES
from .classification import (
    ExternalScoresClassifier,
    KeywordPracticeClassifier,
    OneVsRestPracticeClassifier,
    classify_segments,
)
from .documents import (
    MediaKind,
    RawDocument,
    clean_html,
    fetch_policy,
    filter_language,
    quality_check,
    split_sentences,
)
from .embeddings import SentenceEmbedder, load_vectors
from .errors import (
    ConfigError,
    LlmError,
    NonPrimaryLanguageDocument,
    Policy2LabelError,
    SchemaInvalid,
)
from .evaluation import build_report, render_text
from .generation import (
    GenerationConfig,
    Strategy,
    generate_label,
    generate_label_full_llm,
)
from .llm import HttpCompletionClient, KeywordMockLlm, ReplayLlm
from .schema import label_to_dict, load_label, load_schema
from .segmentation import SegmenterConfig, segment

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_QUALITY = 2
EXIT_LLM = 3
EXIT_CONFIG = 4

_POLICY_SUFFIXES = (".html", ".htm", ".txt")


class _QualityRejected(Policy2LabelError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass
class RunConfig:
    """Resolved pipeline configuration; referenced files must exist."""

    schema_path: Path
    out_dir: Path
    vectors_path: Path | None = None
    classifier_spec: str = "keyword"
    llm_backend: str = "mock-keyword"
    endpoint: str | None = None
    model: str | None = None
    replay_path: Path | None = None
    strategy: Strategy = Strategy.HYBRID
    tau: float = 0.85
    threshold: float = 0.5
    context_word_limit: int = 1200
    jobs: int = 1

    def validate(self) -> None:
        if not self.schema_path.exists():
            raise ConfigError(f"schema file not found: {self.schema_path}")
        if self.vectors_path is not None and not self.vectors_path.exists():
            raise ConfigError(f"vectors file not found: {self.vectors_path}")
        if not -1.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [-1, 1]")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie strictly between 0 and 1")
        if self.context_word_limit <= 0:
            raise ConfigError("context-limit must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.llm_backend == "http" and not (self.endpoint and self.model):
            raise ConfigError("--llm http requires --endpoint and --model")
        if self.llm_backend == "replay" and self.replay_path is None:
            raise ConfigError("--llm replay requires --replay-file")
        if self.replay_path is not None and not self.replay_path.exists():
            raise ConfigError(f"replay file not found: {self.replay_path}")
        spec = self.classifier_spec
        if spec != "keyword":
            path = Path(spec.split(":", 1)[1] if spec.startswith("external:") else spec)
            if not path.exists():
                raise ConfigError(f"classifier file not found: {path}")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_json(path: Path, payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


def _read_policy(source: str) -> RawDocument:
    if source.startswith(("http://", "https://")):
        return fetch_policy(source)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"policy file not found: {path}")
    kind = MediaKind.PLAIN_TEXT if path.suffix == ".txt" else MediaKind.HTML
    return RawDocument(source_id=str(path), content=path.read_bytes(), media_kind=kind)


def _build_embedder(vectors_path: Path | None) -> SentenceEmbedder:
    if vectors_path is None:
        return SentenceEmbedder()
    return SentenceEmbedder(store=load_vectors(vectors_path))


def _build_classifier(spec: str, threshold: float):
    if spec == "keyword":
        return KeywordPracticeClassifier(threshold=threshold)
    if spec.startswith("external:"):
        return ExternalScoresClassifier.from_file(spec.split(":", 1)[1], threshold=threshold)
    model = OneVsRestPracticeClassifier.load(spec)
    model.threshold = threshold
    return model


def _build_llm(config: RunConfig):
    if config.llm_backend == "mock-keyword":
        return KeywordMockLlm()
    if config.llm_backend == "replay":
        return ReplayLlm.from_file(config.replay_path)
    if config.llm_backend == "http":
        return HttpCompletionClient(endpoint=config.endpoint, model=config.model)
    raise ConfigError(f"unknown llm backend {config.llm_backend!r}")


def _process_document(raw: RawDocument, embedder, classifier, tau: float):
    clean = filter_language(clean_html(raw))
    verdict = quality_check(clean)
    if not verdict.accepted:
        raise _QualityRejected(verdict.reason)
    sentences = split_sentences(clean)
    segments = segment(sentences, embedder, SegmenterConfig(similarity_threshold=tau))
    classify_segments(classifier, segments)
    return sentences, segments


def _segments_payload(raw: RawDocument, app_name: str | None, segments) -> dict:
    return {
        "source_id": raw.source_id,
        "app_name": app_name,
        "segments": [
            {
                "segment_id": s.segment_id,
                "sentence_indices": list(s.sentence_indices),
                "text": s.text,
                "sentences": list(s.sentences),
                "categories": [
                    c.value for c in sorted(s.categories, key=CATEGORIES.index)
                ],
            }
            for s in segments
        ],
    }


@dataclass
class _Resources:
    """Immutable per-run resources shared by parallel document pipelines."""

    schema: object
    embedder: object
    classifier: object
    llm: object


def _load_resources(config: RunConfig) -> _Resources:
    return _Resources(
        schema=load_schema(config.schema_path),
        embedder=_build_embedder(config.vectors_path),
        classifier=_build_classifier(config.classifier_spec, config.threshold),
        llm=_build_llm(config),
    )


def _run_one(source: str, app_name: str, config: RunConfig, resources: _Resources, out_dir: Path) -> int:
    raw = _read_policy(source)
    sentences, segments = _process_document(
        raw, resources.embedder, resources.classifier, config.tau
    )
    _atomic_write_json(out_dir / "segments.json", _segments_payload(raw, app_name, segments))

    generation_config = GenerationConfig(
        strategy=config.strategy,
        context_word_limit=config.context_word_limit,
    )
    if config.strategy is Strategy.FULL_LLM:
        label, cost = generate_label_full_llm(
            sentences, app_name, resources.schema, generation_config, resources.llm, resources.llm
        )
    else:
        label, cost = generate_label(
            segments, app_name, resources.schema, generation_config, resources.llm
        )

    _atomic_write_json(out_dir / "label.json", label_to_dict(label))
    _atomic_write_json(out_dir / "cost.json", cost.to_dict())
    return EXIT_OK


def run_pipeline(source: str, app_name: str, config: RunConfig) -> int:
    """End-to-end generation for one policy; writes segments/label/cost JSON.

    Artifacts are written atomically, so error paths never leave a partial
    label.json behind.
    """
    config.validate()
    return _run_one(source, app_name, config, _load_resources(config), config.out_dir)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {config_path}")
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config file {config_path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    return raw


def _resolve(args, config: dict, key: str, default=None):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    for candidate in (key, key.replace("_", "-")):
        if candidate in config:
            return config[candidate]
    return default


def _run_config_from_args(args) -> RunConfig:
    config = _load_config_file(getattr(args, "config", None))
    schema = _resolve(args, config, "schema")
    if schema is None:
        raise ConfigError("--schema is required (flag or config file)")
    vectors = _resolve(args, config, "vectors")
    replay = _resolve(args, config, "replay_file")
    return RunConfig(
        schema_path=Path(schema),
        out_dir=Path(_resolve(args, config, "out", ".")),
        vectors_path=Path(vectors) if vectors else None,
        classifier_spec=_resolve(args, config, "classifier", "keyword"),
        llm_backend=_resolve(args, config, "llm", "mock-keyword"),
        endpoint=_resolve(args, config, "endpoint"),
        model=_resolve(args, config, "model"),
        replay_path=Path(replay) if replay else None,
        strategy=Strategy(_resolve(args, config, "strategy", "hybrid")),
        tau=float(_resolve(args, config, "tau", 0.85)),
        threshold=float(_resolve(args, config, "threshold", 0.5)),
        context_word_limit=int(_resolve(args, config, "context_limit", 1200)),
        jobs=int(_resolve(args, config, "jobs", 1)),
    )


def _cmd_fetch(args) -> int:
    config = _load_config_file(args.config)
    policy = _resolve(args, config, "policy")
    if not policy:
        raise ConfigError("--policy URL is required")
    out = Path(_resolve(args, config, "out", "policy.html"))
    raw = fetch_policy(policy, timeout=float(_resolve(args, config, "timeout", 30.0)))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(raw.content)
    print(f"fetched {len(raw.content)} bytes ({raw.media_kind.value}) -> {out}")
    return EXIT_OK


def _cmd_segment(args) -> int:
    config = _load_config_file(args.config)
    policy = _resolve(args, config, "policy")
    if not policy:
        raise ConfigError("--policy is required")
    vectors = _resolve(args, config, "vectors")
    embedder = _build_embedder(Path(vectors) if vectors else None)
    tau = float(_resolve(args, config, "tau", 0.85))
    out_dir = Path(_resolve(args, config, "out", "."))

    raw = _read_policy(policy)
    clean = filter_language(clean_html(raw))
    verdict = quality_check(clean)
    if not verdict.accepted:
        raise _QualityRejected(verdict.reason)
    sentences = split_sentences(clean)
    segments = segment(sentences, embedder, SegmenterConfig(similarity_threshold=tau))
    _atomic_write_json(out_dir / "segments.json", _segments_payload(raw, None, segments))
    print(f"{len(sentences)} sentences -> {len(segments)} segments")
    return EXIT_OK


def _cmd_classify(args) -> int:
    config = _load_config_file(args.config)
    policy = _resolve(args, config, "policy")
    if not policy:
        raise ConfigError("--policy is required")
    vectors = _resolve(args, config, "vectors")
    embedder = _build_embedder(Path(vectors) if vectors else None)
    classifier = _build_classifier(
        _resolve(args, config, "classifier", "keyword"),
        float(_resolve(args, config, "threshold", 0.5)),
    )
    tau = float(_resolve(args, config, "tau", 0.85))
    out_dir = Path(_resolve(args, config, "out", "."))

    raw = _read_policy(policy)
    _, segments = _process_document(raw, embedder, classifier, tau)
    _atomic_write_json(out_dir / "segments.json", _segments_payload(raw, None, segments))
    labeled = sum(1 for s in segments if s.categories)
    print(f"{len(segments)} segments, {labeled} with categories")
    return EXIT_OK


def _corpus_policies(corpus_dir: Path) -> list[Path]:
    if not corpus_dir.is_dir():
        raise ConfigError(f"corpus directory not found: {corpus_dir}")
    files = sorted(
        p for p in corpus_dir.iterdir() if p.suffix.lower() in _POLICY_SUFFIXES
    )
    if not files:
        raise ConfigError(f"no policy files (*.html, *.htm, *.txt) in {corpus_dir}")
    return files


def _cmd_generate(args) -> int:
    run_config = _run_config_from_args(args)
    config = _load_config_file(args.config)
    policy = _resolve(args, config, "policy")
    corpus = _resolve(args, config, "corpus")
    if bool(policy) == bool(corpus):
        raise ConfigError("exactly one of --policy or --corpus is required")

    if policy:
        app_name = _resolve(args, config, "app") or Path(policy).stem
        return run_pipeline(policy, app_name, run_config)

    run_config.validate()
    files = _corpus_policies(Path(corpus))
    resources = _load_resources(run_config)

    def one(path: Path) -> tuple[Path, int, str]:
        out_dir = run_config.out_dir / path.stem
        try:
            return path, _run_one(str(path), path.stem, run_config, resources, out_dir), ""
        except _QualityRejected as exc:
            return path, EXIT_QUALITY, exc.reason
        except NonPrimaryLanguageDocument as exc:
            return path, EXIT_QUALITY, str(exc)
        except LlmError as exc:
            return path, EXIT_LLM, exc.progress_report()

    if run_config.jobs == 1:
        outcomes = [one(p) for p in files]
    else:
        with ThreadPoolExecutor(max_workers=run_config.jobs) as executor:
            outcomes = list(executor.map(one, files))

    failures = [(p, code, message) for p, code, message in outcomes if code != EXIT_OK]
    for path, code, message in failures:
        print(f"{path.name}: exit {code} ({message})", file=sys.stderr)
    print(f"processed {len(files)} policies, {len(files) - len(failures)} succeeded")
    return failures[0][1] if failures else EXIT_OK


def _cmd_audit(args) -> int:
    config = _load_config_file(args.config)
    schema_path = _resolve(args, config, "schema")
    if not schema_path:
        raise ConfigError("--schema is required")
    schema = load_schema(Path(schema_path))
    exclude = bool(_resolve(args, config, "exclude_omnibus", False))
    out_dir = Path(_resolve(args, config, "out", "."))
    corpus = _resolve(args, config, "corpus")

    triples: list[tuple[str, Path, Path, Path]] = []
    if corpus:
        corpus_dir = Path(corpus)
        if not corpus_dir.is_dir():
            raise ConfigError(f"corpus directory not found: {corpus_dir}")
        for truth_path in sorted(corpus_dir.glob("*.truth.json")):
            app = truth_path.name[: -len(".truth.json")]
            declared = corpus_dir / f"{app}.declared.json"
            generated = corpus_dir / f"{app}.generated.json"
            if declared.exists() and generated.exists():
                triples.append((app, truth_path, declared, generated))
        if not triples:
            raise ConfigError(f"no <app>.truth/.declared/.generated triples in {corpus_dir}")
    else:
        if len(args.labels) != 3:
            raise ConfigError("audit needs TRUTH DECLARED GENERATED label files or --corpus")
        truth, declared, generated = (Path(p) for p in args.labels)
        for path in (truth, declared, generated):
            if not path.exists():
                raise ConfigError(f"label file not found: {path}")
        triples.append((truth.stem, truth, declared, generated))

    report = build_report(
        pairs=[],
        schema=schema,
        underclaim_triples=[
            (app, load_label(t), load_label(d), load_label(g)) for app, t, d, g in triples
        ],
        exclude_omnibus_findings=exclude,
    )
    _atomic_write_json(
        out_dir / "findings.json",
        {
            "findings": report.to_dict()["findings"],
            "detection_rate": report.detection_rate,
        },
    )
    rate = "null" if report.detection_rate is None else f"{report.detection_rate:.4f}"
    print(f"{len(report.findings)} under-claim findings, detection_rate {rate}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = _load_config_file(args.config)
    schema_path = _resolve(args, config, "schema")
    if not schema_path:
        raise ConfigError("--schema is required")
    schema = load_schema(Path(schema_path))
    exclude = bool(_resolve(args, config, "exclude_omnibus", False))
    out_dir = Path(_resolve(args, config, "out", "."))
    corpus = _resolve(args, config, "corpus")

    pairs = []
    if corpus:
        corpus_dir = Path(corpus)
        if not corpus_dir.is_dir():
            raise ConfigError(f"corpus directory not found: {corpus_dir}")
        for generated_path in sorted(corpus_dir.glob("*.generated.json")):
            app = generated_path.name[: -len(".generated.json")]
            truth_path = corpus_dir / f"{app}.truth.json"
            if truth_path.exists():
                pairs.append((load_label(generated_path), load_label(truth_path)))
        if not pairs:
            raise ConfigError(f"no <app>.generated/.truth pairs in {corpus_dir}")
    else:
        if len(args.labels) != 2:
            raise ConfigError("eval needs GENERATED TRUTH label files or --corpus")
        generated_path, truth_path = (Path(p) for p in args.labels)
        for path in (generated_path, truth_path):
            if not path.exists():
                raise ConfigError(f"label file not found: {path}")
        pairs.append((load_label(generated_path), load_label(truth_path)))

    report = build_report(pairs=pairs, schema=schema)
    if exclude:
        report.sections = []
    _atomic_write(out_dir / "report.json", report.to_json())
    text = render_text(report)
    _atomic_write(out_dir / "report.txt", text)
    print(text, end="")
    return EXIT_OK


def _cmd_train_classifier(args) -> int:
    config = _load_config_file(args.config)
    train_path = _resolve(args, config, "train_data")
    if not train_path:
        raise ConfigError("--train-data is required")
    train_path = Path(train_path)
    if not train_path.exists():
        raise ConfigError(f"training file not found: {train_path}")
    vectors = _resolve(args, config, "vectors")
    if not vectors:
        raise ConfigError("--vectors is required to embed training texts")
    embedder = _build_embedder(Path(vectors))
    out = Path(_resolve(args, config, "out", "classifier.json"))

    try:
        rows = json.loads(train_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed training file: {exc}") from exc
    if not isinstance(rows, list) or not all(
        isinstance(r, dict) and "text" in r and "categories" in r for r in rows
    ):
        raise ConfigError('training file must be a list of {"text", "categories"} rows')

    X = embedder.transform([r["text"] for r in rows])
    y = [r["categories"] for r in rows]
    model = OneVsRestPracticeClassifier(
        threshold=float(_resolve(args, config, "threshold", 0.5)),
        learning_rate=float(_resolve(args, config, "learning_rate", 0.5)),
        epochs=int(_resolve(args, config, "epochs", 200)),
        l2=float(_resolve(args, config, "l2", 0.0)),
    ).fit(X, y)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    print(f"trained on {len(rows)} examples -> {out}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # Usage errors are configuration errors; 2 is reserved for quality gates.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="policy2label", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text)
        sub.set_defaults(func=func)
        sub.add_argument("--config", help="JSON config file; flags override it")
        sub.add_argument("--out", help="output file or directory")
        return sub

    sub = add("fetch", _cmd_fetch, "download a policy URL to a file")
    sub.add_argument("--policy", help="policy URL")
    sub.add_argument("--timeout", type=float, help="request timeout in seconds")

    sub = add("segment", _cmd_segment, "clean, gate, and segment one policy")
    sub.add_argument("--policy", help="policy file or URL")
    sub.add_argument("--vectors", help="word-vector file for merge similarity")
    sub.add_argument("--tau", type=float, help="merge similarity threshold")

    sub = add("classify", _cmd_classify, "segment and label one policy")
    sub.add_argument("--policy", help="policy file or URL")
    sub.add_argument("--vectors", help="word-vector file")
    sub.add_argument("--classifier", help="'keyword', model JSON path, or external:<sidecar>")
    sub.add_argument("--tau", type=float, help="merge similarity threshold")
    sub.add_argument("--threshold", type=float, help="category inclusion threshold")

    sub = add("generate", _cmd_generate, "produce a privacy label for one or many policies")
    sub.add_argument("--policy", help="policy file or URL")
    sub.add_argument("--corpus", help="directory of policy files")
    sub.add_argument("--app", help="app name used in prompts")
    sub.add_argument("--schema", help="label schema JSON")
    sub.add_argument("--vectors", help="word-vector file")
    sub.add_argument("--classifier", help="'keyword', model JSON path, or external:<sidecar>")
    sub.add_argument("--llm", choices=["http", "mock-keyword", "replay"], help="LLM backend")
    sub.add_argument("--endpoint", help="completion endpoint URL (http backend)")
    sub.add_argument("--model", help="model name (http backend)")
    sub.add_argument("--replay-file", help="replay fixture (replay backend)")
    sub.add_argument("--strategy", choices=["hybrid", "full-llm"], help="generation strategy")
    sub.add_argument("--tau", type=float, help="merge similarity threshold")
    sub.add_argument("--threshold", type=float, help="category inclusion threshold")
    sub.add_argument("--context-limit", type=int, help="context window budget in words")
    sub.add_argument("--jobs", type=int, help="parallel documents in corpus mode")

    sub = add("audit", _cmd_audit, "find under-claimed practices in declared labels")
    sub.add_argument("labels", nargs="*", help="TRUTH DECLARED GENERATED label files")
    sub.add_argument("--corpus", help="directory of <app>.{truth,declared,generated}.json")
    sub.add_argument("--schema", help="label schema JSON")
    sub.add_argument("--exclude-omnibus", action="store_true", default=None)

    sub = add("eval", _cmd_eval, "score generated labels against ground truth")
    sub.add_argument("labels", nargs="*", help="GENERATED TRUTH label files")
    sub.add_argument("--corpus", help="directory of <app>.{generated,truth}.json")
    sub.add_argument("--schema", help="label schema JSON")
    sub.add_argument("--exclude-omnibus", action="store_true", default=None)

    sub = add("train-classifier", _cmd_train_classifier, "fit the reference linear classifier")
    sub.add_argument("--train-data", help='JSON list of {"text", "categories"} rows')
    sub.add_argument("--vectors", help="word-vector file")
    sub.add_argument("--epochs", type=int, help="training epochs")
    sub.add_argument("--learning-rate", type=float, help="gradient step size")
    sub.add_argument("--l2", type=float, help="L2 regularization strength")
    sub.add_argument("--threshold", type=float, help="category inclusion threshold")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _QualityRejected as exc:
        print(exc.reason, file=sys.stderr)
        return EXIT_QUALITY
    except NonPrimaryLanguageDocument as exc:
        print(f"NonPrimaryLanguageDocument: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    except LlmError as exc:
        print(f"LLM failure: {exc.progress_report()}", file=sys.stderr)
        return EXIT_LLM
    except (ConfigError, SchemaInvalid) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Policy2LabelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
