"""Deterministic stopword-frequency language detection.

Good enough to separate whole paragraphs of the major European languages,
which is all the block-level filter needs. Not a general-purpose detector:
confidence is the share of stopword hits won by the best language, so short
or stopword-free text detects as ("und", 0.0).
"""

from __future__ import annotations

from .embeddings import tokenize

# Function words chosen to be frequent and mostly language-exclusive.
# Deliberately omits one-letter words and heavy cross-language collisions
# ("a", "on", "no", "me", ...).
_STOPWORDS: dict[str, frozenset[str]] = {
    "en": frozenset(
        """the and of to in is it that this for with are was were will your you
        we our us they them their have has had from not can may must when which
        what how been being would could should there here about into any all
        some more other than then if because while during before after""".split()
    ),
    "fr": frozenset(
        """le les des une du au aux et ou est sont nous vous votre vos nos ne
        pas que qui quoi dans sur avec pour par cette ces son ses leur leurs
        mais comme plus tres aussi donc ainsi chez sans sous entre lorsque
        afin toute toutes tous peut peuvent sera seront notre etre avons avez""".split()
    ),
    "de": frozenset(
        """der die das und oder ist sind wir sie ihre ihren ihrer nicht mit von
        zu dem den ein eine einen einer werden wird kann wenn aber auch noch
        nach bei aus durch wie diese dieser dieses unserer unsere ihnen haben
        hat sich nur alle als dass beim zum zur""".split()
    ),
    "es": frozenset(
        """el los las una para por con su sus es son como pero mas nosotros
        usted ustedes nuestra nuestro nuestras nuestros que cuando donde esta
        este estos estas ser estar tiene tienen puede pueden sobre entre sin
        tambien porque hasta desde cualquier todos todas""".split()
    ),
    "it": frozenset(
        """il lo gli della delle dello dei degli per con che non sono siamo
        questo questa questi queste come anche piu nella nelle nel dal dalla
        essere avere abbiamo avete hanno quando dove ogni tutti tutte senza
        tra fra presso nostro nostra vostri vostre""".split()
    ),
}

UNKNOWN = "und"


def detect_language(text: str) -> tuple[str, float]:
    """Return (language code, confidence in [0, 1]).

    Confidence is best-language stopword hits over total stopword hits across
    all languages; zero hits yields ("und", 0.0) so callers can treat the
    block as undecidable rather than foreign.
    """
    tokens = tokenize(text)
    if not tokens:
        return UNKNOWN, 0.0
    hits = {lang: sum(1 for t in tokens if t in words) for lang, words in _STOPWORDS.items()}
    total = sum(hits.values())
    if total == 0:
        return UNKNOWN, 0.0
    best = max(sorted(hits), key=lambda lang: hits[lang])
    return best, hits[best] / total
