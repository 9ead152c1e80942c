"""Sentence-level sentiment scoring and review-level aggregation.

Primary path ingests externally computed probability triples per sentence;
the bundled word-list scorer is a lower-fidelity fallback so the pipeline
stays self-contained when no external scores are supplied.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .ingest import ValidationReport
from .textprep import Sentence, _softmax3, tokenize

PROB_SUM_TOL = 1e-6

# Tokens before a hit that are searched for a negation marker.
NEGATION_WINDOW = 3

# Softmax logit for the neutral class when counting word-list hits.
NEUTRAL_BASELINE = 0.5


@dataclass(frozen=True)
class SentimentTriple:
    """Class probabilities (negative, neutral, positive); must sum to 1."""

    p_negative: float
    p_neutral: float
    p_positive: float

    def __post_init__(self):
        probs = (self.p_negative, self.p_neutral, self.p_positive)
        for p in probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        total = sum(probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {total}, expected 1 +/- {PROB_SUM_TOL}")

    def expected_value(self) -> float:
        return self.p_positive - self.p_negative


class SentimentLabel(enum.Enum):
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    POSITIVE = "positive"

    @property
    def numeric(self) -> int:
        return _LABEL_NUMERIC[self]


_LABEL_NUMERIC = {
    SentimentLabel.NEGATIVE: -1,
    SentimentLabel.NEUTRAL: 0,
    SentimentLabel.POSITIVE: 1,
}


def label_from_triple(triple: SentimentTriple) -> SentimentLabel:
    """Argmax class; exact ties prefer neutral, then negative."""
    best = max(triple.p_negative, triple.p_neutral, triple.p_positive)
    if triple.p_neutral == best:
        return SentimentLabel.NEUTRAL
    if triple.p_negative == best:
        return SentimentLabel.NEGATIVE
    return SentimentLabel.POSITIVE


@dataclass(frozen=True)
class WordLists:
    positive: frozenset[str]
    negative: frozenset[str]
    negations: frozenset[str]


def load_word_list(path) -> frozenset[str]:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def bundled_word_lists() -> WordLists:
    base = resources.files("urbansent") / "data"
    return WordLists(
        positive=load_word_list(base / "positive_words.txt"),
        negative=load_word_list(base / "negative_words.txt"),
        negations=load_word_list(base / "negation_words.txt"),
    )


_DEFAULT_LISTS: WordLists | None = None


def _default_lists() -> WordLists:
    global _DEFAULT_LISTS
    if _DEFAULT_LISTS is None:
        _DEFAULT_LISTS = bundled_word_lists()
    return _DEFAULT_LISTS


def lexicon_score(sentence, word_lists: WordLists | None = None) -> SentimentTriple:
    """Score a sentence by word-list hits with a 3-token negation window.

    A hit preceded by a negation marker within the window counts for the
    opposite polarity. The hit counts feed a temperature-1 softmax over
    (negative_hits, 0.5, positive_hits), so a sentence with no hits is
    neutral and each unopposed hit pushes probability toward its class.
    """
    lists = word_lists if word_lists is not None else _default_lists()
    text = sentence.text if isinstance(sentence, Sentence) else str(sentence)
    tokens = tokenize(text)
    pos_hits = 0
    neg_hits = 0
    for i, tok in enumerate(tokens):
        if tok in lists.positive:
            polarity = 1
        elif tok in lists.negative:
            polarity = -1
        else:
            continue
        window = tokens[max(0, i - NEGATION_WINDOW):i]
        if any(w in lists.negations for w in window):
            polarity = -polarity
        if polarity > 0:
            pos_hits += 1
        else:
            neg_hits += 1
    p_neg, p_neu, p_pos = _softmax3(float(neg_hits), NEUTRAL_BASELINE, float(pos_hits))
    return SentimentTriple(p_negative=p_neg, p_neutral=p_neu, p_positive=p_pos)


SCORE_COLUMNS = ("review_id", "sentence_index", "p_negative", "p_neutral", "p_positive")


def load_external_scores(path, known_keys=None):
    """Parse a per-sentence score CSV into {(review_id, index): triple}.

    Rows with invalid probabilities become row errors; keys outside
    ``known_keys`` (when given) go to the skip report. Both are non-fatal.
    """
    path = Path(path)
    report = ValidationReport()
    scores: dict[tuple[str, int], SentimentTriple] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, no header row")
        missing = [c for c in SCORE_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        for rownum, row in enumerate(reader, start=2):
            try:
                key = (row["review_id"], int(row["sentence_index"]))
                triple = SentimentTriple(
                    p_negative=float(row["p_negative"]),
                    p_neutral=float(row["p_neutral"]),
                    p_positive=float(row["p_positive"]),
                )
            except (TypeError, ValueError) as exc:
                report.add(path, rownum, "-", str(exc))
                continue
            if known_keys is not None and key not in known_keys:
                report.skipped_reviews.append(
                    {"file": str(path), "review_id": key[0], "sentence_index": key[1], "reason": "unknown sentence key"}
                )
                continue
            if key in scores:
                report.add(path, rownum, "review_id,sentence_index", f"duplicate key {key!r}; row rejected")
                continue
            scores[key] = triple
    return scores, report


def score_sentences(sentences, external=None, word_lists=None):
    """Attach a triple to every density-related sentence.

    External scores win where present; sentences they miss fall back to
    lexicon_score. Returns ({key: triple}, fallback_count).
    """
    triples: dict[tuple[str, int], SentimentTriple] = {}
    fallbacks = 0
    for sent in sentences:
        if not sent.density_related:
            continue
        key = (sent.review_id, sent.index)
        if external is not None and key in external:
            triples[key] = external[key]
        else:
            triples[key] = lexicon_score(sent, word_lists)
            if external is not None:
                fallbacks += 1
    return triples, fallbacks


def review_sentiment(sentences, triples, mode: str = "label") -> float | None:
    """Mean sentiment over a review's density-related sentences.

    ``label`` mode averages the {-1, 0, +1} label values; ``expected`` mode
    averages (p_positive - p_negative). Returns None when the review has no
    density-related sentence, marking it not applicable downstream.
    """
    if mode not in ("label", "expected"):
        raise ValueError(f"unknown sentiment mode {mode!r}")
    values = []
    for sent in sentences:
        if not sent.density_related:
            continue
        key = (sent.review_id, sent.index)
        try:
            triple = triples[key]
        except KeyError:
            raise ValueError(f"no sentiment triple for sentence {key!r}") from None
        if mode == "label":
            values.append(float(label_from_triple(triple).numeric))
        else:
            values.append(triple.expected_value())
    if not values:
        return None
    return sum(values) / len(values)
