"""Text preparation: sentence segmentation, tokenization, TF-IDF.

Segmentation and tokenization rules are normative for the whole pipeline:
sentence indices key external sentiment files, and token boundaries drive
lexicon matching, so both are kept deliberately simple and bit-stable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

# Sentence delimiters: . ; ? ! plus the ellipsis, which counts as a single
# delimiter whether written as three ASCII dots or as the one-codepoint form.
_DELIM_RE = re.compile(r"(?:\.\.\.|…|[.;?!])")

# Tokens are maximal runs of (non-underscore) alphanumerics; an apostrophe is
# kept only when it sits between two such runs ("don't"). The typographic
# apostrophe is normalized to ASCII.
_TOKEN_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*", re.UNICODE)


@dataclass(frozen=True)
class Sentence:
    """One segment of a review, in review order."""

    review_id: str
    index: int
    text: str
    density_related: bool = False


def split_segments(text: str) -> list[str]:
    """Split ``text`` into raw segments that exactly cover it.

    A segment ends after a maximal run of sentence delimiters (consecutive
    delimiters collapse into the run) plus any whitespace that follows, so
    ``"".join(split_segments(text)) == text`` always holds.
    """
    if not text:
        return []
    boundaries = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _DELIM_RE.search(text, pos)
        if m is None:
            break
        end = m.end()
        # absorb the rest of the delimiter run
        while True:
            m2 = _DELIM_RE.match(text, end)
            if m2 is None:
                break
            end = m2.end()
        # trailing whitespace belongs to this segment
        while end < n and text[end].isspace():
            end += 1
        boundaries.append(end)
        pos = end
    if not boundaries or boundaries[-1] != n:
        boundaries.append(n)
    segments = []
    start = 0
    for end in boundaries:
        segments.append(text[start:end])
        start = end
    return segments


def segment_sentences(text: str, review_id: str = "") -> list[Sentence]:
    """Segment review text on . ; ? ! and ellipsis.

    Delimiters stay with the preceding sentence; runs of consecutive
    delimiters collapse; whitespace-only fragments are dropped. Every
    non-empty text yields at least one sentence.
    """
    sentences = []
    for raw in split_segments(text):
        stripped = raw.strip()
        if not stripped:
            continue
        sentences.append(Sentence(review_id=review_id, index=len(sentences), text=stripped))
    return sentences


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics, keeping in-word apostrophes."""
    return [m.group(0).replace("’", "'") for m in _TOKEN_RE.finditer(text.lower())]


@dataclass
class DocTermMatrix:
    """Sparse document-term count matrix over a sorted vocabulary."""

    vocabulary: list[str]
    counts: sparse.csr_matrix
    doc_ids: list[str]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.vocabulary)}

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape


@dataclass
class TfidfMatrix:
    """Real-valued TF-IDF weights with the same layout as a DocTermMatrix."""

    vocabulary: list[str]
    weights: sparse.csr_matrix
    doc_ids: list[str]
    normalized: bool = True

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def dense(self) -> np.ndarray:
        return self.weights.toarray()


def build_doc_term_matrix(docs, doc_ids=None, min_df: int = 1) -> DocTermMatrix:
    """Count raw term frequencies over the union vocabulary (sorted).

    ``docs`` may be strings (tokenized here) or pre-tokenized lists.
    Raises ValueError when no document contributes a single token.
    """
    docs = list(docs)
    if not docs:
        raise ValueError("cannot build a document-term matrix from zero documents")
    if doc_ids is None:
        doc_ids = [str(i) for i in range(len(docs))]
    token_lists = [tokenize(d) if isinstance(d, str) else list(d) for d in docs]
    df: dict[str, int] = {}
    for toks in token_lists:
        for t in set(toks):
            df[t] = df.get(t, 0) + 1
    vocabulary = sorted(t for t, n in df.items() if n >= min_df)
    if not vocabulary:
        raise ValueError("corpus has no tokens (all documents empty)")
    index = {t: i for i, t in enumerate(vocabulary)}
    data, indices, indptr = [], [], [0]
    for toks in token_lists:
        row: dict[int, int] = {}
        for t in toks:
            j = index.get(t)
            if j is not None:
                row[j] = row.get(j, 0) + 1
        for j in sorted(row):
            indices.append(j)
            data.append(row[j])
        indptr.append(len(indices))
    counts = sparse.csr_matrix(
        (np.asarray(data, dtype=np.int64), indices, indptr),
        shape=(len(docs), len(vocabulary)),
    )
    return DocTermMatrix(vocabulary=vocabulary, counts=counts, doc_ids=list(doc_ids))


def tfidf_transform(m: DocTermMatrix, normalize: bool = True) -> TfidfMatrix:
    """Smoothed TF-IDF: weight = tf * (ln((1+N)/(1+df)) + 1), rows L2-normalized.

    The +1 smoothing in both numerator and denominator plus the +1 addend keep
    every weight finite and strictly positive for present terms; the exact
    formula is frozen so downstream tests are bit-stable.
    """
    n_docs = m.counts.shape[0]
    df = np.asarray((m.counts > 0).sum(axis=0)).ravel()
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    weights = m.counts.astype(np.float64).multiply(idf).tocsr()
    if normalize:
        norms = np.sqrt(np.asarray(weights.multiply(weights).sum(axis=1)).ravel())
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        weights = sparse.diags(scale).dot(weights).tocsr()
    return TfidfMatrix(
        vocabulary=list(m.vocabulary),
        weights=weights,
        doc_ids=list(m.doc_ids),
        normalized=normalize,
    )


def vectorize_docs(docs, vocabulary: list[str]) -> sparse.csr_matrix:
    """Count matrix for new documents against a fixed vocabulary.

    Unknown tokens are dropped, matching prediction-time alignment rules.
    """
    index = {t: i for i, t in enumerate(vocabulary)}
    data, indices, indptr = [], [], [0]
    for d in docs:
        toks = tokenize(d) if isinstance(d, str) else list(d)
        row: dict[int, int] = {}
        for t in toks:
            j = index.get(t)
            if j is not None:
                row[j] = row.get(j, 0) + 1
        for j in sorted(row):
            indices.append(j)
            data.append(row[j])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=np.int64), indices, indptr),
        shape=(len(indptr) - 1, len(vocabulary)),
    )


def tfidf_for_new_docs(docs, fitted: DocTermMatrix, normalize: bool = True) -> sparse.csr_matrix:
    """TF-IDF rows for unseen documents using document frequencies from ``fitted``."""
    df = doc_frequencies(fitted)
    return tfidf_from_stats(docs, fitted.vocabulary, df, fitted.counts.shape[0], normalize=normalize)


def doc_frequencies(m: DocTermMatrix) -> np.ndarray:
    return np.asarray((m.counts > 0).sum(axis=0)).ravel()


def tfidf_from_stats(docs, vocabulary, df, n_docs: int, normalize: bool = True) -> sparse.csr_matrix:
    """TF-IDF rows from persisted fit statistics (vocabulary, df, corpus size)."""
    idf = np.log((1.0 + n_docs) / (1.0 + np.asarray(df, dtype=float))) + 1.0
    counts = vectorize_docs(docs, list(vocabulary))
    weights = counts.astype(np.float64).multiply(idf).tocsr()
    if normalize:
        norms = np.sqrt(np.asarray(weights.multiply(weights).sum(axis=1)).ravel())
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        weights = sparse.diags(scale).dot(weights).tocsr()
    return weights


def idf_vector(m: DocTermMatrix) -> np.ndarray:
    """Smoothed IDF per vocabulary term, matching tfidf_transform."""
    n_docs = m.counts.shape[0]
    df = np.asarray((m.counts > 0).sum(axis=0)).ravel()
    return np.log((1.0 + n_docs) / (1.0 + df)) + 1.0


def export_matrix_csv(m, path) -> None:
    """Debug export: doc_id x token header, dense rows."""
    mat = m.counts if isinstance(m, DocTermMatrix) else m.weights
    dense = mat.toarray()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("doc_id," + ",".join(m.vocabulary) + "\n")
        for doc_id, row in zip(m.doc_ids, dense):
            cells = ",".join(repr(float(v)) if v % 1 else str(int(v)) for v in row)
            fh.write(f"{doc_id},{cells}\n")


def _softmax3(a: float, b: float, c: float) -> tuple[float, float, float]:
    """Numerically stable 3-way softmax (shared by the sentiment fallback)."""
    m = max(a, b, c)
    ea, eb, ec = math.exp(a - m), math.exp(b - m), math.exp(c - m)
    s = ea + eb + ec
    return ea / s, eb / s, ec / s
