"""Descriptive and inferential statistics for the aggregated sentiment data.

Land-use-mix entropy, lexical salience/valence points, a Mann-Whitney U test
with exact small-sample p-values, Pearson correlation, and column Z-scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .sentiment import SentimentLabel
from .textprep import tokenize

SHARE_SUM_TOL = 1e-9

# Largest combined sample size for which the exact Mann-Whitney null
# distribution is enumerated (C(12,6) = 924 assignments at worst).
EXACT_LIMIT = 12


def lum(proportions) -> float:
    """Normalized Shannon entropy of land-use shares (zero shares excluded)."""
    shares = [float(p) for p in proportions]
    for p in shares:
        if p < 0.0:
            raise ValueError(f"negative land-use share {p}")
    total = sum(shares)
    if abs(total - 1.0) > SHARE_SUM_TOL:
        raise ValueError(f"land-use shares sum to {total}, expected 1 +/- {SHARE_SUM_TOL}")
    present = [p for p in shares if p > 0.0]
    if not present:
        raise ValueError("no nonzero land-use share")
    n = len(present)
    if n == 1:
        return 0.0
    entropy = -sum(p * math.log(p) for p in present)
    return entropy / math.log(n)


@dataclass(frozen=True)
class LsvaPoint:
    word: str
    salience: float
    valence: float
    n_total: int
    n_positive: int
    n_negative: int


def lsva(review_texts, review_labels, top_k: int = 30, stoplist=None) -> list[LsvaPoint]:
    """Top-k words by salience with per-word valence.

    ``review_texts`` and ``review_labels`` are aligned sequences: one text and
    one SentimentLabel per review. A word's n_total counts reviews containing
    it at least once; salience is log10(n_total); valence is
    (n_positive - n_negative) / n_total. Stoplist words are excluded before
    ranking. Ties in salience break lexicographically.
    """
    texts = list(review_texts)
    labels = list(review_labels)
    if not texts:
        raise ValueError("empty review corpus")
    if len(texts) != len(labels):
        raise ValueError(f"{len(texts)} texts but {len(labels)} labels")
    stop = frozenset(stoplist) if stoplist else frozenset()
    totals: dict[str, int] = {}
    positives: dict[str, int] = {}
    negatives: dict[str, int] = {}
    for text, label in zip(texts, labels):
        for word in set(tokenize(text)):
            if word in stop:
                continue
            totals[word] = totals.get(word, 0) + 1
            if label is SentimentLabel.POSITIVE:
                positives[word] = positives.get(word, 0) + 1
            elif label is SentimentLabel.NEGATIVE:
                negatives[word] = negatives.get(word, 0) + 1
    points = []
    for word, n_total in totals.items():
        n_pos = positives.get(word, 0)
        n_neg = negatives.get(word, 0)
        points.append(
            LsvaPoint(
                word=word,
                salience=math.log10(n_total),
                valence=(n_pos - n_neg) / n_total,
                n_total=n_total,
                n_positive=n_pos,
                n_negative=n_neg,
            )
        )
    points.sort(key=lambda p: (-p.salience, p.word))
    return points[:top_k]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str  # 'exact' or 'normal_approx'


def _midranks(values) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def mann_whitney_u(a, b) -> TestResult:
    """Two-sided Mann-Whitney U with U = min(U_a, U_b).

    Tie-free samples with combined size <= 12 get an exact p-value by
    enumerating every assignment of ranks to group a; larger or tied samples
    use the normal approximation with tie correction and continuity
    correction.
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n_a, n_b = len(a), len(b)
    n = n_a + n_b
    combined = a + b
    ranks = _midranks(combined)
    r_a = sum(ranks[:n_a])
    u_a = r_a - n_a * (n_a + 1) / 2.0
    u_b = n_a * n_b - u_a
    u = min(u_a, u_b)
    has_ties = len(set(combined)) < n

    if n <= EXACT_LIMIT and not has_ties:
        # p = P(min(U_a, U_b) <= u_obs) over all C(n, n_a) rank assignments
        count = 0
        total = 0
        for subset in combinations(range(1, n + 1), n_a):
            ra = float(sum(subset))
            ua = ra - n_a * (n_a + 1) / 2.0
            ub = n_a * n_b - ua
            total += 1
            if min(ua, ub) <= u + 1e-12:
                count += 1
        return TestResult(statistic=u, p_value=count / total, method="exact")

    mean_u = n_a * n_b / 2.0
    tie_term = 0.0
    seen: dict[float, int] = {}
    for v in combined:
        seen[v] = seen.get(v, 0) + 1
    for t in seen.values():
        tie_term += t ** 3 - t
    var_u = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var_u <= 0:
        # all values identical: no evidence of a location shift
        return TestResult(statistic=u, p_value=1.0, method="normal_approx")
    z = (u - mean_u + 0.5) / math.sqrt(var_u)
    p = min(1.0, 2.0 * _phi(z))
    return TestResult(statistic=u, p_value=p, method="normal_approx")


def _phi(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def pearson(x, y) -> float:
    """Sample correlation coefficient."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D of equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance input")
    return float(dx @ dy) / math.sqrt(sx * sy)


def zscore(matrix, columns=None):
    """Standardize each column to mean 0, sample sd 1 (ddof=1).

    Returns (standardized, means, sds). A constant column is an error naming
    the offending column.
    """
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 rows to standardize")
    means = x.mean(axis=0)
    sds = x.std(axis=0, ddof=1)
    for j, sd in enumerate(sds):
        if sd == 0.0:
            name = columns[j] if columns is not None else f"column {j}"
            raise ValueError(f"constant column {name!r} cannot be standardized")
    return (x - means) / sds, means, sds
