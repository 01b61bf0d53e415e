"""Small-sample statistics: ranks, correlations, signed-rank, Friedman.

Test statistics and exact null distributions are computed here; scipy
supplies only the continuous reference distributions (t, chi-square,
normal).
"""
from __future__ import annotations

import csv
import functools
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from . import kernels as K
from .errors import DegenerateError, DomainError

EXACT_WILCOXON_MAX_N = 20
EXACT_SPEARMAN_MAX_N = 9


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n: int
    notes: tuple[str, ...] = ()

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0 or math.isnan(self.p_value)):
            raise DomainError(f"p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class PairwiseResult(TestResult):
    pair: tuple[str, str] = ("", "")
    p_unadjusted: float = math.nan
    rank_sum_diff: float = math.nan


def _vector(x, name: str = "x") -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite values")
    return a


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """Ranks 1..n; tied values share the mean of the positions they span."""
    a = _vector(x)
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(a.size)
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_groups(values: np.ndarray) -> np.ndarray:
    _, counts = np.unique(values, return_counts=True)
    return counts[counts > 1]


def _paired(x, y, min_n: int) -> tuple[np.ndarray, np.ndarray]:
    a, b = _vector(x, "x"), _vector(y, "y")
    if a.size != b.size:
        raise DomainError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < min_n:
        raise DomainError(f"need at least {min_n} pairs, got {a.size}")
    return a, b


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    da, db = a - a.mean(), b - b.mean()
    ss = math.sqrt(float(da @ da) * float(db @ db))
    if ss == 0.0:
        raise DegenerateError("correlation undefined for a constant input")
    return max(-1.0, min(1.0, float(da @ db) / ss))


def _t_pvalue(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), n - 2)))


def pearson(x, y) -> TestResult:
    a, b = _paired(x, y, 4)
    r = _corr(a, b)
    return TestResult(r, _t_pvalue(r, a.size), "pearson", a.size)


def _spearman_exact_p(ra: np.ndarray, rb: np.ndarray, rho: float) -> float:
    n = ra.size
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    rb_perm = rb[perms]
    da = ra - ra.mean()
    db = rb_perm - rb_perm.mean(axis=1, keepdims=True)
    r = (db @ da) / np.sqrt((da @ da) * np.einsum("ij,ij->i", db, db))
    return float(np.mean(np.abs(r) >= abs(rho) - 1e-12))


def spearman(x, y, exact: bool = False) -> TestResult:
    """Rank correlation with tie-averaged ranks.

    The p-value uses the Student-t transform, or full permutation of the
    ranks when ``exact`` is set (n <= 9).
    """
    a, b = _paired(x, y, 4)
    ra, rb = average_ranks(a), average_ranks(b)
    rho = _corr(ra, rb)
    notes = []
    if len(_tie_groups(a)) or len(_tie_groups(b)):
        notes.append("ties present; average ranks used")
    if exact:
        if a.size > EXACT_SPEARMAN_MAX_N:
            raise DomainError(f"exact Spearman limited to n <= {EXACT_SPEARMAN_MAX_N}")
        return TestResult(rho, _spearman_exact_p(ra, rb, rho), "spearman-exact", a.size, tuple(notes))
    return TestResult(rho, _t_pvalue(rho, a.size), "spearman", a.size, tuple(notes))


def signed_rank_null(abs_ranks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Null distribution of the positive-rank sum: ``(values, probabilities)``."""
    doubled = np.rint(2.0 * np.asarray(abs_ranks)).astype(np.int64)
    counts = K.signed_rank_counts(doubled)
    support = np.flatnonzero(counts)
    return support / 2.0, counts[support] / counts.sum()


def wilcoxon_signed_rank(x, y) -> TestResult:
    """Two-sided signed-rank test on ``x - y``.

    Zero differences are dropped and tied magnitudes share average ranks.
    The null is enumerated exactly for up to 20 non-zero differences; above
    that a tie-corrected normal approximation is used.
    """
    a, b = _paired(x, y, 1)
    d = a - b
    d = d[d != 0.0]
    if d.size == 0:
        raise DegenerateError("all paired differences are zero")
    n = d.size
    ranks = average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    notes = []
    if a.size != n:
        notes.append(f"{a.size - n} zero differences dropped")
    ties = _tie_groups(np.abs(d))
    if len(ties):
        notes.append("tied magnitudes; average ranks used")
    if n <= EXACT_WILCOXON_MAX_N:
        values, probs = signed_rank_null(ranks)
        p = float(min(1.0, 2.0 * probs[values <= w + 1e-9].sum()))
        return TestResult(w, p, "wilcoxon-exact", n, tuple(notes))
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(ties ** 3 - ties)) / 48.0
    z = (w - mean) / math.sqrt(var)
    notes.append("normal approximation")
    return TestResult(w, float(min(1.0, 2.0 * sps.norm.sf(abs(z)))), "wilcoxon-normal", n, tuple(notes))


def _matrix(matrix) -> np.ndarray:
    try:
        m = np.asarray(matrix, dtype=float)
    except ValueError:
        raise DomainError("ragged matrix") from None
    if m.ndim != 2:
        raise DomainError("expected an n x k matrix")
    n, k = m.shape
    if n < 2 or k < 2:
        raise DomainError(f"need n >= 2 rows and k >= 2 columns, got {n} x {k}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix contains non-finite values")
    return m


def row_ranks(matrix) -> np.ndarray:
    m = _matrix(matrix)
    return np.vstack([average_ranks(row) for row in m])


def friedman(matrix) -> TestResult:
    """Friedman chi-square over within-row ranks, with the tie correction."""
    ranks = row_ranks(matrix)
    n, k = ranks.shape
    rsum = ranks.sum(axis=0)
    tie_term = sum(float(np.sum(t ** 3 - t)) for t in map(_tie_groups, ranks))
    denom = n * k * (k + 1) - tie_term / (k - 1)
    notes = []
    if denom <= 0:
        notes.append("every row fully tied")
        return TestResult(0.0, 1.0, "friedman", n, tuple(notes))
    chi2 = (12.0 * float(rsum @ rsum) - 3.0 * n * n * k * (k + 1) ** 2) / denom
    chi2 = max(chi2, 0.0)
    if tie_term:
        notes.append("tie-corrected")
    return TestResult(chi2, float(sps.chi2.sf(chi2, k - 1)), "friedman", n, tuple(notes))


def _row_pair_distribution(row: np.ndarray, i: int, j: int) -> dict[int, float]:
    """Distribution of 2*(rank_i - rank_j) when the row's ranks are
    permuted uniformly."""
    k = row.size
    doubled = np.rint(2.0 * row).astype(np.int64)
    dist: dict[int, float] = {}
    w = 1.0 / (k * (k - 1))
    for a in range(k):
        for b in range(k):
            if a != b:
                key = int(doubled[a] - doubled[b])
                dist[key] = dist.get(key, 0.0) + w
    return dist


def rank_sum_difference_null(ranks: np.ndarray, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact null of ``R_i - R_j`` under within-row exchangeability,
    conditioned on each row's rank multiset."""
    offset = 0
    probs = np.ones(1)
    for row in ranks:
        dist = _row_pair_distribution(row, i, j)
        lo, hi = min(dist), max(dist)
        pmf = np.zeros(hi - lo + 1)
        for key, p in dist.items():
            pmf[key - lo] += p
        probs = np.convolve(probs, pmf)
        offset += lo
    support = (np.arange(probs.size) + offset) / 2.0
    keep = probs > 0
    return support[keep], probs[keep]


def posthoc_pairwise(matrix, labels: Sequence[str] | None = None,
                     correction: str = "bonferroni", method: str = "exact") -> list[PairwiseResult]:
    """Pairwise comparisons of Friedman rank sums.

    ``method="exact"`` refers ``|R_i - R_j|`` to its permutation
    distribution; ``method="normal"`` uses the Dunn z statistic
    ``|R_i - R_j| / sqrt(n k (k + 1) / 6)``. Bonferroni multiplies by the
    number of pairs, capped at 1.
    """
    ranks = row_ranks(matrix)
    n, k = ranks.shape
    labels = list(labels) if labels is not None else [f"c{i}" for i in range(k)]
    if len(labels) != k:
        raise DomainError("one label per column required")
    if correction not in ("bonferroni", "none"):
        raise DomainError(f"unknown correction {correction!r}")
    if method not in ("exact", "normal"):
        raise DomainError(f"unknown method {method!r}")
    rsum = ranks.sum(axis=0)
    pairs = list(itertools.combinations(range(k), 2))
    m = len(pairs) if correction == "bonferroni" else 1
    se = math.sqrt(n * k * (k + 1) / 6.0)
    out = []
    for i, j in pairs:
        diff = float(rsum[i] - rsum[j])
        z = abs(diff) / se
        if method == "exact":
            values, probs = rank_sum_difference_null(ranks, i, j)
            p_raw = float(min(1.0, probs[np.abs(values) >= abs(diff) - 1e-9].sum()))
        else:
            p_raw = float(min(1.0, 2.0 * sps.norm.sf(z)))
        out.append(PairwiseResult(z, min(1.0, p_raw * m), f"posthoc-{method}-{correction}", n,
                                  (), (labels[i], labels[j]), p_raw, diff))
    return out


@functools.lru_cache(maxsize=64)
def _lilliefors_null(n: int, n_resamples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    out = np.empty(n_resamples)
    chunk = max(1, 2_000_000 // n)
    for start in range(0, n_resamples, chunk):
        stop = min(n_resamples, start + chunk)
        out[start:stop] = _lilliefors_stat(rng.standard_normal((stop - start, n)))
    out.setflags(write=False)
    return out


def _lilliefors_stat(samples: np.ndarray) -> np.ndarray:
    """Row-wise max |ECDF - fitted normal CDF|."""
    x = np.sort(samples, axis=-1)
    n = x.shape[-1]
    z = (x - x.mean(axis=-1, keepdims=True)) / x.std(axis=-1, ddof=1, keepdims=True)
    cdf = sps.norm.cdf(z)
    i = np.arange(1, n + 1)
    return np.maximum((i / n - cdf).max(axis=-1), (cdf - (i - 1) / n).max(axis=-1))


def normality_screen(x, n_resamples: int = 10_000, seed: int = 0) -> TestResult:
    """Lilliefors test: Kolmogorov distance to the normal with fitted
    mean and variance, p-value by Monte Carlo under the normal null."""
    a = _vector(x)
    if a.size < 5:
        raise DomainError("normality screen needs n >= 5")
    if np.ptp(a) == 0:
        raise DegenerateError("normality undefined for a constant sample")
    d = float(_lilliefors_stat(a[None, :])[0])
    null = _lilliefors_null(a.size, n_resamples, seed)
    p = (np.count_nonzero(null >= d - 1e-12) + 1) / (n_resamples + 1)
    return TestResult(d, float(p), "lilliefors-mc", a.size, (f"{n_resamples} resamples",))


@dataclass(frozen=True)
class Descriptives:
    mean: float
    std: float
    median: float
    n: int
    notes: tuple[str, ...] = ()


def descriptives(x) -> Descriptives:
    a = _vector(x)
    if a.size == 1:
        return Descriptives(float(a[0]), 0.0, float(a[0]), 1, ("std undefined for n = 1; reported as 0",))
    return Descriptives(float(a.mean()), float(a.std(ddof=1)), float(np.median(a)), a.size)


@dataclass
class CorrelationMatrix:
    labels: list[str]
    rho: np.ndarray  # upper triangle filled, rest NaN
    p: np.ndarray
    method: str
    excluded: list[str] = field(default_factory=list)
    undefined: list[tuple[str, str]] = field(default_factory=list)

    def pairs(self):
        for i, j in itertools.combinations(range(len(self.labels)), 2):
            yield self.labels[i], self.labels[j], float(self.rho[i, j]), float(self.p[i, j])

    def cell(self, a: str, b: str) -> tuple[float, float]:
        i, j = sorted((self.labels.index(a), self.labels.index(b)))
        return float(self.rho[i, j]), float(self.p[i, j])


def correlation_matrix(table: Mapping[str, Sequence[float]], measures: Sequence[str] | None = None,
                       method: str = "spearman", exclude_constant: bool = True) -> CorrelationMatrix:
    """All unique pairs among ``measures`` (columns of ``table``)."""
    measures = list(measures if measures is not None else table)
    if len(measures) < 2:
        raise DomainError("need at least two measures")
    fn = {"spearman": spearman, "pearson": pearson}.get(method)
    if fn is None:
        raise DomainError(f"unknown correlation method {method!r}")
    cols = {m: _vector(table[m], m) for m in measures}
    excluded = []
    if exclude_constant:
        excluded = [m for m in measures if np.ptp(cols[m]) == 0]
        measures = [m for m in measures if m not in excluded]
        if len(measures) < 2:
            raise DomainError("fewer than two non-constant measures")
    k = len(measures)
    rho = np.full((k, k), np.nan)
    p = np.full((k, k), np.nan)
    undefined = []
    for i, j in itertools.combinations(range(k), 2):
        try:
            res = fn(cols[measures[i]], cols[measures[j]])
        except DegenerateError:
            undefined.append((measures[i], measures[j]))
            continue
        rho[i, j], p[i, j] = res.statistic, res.p_value
    return CorrelationMatrix(measures, rho, p, method, excluded, undefined)


def format_matrix(cm: CorrelationMatrix, which: str = "rho", digits: int = 3) -> str:
    """Aligned upper-triangular text table."""
    values = cm.rho if which == "rho" else cm.p
    width = max(8, max(len(s) for s in cm.labels) + 1)
    lines = [" " * width + "".join(f"{s:>{width}}" for s in cm.labels[1:])]
    for i, row_label in enumerate(cm.labels[:-1]):
        cells = []
        for j in range(1, len(cm.labels)):
            v = values[i, j]
            cells.append(f"{'':>{width}}" if j <= i or np.isnan(v) else f"{v:>{width}.{digits}f}")
        lines.append(f"{row_label:<{width}}" + "".join(cells))
    return "\n".join(lines)


def write_matrix_csv(cm: CorrelationMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["measure_a", "measure_b", "method", "rho", "p_value"])
        for a, b, r, p in cm.pairs():
            w.writerow([a, b, cm.method, repr(r), repr(p)])


def format_tests(results: Sequence[TestResult], titles: Sequence[str]) -> str:
    width = max(len(t) for t in titles) + 2
    lines = [f"{'comparison':<{width}}{'method':<28}{'statistic':>12}{'p':>12}"]
    for title, r in zip(titles, results):
        lines.append(f"{title:<{width}}{r.method:<28}{r.statistic:>12.4f}{r.p_value:>12.6f}")
    return "\n".join(lines)


def write_tests_csv(results: Sequence[TestResult], titles: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["comparison", "method", "n", "statistic", "p_value", "notes"])
        for title, r in zip(titles, results):
            w.writerow([title, r.method, r.n, repr(r.statistic), repr(r.p_value), "; ".join(r.notes)])
