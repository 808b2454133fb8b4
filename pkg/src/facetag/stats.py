"""Nonparametric statistics: Friedman test, Kendall's W, chi-square
survival function, and phi/Pearson correlations.

The Friedman statistic uses within-block average ranks with the standard
tie correction (divide by 1 - sum(t^3 - t) / (n k (k^2 - 1))); p-values
come from the chi-square approximation with k-1 degrees of freedom, with
an exact-style permutation p available for small designs.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

_GAMMA_TOL = 1e-10
_GAMMA_MAX_ITER = 200


class ConvergenceError(ArithmeticError):
    def __init__(self, what: str, iterations: int):
        super().__init__(f"{what} did not converge within {iterations} iterations")


def _lower_gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by power series."""
    term = 1.0 / a
    total = term
    for i in range(1, _GAMMA_MAX_ITER + 1):
        term *= x / (a + i)
        total += term
        if abs(term) < abs(total) * _GAMMA_TOL:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceError("incomplete gamma series", _GAMMA_MAX_ITER)


def _upper_gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by continued fraction
    (modified Lentz)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_TOL:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceError("incomplete gamma continued fraction", _GAMMA_MAX_ITER)


def chi2_sf(x: float, df: int) -> float:
    """Survival function of the chi-square distribution: P(X >= x)."""
    if df <= 0:
        raise ValueError(f"df must be positive: {df}")
    if x < 0:
        raise ValueError(f"x must be non-negative: {x}")
    a = df / 2.0
    half = x / 2.0
    # Covers x == 0 and subnormal x whose half underflows to zero.
    if half == 0.0:
        return 1.0
    if half < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_gamma_series(a, half)))
    return min(1.0, max(0.0, _upper_gamma_cf(a, half)))


def _rank_with_ties(values: Sequence[float]) -> tuple[list[float], list[int]]:
    """Average ranks (1-based) and tie-group sizes."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    tie_sizes = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # mean of 1-based positions i+1 .. j+1
        for idx in order[i : j + 1]:
            ranks[idx] = avg
        tie_sizes.append(j - i + 1)
        i = j + 1
    return ranks, tie_sizes


@dataclass(frozen=True)
class FriedmanResult:
    q: float
    df: int
    p: float
    mean_ranks: tuple[float, ...]
    w: float
    interpretation: str
    n: int
    k: int
    significant: dict[float, bool] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "df": self.df,
            "p": self.p,
            "mean_ranks": list(self.mean_ranks),
            "w": self.w,
            "interpretation": self.interpretation,
            "n": self.n,
            "k": self.k,
            "significant": {str(a): v for a, v in self.significant.items()},
        }


def interpret_w(w: float) -> str:
    """Cohen's bands: 0.1 small, 0.3 moderate, above 0.5 large."""
    if w > 0.5:
        return "large"
    if w >= 0.3:
        return "moderate"
    if w >= 0.1:
        return "small"
    return "negligible"


def _friedman_q(matrix: Sequence[Sequence[float]]) -> tuple[float, list[float]]:
    n = len(matrix)
    k = len(matrix[0])
    rank_sums = [0.0] * k
    correction = 0.0
    for row in matrix:
        ranks, tie_sizes = _rank_with_ties(row)
        for j, r in enumerate(ranks):
            rank_sums[j] += r
        correction += sum(t**3 - t for t in tie_sizes)
    q = (12.0 / (n * k * (k + 1))) * sum(r * r for r in rank_sums) - 3.0 * n * (k + 1)
    denom = 1.0 - correction / (n * k * (k * k - 1))
    if denom <= 0:
        # Every block fully tied: no information, statistic is zero.
        q = 0.0
    else:
        q /= denom
    mean_ranks = [r / n for r in rank_sums]
    return q, mean_ranks


def friedman(
    matrix: Sequence[Sequence[float]],
    alpha_levels: Sequence[float] = (0.05, 0.10),
) -> FriedmanResult:
    """Friedman rank sum test over an n-block by k-treatment matrix."""
    n = len(matrix)
    if n < 2:
        raise ValueError(f"need at least 2 blocks, got {n}")
    k = len(matrix[0])
    if k < 2:
        raise ValueError(f"need at least 2 treatments, got {k}")
    for row in matrix:
        if len(row) != k:
            raise ValueError("ragged block matrix")
    q, mean_ranks = _friedman_q(matrix)
    q = max(0.0, q)
    df = k - 1
    p = chi2_sf(q, df)
    w = q / (n * (k - 1))
    return FriedmanResult(
        q=q,
        df=df,
        p=p,
        mean_ranks=tuple(mean_ranks),
        w=w,
        interpretation=interpret_w(w),
        n=n,
        k=k,
        significant={alpha: p <= alpha for alpha in sorted(alpha_levels)},
    )


def kendalls_w(q: float, n: int, k: int) -> tuple[float, str]:
    """Effect size of rank concordance derived from the Friedman statistic."""
    w = q / (n * (k - 1))
    return w, interpret_w(w)


def friedman_permutation_p(
    matrix: Sequence[Sequence[float]],
    draws: int = 10000,
    seed: int = 0,
) -> float:
    """Monte Carlo permutation p-value: shuffle within blocks, compare Q."""
    observed, _ = _friedman_q(matrix)
    rng = random.Random(seed)
    hits = 0
    rows = [list(row) for row in matrix]
    for _ in range(draws):
        permuted = []
        for row in rows:
            shuffled = row[:]
            rng.shuffle(shuffled)
            permuted.append(shuffled)
        q, _ = _friedman_q(permuted)
        if q >= observed - 1e-12:
            hits += 1
    return hits / draws


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation; errors on constant input."""
    if len(xs) != len(ys):
        raise ValueError("vectors differ in length")
    if len(xs) < 2:
        raise ValueError("need at least 2 observations")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt(np.dot(xd, xd)))
    sy = float(np.sqrt(np.dot(yd, yd)))
    if sx == 0 or sy == 0:
        raise ValueError("correlation undefined for a constant vector")
    return float(np.dot(xd, yd) / (sx * sy))


def phi_correlation(x: Sequence[int], y: Sequence[int]) -> float:
    """Phi coefficient: Pearson correlation of two 0/1 indicator vectors."""
    for name, v in (("x", x), ("y", y)):
        if any(e not in (0, 1) for e in v):
            raise ValueError(f"{name} is not a binary vector")
    return pearson(list(x), list(y))


def phi_from_table(a: int, b: int, c: int, d: int) -> float:
    """Closed-form phi for the 2x2 table [[a, b], [c, d]]."""
    den = math.sqrt((a + b) * (c + d) * (a + c) * (b + d))
    if den == 0:
        raise ValueError("degenerate 2x2 table")
    return (a * d - b * c) / den


@dataclass(frozen=True)
class CorrelationCell:
    da_tag: str
    fa_label: str
    r: float
    n: int

    def to_json(self) -> dict:
        return {"da_tag": self.da_tag, "fa_label": self.fa_label, "r": self.r, "n": self.n}


def da_fa_matrix(corpus) -> list[CorrelationCell]:
    """Per-utterance phi between dialog act tags and face act labels.

    Cells where either indicator is constant (tag or label absent, or
    universal) are omitted since phi is undefined there.
    """
    utts = [
        u for u in corpus.utterances() if u.face_act is not None and u.dialog_act is not None
    ]
    if not utts:
        raise ValueError("corpus has no utterances with both dialog act and face act")
    tags = sorted({u.dialog_act.name for u in utts})
    labels = sorted({u.face_act.canonical for u in utts})
    cells = []
    for tag in tags:
        x = [1 if u.dialog_act.name == tag else 0 for u in utts]
        if len(set(x)) < 2:
            continue
        for label in labels:
            y = [1 if u.face_act.canonical == label else 0 for u in utts]
            if len(set(y)) < 2:
                continue
            cells.append(
                CorrelationCell(da_tag=tag, fa_label=label, r=phi_correlation(x, y), n=len(utts))
            )
    return cells


def render_friedman_table(
    results: dict[str, FriedmanResult],
    alpha_strong: float = 0.05,
    alpha_weak: float = 0.10,
) -> str:
    """Text table with "+" / "++" significance markers for the weak and
    strong alpha levels."""
    lines = [f"{'metric':<16} {'Q':>9} {'df':>4} {'p':>10} {'W':>7} {'effect':<11} sig"]
    lines.append("-" * len(lines[0]))
    for name, res in results.items():
        if res.p <= alpha_strong:
            mark = "++"
        elif res.p <= alpha_weak:
            mark = "+"
        else:
            mark = ""
        lines.append(
            f"{name:<16} {res.q:>9.4f} {res.df:>4d} {res.p:>10.5f} "
            f"{res.w:>7.4f} {res.interpretation:<11} {mark}"
        )
    return "\n".join(lines)
