"""Small-sample inferential machinery: Welch and paired t-tests, Cohen's
d, Pearson/Spearman correlations, exact permutation correlation tests,
Holm-Bonferroni step-down adjustment, and the coefficient of variation.

Conventions, fixed once and used everywhere:

* p-values are two-sided;
* exact permutation tests count the observed (identity) permutation, so
  p >= 1 / n!;
* Spearman uses average ranks for ties (no tie-corrected variance — exact
  permutation subsumes tie handling at these sample sizes);
* standard deviations are sample (n-1) estimates;
* Cohen's d uses the classic pooled-SD definition;
* the Student-t CDF is evaluated in-package via a continued-fraction
  regularized incomplete beta (target 1e-12), so p-values do not depend
  on platform math libraries.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateInputError

PERM_TIE_EPS = 1e-12


@dataclass
class StatResult:
    """One inferential test outcome."""

    test: str
    statistic: float
    p_value: Optional[float] = None
    df: Optional[float] = None
    effect_size: Optional[float] = None
    n: tuple[int, ...] = ()
    exact: Optional[bool] = None
    n_permutations: Optional[int] = None

    def to_json_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "df": self.df,
            "effect_size": self.effect_size,
            "n": list(self.n),
            "exact": self.exact,
            "n_permutations": self.n_permutations,
        }


# ---------------------------------------------------------------------------
# Student-t tail via regularized incomplete beta


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300

    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) to ~1e-12 relative accuracy."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T_df| >= |t|) for the Student t distribution."""
    if df <= 0:
        raise ValueError(f"df must be positive, got {df!r}")
    if t == 0.0:
        return 1.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def student_t_sf(t: float, df: float) -> float:
    """One-sided upper tail P(T_df >= t)."""
    p_two = student_t_two_sided_p(t, df)
    return p_two / 2.0 if t >= 0 else 1.0 - p_two / 2.0


# ---------------------------------------------------------------------------
# samples and helpers


def _as_sample(x, name: str, min_n: int) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DegenerateInputError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size < min_n:
        raise DegenerateInputError(f"{name} needs at least {min_n} values, got {v.size}")
    if not np.isfinite(v).all():
        raise DegenerateInputError(f"{name} contains non-finite values")
    return v


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties assigned the average of their positions."""
    v = np.asarray(x, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson_r(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    nx = np.linalg.norm(xc)
    ny = np.linalg.norm(yc)
    if nx == 0.0 or ny == 0.0:
        raise DegenerateInputError("correlation undefined: zero variance in a variable")
    return float(xc @ yc / (nx * ny))


# ---------------------------------------------------------------------------
# tests


def welch_t(a, b) -> StatResult:
    """Welch two-sample t-test with Welch-Satterthwaite df, two-sided p."""
    av = _as_sample(a, "a", 2)
    bv = _as_sample(b, "b", 2)
    va, vb = av.var(ddof=1), bv.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise DegenerateInputError("welch_t undefined: zero variance in both samples")
    na, nb = av.size, bv.size
    sa, sb = va / na, vb / nb
    t = (av.mean() - bv.mean()) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    return StatResult(
        test="welch_t",
        statistic=float(t),
        p_value=float(student_t_two_sided_p(t, df)),
        df=float(df),
        n=(na, nb),
    )


def paired_t(a, b) -> StatResult:
    """One-sample t on index-paired differences vs 0, two-sided p."""
    av = _as_sample(a, "a", 2)
    bv = _as_sample(b, "b", 2)
    if av.size != bv.size:
        raise DegenerateInputError(
            f"paired_t needs equal lengths, got {av.size} and {bv.size}"
        )
    d = av - bv
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise DegenerateInputError("paired_t undefined: zero-variance differences")
    n = d.size
    t = d.mean() / (sd / math.sqrt(n))
    return StatResult(
        test="paired_t",
        statistic=float(t),
        p_value=float(student_t_two_sided_p(t, n - 1)),
        df=float(n - 1),
        n=(n,),
    )


def cohens_d(a, b) -> float:
    """(mean a - mean b) / pooled sample standard deviation."""
    av = _as_sample(a, "a", 2)
    bv = _as_sample(b, "b", 2)
    na, nb = av.size, bv.size
    pooled_var = ((na - 1) * av.var(ddof=1) + (nb - 1) * bv.var(ddof=1)) / (na + nb - 2)
    if pooled_var == 0.0:
        raise DegenerateInputError("cohens_d undefined: zero pooled variance")
    return float((av.mean() - bv.mean()) / math.sqrt(pooled_var))


def pearson(x, y) -> StatResult:
    """Product-moment correlation with a two-sided t-approximation p."""
    xv = _as_sample(x, "x", 3)
    yv = _as_sample(y, "y", 3)
    if xv.size != yv.size:
        raise DegenerateInputError(f"length mismatch: {xv.size} vs {yv.size}")
    r = _pearson_r(xv, yv)
    n = xv.size
    if abs(r) >= 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = float(student_t_two_sided_p(t, n - 2))
    return StatResult(test="pearson", statistic=r, p_value=p, df=float(n - 2), n=(n,))


def spearman(x, y) -> StatResult:
    """Pearson correlation of average-ranked data (ties -> average ranks)."""
    xv = _as_sample(x, "x", 3)
    yv = _as_sample(y, "y", 3)
    if xv.size != yv.size:
        raise DegenerateInputError(f"length mismatch: {xv.size} vs {yv.size}")
    res = pearson(average_ranks(xv), average_ranks(yv))
    return StatResult(
        test="spearman",
        statistic=res.statistic,
        p_value=res.p_value,
        df=res.df,
        n=res.n,
    )


def _permutation_indices_exact(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def exact_permutation_corr(
    x,
    y,
    kind: str = "pearson",
    max_exact_n: int = 8,
    mc_draws: int = 100_000,
    rng_seed: int = 42,
) -> StatResult:
    """Permutation test for a correlation coefficient.

    For n <= ``max_exact_n`` all n! permutations of y are enumerated and
    the two-sided p is the fraction with |stat| >= |observed| (the
    identity permutation is part of the enumeration, so p >= 1/n!).
    Larger n falls back to fixed-seed Monte Carlo with the identity
    permutation forced into the draw set.
    """
    if kind not in ("pearson", "spearman"):
        raise ValueError(f"kind must be 'pearson' or 'spearman', got {kind!r}")
    xv = _as_sample(x, "x", 3)
    yv = _as_sample(y, "y", 3)
    if xv.size != yv.size:
        raise DegenerateInputError(f"length mismatch: {xv.size} vs {yv.size}")
    if kind == "spearman":
        xv = average_ranks(xv)
        yv = average_ranks(yv)

    xc = xv - xv.mean()
    yc = yv - yv.mean()
    nx, ny = np.linalg.norm(xc), np.linalg.norm(yc)
    if nx == 0.0 or ny == 0.0:
        raise DegenerateInputError("permutation test undefined: zero variance")
    xn = xc / nx
    yn = yc / ny
    observed = float(xn @ yn)

    n = xv.size
    exact = n <= max_exact_n
    if exact:
        perms = _permutation_indices_exact(n)
        r_perm = yn[perms] @ xn
        n_perm = perms.shape[0]
        count = int((np.abs(r_perm) >= abs(observed) - PERM_TIE_EPS).sum())
        p = count / n_perm
    else:
        rng = np.random.default_rng(rng_seed)
        perms = np.argsort(rng.random((mc_draws, n)), axis=1)
        r_perm = yn[perms] @ xn
        n_perm = mc_draws + 1  # identity permutation forced into the draw set
        count = int((np.abs(r_perm) >= abs(observed) - PERM_TIE_EPS).sum()) + 1
        p = count / n_perm
    return StatResult(
        test=f"perm_{kind}",
        statistic=observed,
        p_value=p,
        n=(n,),
        exact=exact,
        n_permutations=n_perm,
    )


def holm_bonferroni(p_values, labels=None) -> list[float]:
    """Step-down Holm adjustment; returns adjusted p in input order.

    adjusted_(i) = max_{j <= i} min(1, (m - j) * p_(j)) over ascending
    sorted p (0-indexed j), so adjusted values are monotone in the raw
    ordering and never below the raw p.
    """
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DegenerateInputError("holm_bonferroni needs a nonempty 1-D p-value list")
    if labels is not None and len(labels) != p.size:
        raise DegenerateInputError(
            f"labels length {len(labels)} does not match {p.size} p-values"
        )
    if np.any((p < 0.0) | (p > 1.0)):
        bad = float(p[(p < 0.0) | (p > 1.0)][0])
        raise DegenerateInputError(f"p-value {bad!r} outside [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m, dtype=np.float64)
    running = 0.0
    for j, idx in enumerate(order):
        running = max(running, min(1.0, (m - j) * p[idx]))
        adjusted[idx] = running
    return [float(v) for v in adjusted]


def coefficient_of_variation(xs) -> float:
    """Sample (n-1) standard deviation divided by the mean."""
    v = _as_sample(xs, "xs", 2)
    mean = v.mean()
    if mean == 0.0:
        raise DegenerateInputError("coefficient of variation undefined for zero mean")
    if np.all(v == v[0]):
        return 0.0  # constant sample: exact zero, no mean-rounding noise
    return float(v.std(ddof=1) / mean)


def cv_result(xs) -> StatResult:
    v = _as_sample(xs, "xs", 2)
    return StatResult(test="cv", statistic=coefficient_of_variation(xs), n=(v.size,))
