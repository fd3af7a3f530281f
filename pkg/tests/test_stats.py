import itertools
import json
import math

import numpy as np
import pytest

from attn_drift.errors import DegenerateInputError
from attn_drift.stats import (
    average_ranks,
    coefficient_of_variation,
    cohens_d,
    exact_permutation_corr,
    holm_bonferroni,
    paired_t,
    pearson,
    regularized_incomplete_beta,
    spearman,
    student_t_two_sided_p,
    welch_t,
)

# Oracle fixtures computed once with scipy 1.x / mpmath (50 digits) before
# the implementation was written; frozen here.

WELCH_FIXTURE = dict(
    a=[1.0, 2.0, 3.0, 4.0],
    b=[2.0, 4.0, 6.0, 8.0],
    t=-1.7320508075688774,
    df=4.411764705882353,
    p=0.15158050484530383,
)

PAIRED_A = [5.624199, 5.597315, 5.623339, 5.610114, 5.565568, 5.526111,
            5.659628, 5.592554, 5.519211, 5.539534, 5.607473, 5.628961]
PAIRED_B = [5.553263, 5.461452, 5.546697, 5.567143, 5.478602, 5.479919,
            5.572598, 5.473087, 5.435416, 5.423819, 5.538734, 5.521666]
PAIRED_T = 10.517615391207338
PAIRED_P = 4.4548193640490067e-07
WELCH2_T = 4.406457386613499
WELCH2_P = 0.00023462831920615957

COHENS_FIXTURE = dict(
    a=[3.1, 2.9, 3.4, 3.0, 3.2], b=[2.5, 2.8, 2.6, 2.9], d=2.2313745221420174
)

# two-sided P(|T_df| >= t) from mpmath quadrature at 40 digits
T_SF_TABLE = {
    (1, 0.5): 0.70483276469913345,
    (1, 1.3): 0.41742880032030546,
    (1, 2.1): 0.28292605624301793,
    (1, 4.7): 0.13346087095961601,
    (2, 0.5): 0.66666666666666667,
    (2, 1.3): 0.32324703181604037,
    (2, 2.1): 0.17054986918996749,
    (2, 4.7): 0.042410317949394362,
    (5, 0.5): 0.63829887164092901,
    (5, 1.3): 0.25030063417067722,
    (5, 2.1): 0.089753249884598757,
    (5, 4.7): 0.0053371101071406784,
    (10, 0.5): 0.62789360574297294,
    (10, 1.3): 0.22276581720684457,
    (10, 2.1): 0.062077244202218573,
    (10, 4.7): 0.00084156615052306311,
    (30, 0.5): 0.62072300488512729,
    (30, 1.3): 0.20350095853811688,
    (30, 2.1): 0.044242471262323527,
    (30, 4.7): 5.4282636832642787e-5,
    (100, 0.5): 0.61817356583088657,
    (100, 1.3): 0.19658946342236623,
    (100, 2.1): 0.038245255821280935,
    (100, 4.7): 8.3284526917754434e-6,
}

# Learning-rate sweep anchor: x = log10(lr) over the five-point grid,
# y = entropy drift (%); exactly 4 of 120 permutations reach |r|.
LR_GRID_LOG10 = [math.log10(v) for v in (1e-6, 5e-6, 1e-5, 5e-5, 1e-4)]
LR_DENTROPY = [1.45, 0.33, -0.14, -4.19, -10.40]


# ---------------------------------------------------------------------------
# Student-t CDF


def test_student_t_matches_high_precision_oracle():
    for (df, t), expected in T_SF_TABLE.items():
        got = student_t_two_sided_p(t, df)
        assert got == pytest.approx(expected, abs=1e-12, rel=1e-12)
        assert student_t_two_sided_p(-t, df) == got


def test_student_t_edges():
    assert student_t_two_sided_p(0.0, 5) == 1.0
    assert student_t_two_sided_p(1e8, 5) < 1e-30
    with pytest.raises(ValueError):
        student_t_two_sided_p(1.0, 0)


def test_incomplete_beta_edges():
    assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
    assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
    # I_x(1,1) = x
    for x in (0.1, 0.37, 0.9):
        assert regularized_incomplete_beta(1.0, 1.0, x) == pytest.approx(x, abs=1e-14)


# ---------------------------------------------------------------------------
# Welch


def test_welch_fixture():
    res = welch_t(WELCH_FIXTURE["a"], WELCH_FIXTURE["b"])
    assert res.statistic == pytest.approx(WELCH_FIXTURE["t"], abs=1e-12)
    assert res.df == pytest.approx(WELCH_FIXTURE["df"], abs=1e-12)
    assert res.p_value == pytest.approx(WELCH_FIXTURE["p"], abs=1e-9)
    assert res.n == (4, 4)


def test_welch_second_fixture():
    res = welch_t(PAIRED_A, PAIRED_B)
    assert res.statistic == pytest.approx(WELCH2_T, abs=1e-9)
    assert res.p_value == pytest.approx(WELCH2_P, abs=1e-9)


def test_welch_identical_samples():
    res = welch_t([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert res.statistic == 0.0
    assert res.p_value == 1.0


def test_welch_antisymmetry():
    r1 = welch_t(PAIRED_A, PAIRED_B)
    r2 = welch_t(PAIRED_B, PAIRED_A)
    assert r1.statistic == pytest.approx(-r2.statistic, abs=1e-14)
    assert r1.p_value == pytest.approx(r2.p_value, abs=1e-15)


def test_welch_degenerate():
    with pytest.raises(DegenerateInputError):
        welch_t([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    with pytest.raises(DegenerateInputError):
        welch_t([1.0], [1.0, 2.0])


def test_welch_one_zero_variance_side_ok():
    res = welch_t([1.0, 1.0, 1.0], [2.0, 3.0, 4.0])
    assert res.df == pytest.approx(2.0, abs=1e-12)
    assert res.p_value < 0.2


# ---------------------------------------------------------------------------
# paired t


def test_paired_fixture():
    res = paired_t(PAIRED_A, PAIRED_B)
    assert res.statistic == pytest.approx(PAIRED_T, abs=1e-9)
    assert res.p_value == pytest.approx(PAIRED_P, rel=1e-9)
    assert res.df == 11.0


def test_paired_degenerate_cases():
    with pytest.raises(DegenerateInputError):
        paired_t([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])  # zero differences
    with pytest.raises(DegenerateInputError):
        paired_t([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])  # constant shift
    with pytest.raises(DegenerateInputError):
        paired_t([1.0, 2.0], [1.0, 2.0, 3.0])


# ---------------------------------------------------------------------------
# Cohen's d


def test_cohens_d_fixture():
    assert cohens_d(COHENS_FIXTURE["a"], COHENS_FIXTURE["b"]) == pytest.approx(
        COHENS_FIXTURE["d"], abs=1e-12
    )


def test_cohens_d_identical_is_zero():
    assert cohens_d([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0


def test_cohens_d_unit_shift_is_minus_one():
    a = [-1.0, 0.0, 1.0]  # mean 0, sample SD 1
    b = [0.0, 1.0, 2.0]  # mean 1, sample SD 1
    assert cohens_d(a, b) == pytest.approx(-1.0, abs=1e-12)


def test_cohens_d_zero_pooled_variance():
    with pytest.raises(DegenerateInputError):
        cohens_d([1.0, 1.0], [2.0, 2.0])


# ---------------------------------------------------------------------------
# correlations


def test_pearson_perfect_line():
    x = [1.0, 2.0, 3.0, 4.0, 5.0]
    y = [2 * v + 1 for v in x]
    assert pearson(x, y).statistic == pytest.approx(1.0, abs=1e-12)
    assert spearman(x, y).statistic == pytest.approx(1.0, abs=1e-12)


def test_spearman_decreasing_is_minus_one():
    assert spearman([1, 2, 3, 4], [9.0, 3.0, 2.5, 1.0]).statistic == pytest.approx(
        -1.0, abs=1e-12
    )


def test_spearman_rank_fixtures():
    # sum of squared rank differences 4 -> rho = 0.8
    assert spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]).statistic == pytest.approx(
        0.8, abs=1e-12
    )
    # sum of squared rank differences 6 -> rho = 0.7
    assert spearman([1, 2, 3, 4, 5], [2, 3, 1, 4, 5]).statistic == pytest.approx(
        0.7, abs=1e-12
    )


def test_spearman_tie_fixture():
    got = spearman([1, 2, 3, 4, 5], [1.0, 2.0, 2.0, 3.0, 5.0]).statistic
    assert got == pytest.approx(0.9746794344808964, abs=1e-12)


def test_spearman_equals_pearson_on_ranks_tie_free(rng):
    for _ in range(20):
        x = rng.permutation(10).astype(float)
        y = rng.normal(size=10)
        direct = spearman(x, y).statistic
        via_ranks = pearson(average_ranks(x), average_ranks(y)).statistic
        assert direct == via_ranks


def test_average_ranks_ties():
    np.testing.assert_array_equal(
        average_ranks([10.0, 20.0, 20.0, 30.0]), [1.0, 2.5, 2.5, 4.0]
    )


def test_correlation_degenerate():
    with pytest.raises(DegenerateInputError):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateInputError):
        spearman([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])


# ---------------------------------------------------------------------------
# exact permutation tests


def test_exact_spearman_monotone_anchor():
    res = exact_permutation_corr([1, 2, 3, 4, 5], [10.0, 8.0, 5.0, 2.0, 1.0], "spearman")
    assert res.statistic == pytest.approx(-1.0, abs=1e-12)
    assert res.exact is True
    assert res.n_permutations == 120
    assert res.p_value == pytest.approx(2 / 120, abs=1e-9)
    assert res.p_value == pytest.approx(0.016667, abs=1e-5)


def test_exact_pearson_lr_sweep_anchor():
    res = exact_permutation_corr(LR_GRID_LOG10, LR_DENTROPY, "pearson")
    assert res.statistic == pytest.approx(-0.893, abs=5e-4)
    assert res.p_value == pytest.approx(4 / 120, abs=1e-9)
    assert res.p_value == pytest.approx(0.033333, abs=1e-5)
    assert res.exact is True


def test_exact_pearson_anchor_confirmed_by_independent_enumeration():
    x = np.asarray(LR_GRID_LOG10)
    y = np.asarray(LR_DENTROPY)

    def plain_r(a, b):
        ac = a - a.mean()
        bc = b - b.mean()
        return float(ac @ bc / math.sqrt((ac @ ac) * (bc @ bc)))

    observed = abs(plain_r(x, y))
    count = sum(
        1
        for perm in itertools.permutations(range(5))
        if abs(plain_r(x, y[list(perm)])) >= observed - 1e-12
    )
    assert count == 4


def test_exact_p_at_least_one_over_n_factorial(rng):
    for _ in range(5):
        x = rng.normal(size=5)
        y = rng.normal(size=5)
        res = exact_permutation_corr(x, y, "pearson")
        assert 1 / 120 - 1e-15 <= res.p_value <= 1.0


def test_exact_invariant_to_joint_pair_permutation(rng):
    x = rng.normal(size=6)
    y = rng.normal(size=6)
    base = exact_permutation_corr(x, y, "pearson")
    perm = rng.permutation(6)
    moved = exact_permutation_corr(x[perm], y[perm], "pearson")
    assert moved.p_value == base.p_value
    assert moved.statistic == pytest.approx(base.statistic, abs=1e-12)


def test_monte_carlo_converges_to_exact():
    x = np.asarray(LR_GRID_LOG10)
    y = np.asarray(LR_DENTROPY)
    exact = exact_permutation_corr(x, y, "pearson")
    mc = exact_permutation_corr(x, y, "pearson", max_exact_n=4, mc_draws=100_000, rng_seed=7)
    assert mc.exact is False
    assert mc.n_permutations == 100_001
    assert mc.p_value == pytest.approx(exact.p_value, abs=0.01)
    assert mc.p_value >= 1 / 100_001


def test_monte_carlo_deterministic_per_seed():
    x = list(range(12))
    y = [0.3, 1.2, 0.8, 2.5, 1.9, 3.1, 2.2, 4.8, 3.9, 4.1, 5.5, 4.9]
    a = exact_permutation_corr(x, y, "spearman", max_exact_n=8, mc_draws=2000, rng_seed=42)
    b = exact_permutation_corr(x, y, "spearman", max_exact_n=8, mc_draws=2000, rng_seed=42)
    assert a.p_value == b.p_value
    assert a.exact is False


def test_permutation_zero_variance():
    with pytest.raises(DegenerateInputError):
        exact_permutation_corr([1, 2, 3, 4], [5.0, 5.0, 5.0, 5.0], "spearman")


def test_permutation_unknown_kind():
    with pytest.raises(ValueError):
        exact_permutation_corr([1, 2, 3], [1, 2, 3], "kendall")


# ---------------------------------------------------------------------------
# Holm-Bonferroni


def test_holm_single_p_unchanged():
    assert holm_bonferroni([0.2]) == [0.2]


def test_holm_hand_calculation():
    assert holm_bonferroni([0.01, 0.04, 0.03]) == pytest.approx([0.03, 0.06, 0.06])


def test_holm_properties(rng):
    for _ in range(25):
        p = rng.uniform(size=int(rng.integers(1, 10)))
        adj = np.asarray(holm_bonferroni(p))
        assert (adj >= p - 1e-15).all()
        assert (adj <= 1.0).all()
        order = np.argsort(p, kind="stable")
        assert (np.diff(adj[order]) >= -1e-15).all()  # ordering-monotone


def test_holm_label_permutation_invariance(rng):
    p = rng.uniform(size=6).tolist()
    adj = holm_bonferroni(p)
    perm = rng.permutation(6)
    adj_perm = holm_bonferroni([p[i] for i in perm])
    assert adj_perm == [adj[i] for i in perm]


def test_holm_rejects_bad_p():
    with pytest.raises(DegenerateInputError):
        holm_bonferroni([0.5, 1.2])
    with pytest.raises(DegenerateInputError):
        holm_bonferroni([])
    with pytest.raises(DegenerateInputError):
        holm_bonferroni([0.1, 0.2], labels=["only-one"])


# ---------------------------------------------------------------------------
# coefficient of variation


def test_cv_examples():
    assert coefficient_of_variation([1.0, 1.0, 1.0]) == 0.0
    assert coefficient_of_variation([2.0, 4.0]) == pytest.approx(
        math.sqrt(2) / 3, abs=1e-12
    )


def test_cv_entropy_stability_scale_anchor():
    values = [5.600, 5.601, 5.602, 5.601, 5.600]
    cv = coefficient_of_variation(values)
    assert cv == pytest.approx(1.49e-4, rel=0.01)
    assert 1e-5 < cv < 1e-3  # same order as published subset-stability values


def test_cv_zero_mean():
    with pytest.raises(DegenerateInputError):
        coefficient_of_variation([-1.0, 1.0])


# ---------------------------------------------------------------------------
# serialization


def test_stat_result_json_serializable():
    res = welch_t(PAIRED_A, PAIRED_B)
    text = json.dumps(res.to_json_dict())
    decoded = json.loads(text)
    assert decoded["test"] == "welch_t"
    assert decoded["n"] == [12, 12]
