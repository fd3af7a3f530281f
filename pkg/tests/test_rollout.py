import math

import numpy as np
import pytest

from attn_drift.dump_io import AttentionDump
from attn_drift.errors import DegenerateInputError
from attn_drift.metrics import erf_at, gini, shannon_entropy_bits
from attn_drift.rollout import (
    compose_rollout,
    layer_rollout_matrix,
    rollout_metrics,
    run_rollout_profile,
)

from conftest import make_meta, softmax_attention


def random_stochastic(rng, t):
    m = rng.random((t, t)) + 1e-3
    return m / m.sum(axis=1, keepdims=True)


def test_identity_heads_give_identity():
    heads = np.stack([np.eye(4), np.eye(4)])
    m = layer_rollout_matrix(heads)
    np.testing.assert_allclose(m.values, np.eye(4), atol=1e-15)
    assert m.depth == 1


def test_uniform_single_head_t2():
    heads = np.full((1, 2, 2), 0.5)
    m = layer_rollout_matrix(heads)
    np.testing.assert_allclose(m.values, [[0.75, 0.25], [0.25, 0.75]], atol=1e-15)


def test_mixed_rows_sum_to_one(rng):
    heads = np.stack([random_stochastic(rng, 5) for _ in range(3)])
    m = layer_rollout_matrix(heads)
    np.testing.assert_allclose(m.values.sum(axis=1), np.ones(5), atol=1e-12)
    assert (m.values >= 0).all()


def test_zero_heads_rejected():
    with pytest.raises(DegenerateInputError):
        layer_rollout_matrix(np.zeros((0, 3, 3)))


def test_compose_identities():
    mats = [layer_rollout_matrix(np.stack([np.eye(3)])) for _ in range(4)]
    composed = compose_rollout(mats)
    np.testing.assert_allclose(composed.values, np.eye(3), atol=1e-12)
    assert composed.depth == 4


def test_compose_single_matrix_is_itself(rng):
    m = layer_rollout_matrix(np.stack([random_stochastic(rng, 4)]))
    composed = compose_rollout([m])
    np.testing.assert_array_equal(composed.values, m.values)


def test_compose_matches_naive_matmul(rng):
    from attn_drift.rollout import RolloutMatrix

    mats = [RolloutMatrix(random_stochastic(rng, 6), 1) for _ in range(3)]
    composed = compose_rollout(mats)
    naive = mats[2].values @ (mats[1].values @ mats[0].values)
    np.testing.assert_allclose(composed.values, naive, atol=1e-9)


def test_compose_order_is_later_on_left(rng):
    from attn_drift.rollout import RolloutMatrix

    a = RolloutMatrix(random_stochastic(rng, 4), 1)
    b = RolloutMatrix(random_stochastic(rng, 4), 1)
    composed = compose_rollout([a, b])
    np.testing.assert_allclose(composed.values, b.values @ a.values, atol=1e-12)


def test_compose_associativity(rng):
    from attn_drift.rollout import RolloutMatrix

    a, b, c = (RolloutMatrix(random_stochastic(rng, 5), 1) for _ in range(3))
    left = compose_rollout([compose_rollout([a, b]), c])
    right = compose_rollout([a, compose_rollout([b, c])])
    np.testing.assert_allclose(left.values, right.values, atol=1e-9)
    assert left.depth == right.depth == 3


def test_compose_dimension_mismatch(rng):
    from attn_drift.rollout import RolloutMatrix

    a = RolloutMatrix(random_stochastic(rng, 4), 1)
    b = RolloutMatrix(random_stochastic(rng, 5), 1)
    with pytest.raises(DegenerateInputError):
        compose_rollout([a, b])


def test_compose_empty_rejected():
    with pytest.raises(DegenerateInputError):
        compose_rollout([])


def test_stochasticity_preserved_through_stacks(rng):
    for _ in range(50):
        t = int(rng.integers(2, 8))
        depth = int(rng.integers(1, 6))
        mats = [
            layer_rollout_matrix(
                np.stack([random_stochastic(rng, t) for _ in range(2)])
            )
            for _ in range(depth)
        ]
        composed = compose_rollout(mats)
        np.testing.assert_allclose(composed.values.sum(axis=1), np.ones(t), atol=1e-6)


def test_rollout_metrics_identity_is_degenerate():
    from attn_drift.rollout import RolloutMatrix

    with pytest.raises(DegenerateInputError):
        rollout_metrics(RolloutMatrix(np.eye(4), 1))


def test_rollout_metrics_uniform():
    t = 50
    from attn_drift.rollout import RolloutMatrix

    m = RolloutMatrix(np.full((t, t), 1.0 / t), 1)
    got = rollout_metrics(m)
    assert got["entropy_bits"] == pytest.approx(math.log2(49), abs=1e-9)
    assert got["gini"] == pytest.approx(0.0, abs=1e-12)
    assert got["erf95"] == math.ceil(0.95 * 49) / 49


def test_rollout_metrics_cross_check_with_structural_ops(rng):
    mats = [
        layer_rollout_matrix(np.stack([random_stochastic(rng, 7) for _ in range(2)]))
        for _ in range(3)
    ]
    composed = compose_rollout(mats)
    got = rollout_metrics(composed)
    p = composed.values[0, 1:]
    p = p / p.sum()
    assert got["entropy_bits"] == pytest.approx(shannon_entropy_bits(p), abs=1e-12)
    assert got["erf95"] == erf_at(p, 0.95)
    assert got["gini"] == pytest.approx(gini(p), abs=1e-12)


def test_uniform_mixing_entropy_nondecreasing_with_depth():
    t = 10
    uniform_layer = np.full((1, t, t), 1.0 / t)
    entropies = []
    for depth in range(1, 7):
        mats = [layer_rollout_matrix(uniform_layer) for _ in range(depth)]
        entropies.append(rollout_metrics(compose_rollout(mats))["entropy_bits"])
    assert all(a <= b + 1e-12 for a, b in zip(entropies, entropies[1:]))
    assert entropies[-1] <= math.log2(t - 1) + 1e-9


def test_run_rollout_profile_averages_images(rng):
    values = softmax_attention(rng, 3, 2, 2, 6)
    dump = AttentionDump(values, make_meta(n_images=3))
    profile = run_rollout_profile(dump)
    per_image = []
    for i in range(3):
        mats = [layer_rollout_matrix(values[i, l]) for l in range(2)]
        per_image.append(rollout_metrics(compose_rollout(mats)))
    for key in ("entropy_bits", "erf95", "gini"):
        assert profile[key] == pytest.approx(
            np.mean([m[key] for m in per_image]), abs=1e-12
        )
