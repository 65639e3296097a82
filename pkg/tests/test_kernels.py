import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from helpers import random_channel, random_stochastic
from ldpeff.kernels import (
    Channel,
    LaplaceMechanism,
    compose_post,
    compose_pre,
    deterministic_kernel,
    laplace_density,
    laplace_sanitize,
    make_rng,
    randomized_response,
    sample,
    sample_many,
    validate_alpha_dp,
)

LN3 = math.log(3)


def warner(alpha):
    ea = math.exp(alpha)
    return np.array([[ea, 1.0], [1.0, ea]]) / (ea + 1)


# -- validation ---------------------------------------------------------------


def test_warner_passes_identity_fails():
    assert validate_alpha_dp(warner(1.0), 1.0)
    report = validate_alpha_dp(np.eye(2), 5.0)
    assert not report
    assert report.row == 0 and report.col == 0 and report.other_col == 1


@pytest.mark.parametrize("alpha", [1e-6, 0.1, 1.0, 20.0])
def test_uniform_channel_is_private_at_every_budget(alpha):
    assert validate_alpha_dp(np.full((4, 3), 0.25), alpha)


def test_validation_reports_bad_columns_and_negatives():
    assert "column 1" in validate_alpha_dp(np.array([[0.5, 0.5], [0.5, 0.6]]), 1.0).reason
    assert "negative" in validate_alpha_dp(np.array([[1.1, 0.5], [-0.1, 0.5]]), 5.0).reason
    assert not validate_alpha_dp(np.array([[np.nan, 1.0], [1.0, 0.0]]), 1.0)
    assert not validate_alpha_dp(np.ones(3), 1.0)


def test_ratio_tolerance_is_absolute():
    ea = math.exp(1.0)
    q = np.array([[ea, 1.0], [1.0, ea]]) / (ea + 1)
    assert validate_alpha_dp(q, 1.0 - 1e-14)
    assert not validate_alpha_dp(q, 0.99)


# -- constructors ---------------------------------------------------------------


def test_randomized_response_values():
    np.testing.assert_allclose(randomized_response(2, LN3).matrix, [[0.75, 0.25], [0.25, 0.75]], rtol=1e-15)
    q3 = randomized_response(3, LN3).matrix
    np.testing.assert_allclose(np.diag(q3), 0.6, rtol=1e-15)
    np.testing.assert_allclose(q3[~np.eye(3, dtype=bool)], 0.2, rtol=1e-14)
    np.testing.assert_allclose(randomized_response(5, 1e-12).matrix, 0.2, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(2, 12), alpha=st.floats(1e-3, 15.0))
def test_randomized_response_is_valid(k, alpha):
    assert randomized_response(k, alpha).validate()


def test_randomized_response_rejects_bad_arguments():
    with pytest.raises(ValueError):
        randomized_response(1, 1.0)
    with pytest.raises(ValueError):
        randomized_response(3, 0.0)


def test_label_count_mismatch():
    with pytest.raises(ValueError):
        Channel(np.eye(2), 1.0, ("a", "b", "c"))


# -- composition ----------------------------------------------------------------


def test_permutation_post_processing_relabels():
    q = randomized_response(2, 1.0, ("no", "yes"))
    swap = Channel(np.array([[0.0, 1.0], [1.0, 0.0]]), math.inf, q.output_labels, ("yes'", "no'"))
    out = compose_post(swap, q)
    np.testing.assert_array_equal(out.matrix, q.matrix[::-1])
    assert out.output_labels == ("yes'", "no'") and out.validate()


def test_merging_outputs_keeps_privacy():
    merged = compose_post(deterministic_kernel([0, 0, 1], 2), randomized_response(3, 1.0))
    assert merged.shape == (2, 3)
    ea = math.e
    np.testing.assert_allclose(merged.matrix[1], [1, 1, ea] / np.float64(ea + 2), rtol=1e-15)
    assert validate_alpha_dp(merged.matrix, 1.0)


def test_collapse_to_one_output_is_constant():
    q = compose_post(deterministic_kernel([0, 0], 1), randomized_response(2, 3.0))
    np.testing.assert_allclose(q.matrix, [[1.0, 1.0]])


def test_post_composition_shape_mismatch():
    with pytest.raises(ValueError):
        compose_post(deterministic_kernel([0, 0, 0], 1), randomized_response(2, 1.0))


def test_pre_composition():
    q = randomized_response(3, 1.0, ("a", "b", "c"))
    assert compose_pre(q, ["a", "b", "c"], ("a", "b", "c")) == q
    collapsed = compose_pre(q, ["b", "b", "b", "b"])
    assert np.all(collapsed.matrix == collapsed.matrix[:, :1])
    assert collapsed.validate(1e-9)
    via_dict = compose_pre(q, {10: "c", 20: "a"})
    np.testing.assert_array_equal(via_dict.matrix, q.matrix[:, [2, 0]])
    with pytest.raises(ValueError):
        compose_pre(q, ["z"])


def test_composition_closure_on_random_channels(rng):
    for _ in range(1000):
        k = int(rng.integers(2, 6))
        alpha = float(rng.uniform(0.05, 4.0))
        q = random_channel(k, alpha, rng)
        t = Channel(random_stochastic(int(rng.integers(1, 7)), q.shape[0], rng), math.inf)
        assert compose_post(t, q).validate(alpha)


# -- serialization --------------------------------------------------------------


def test_json_round_trip_is_bit_exact(rng, tmp_path):
    for _ in range(50):
        q = random_channel(4, float(rng.uniform(0.1, 3)), rng, labels=("a", "b", "c", "d"))
        assert Channel.from_json(q.to_json()) == q
    q = randomized_response(3, LN3, ((0, 1), (1, 0), (1, 1)))
    q.save(tmp_path / "q.json", note="extra keys are ignored")
    assert Channel.load(tmp_path / "q.json") == q
    with pytest.raises(ValueError, match="matrix"):
        Channel.from_dict({"alpha": 1.0, "input_labels": [0], "output_labels": [0]})


def test_matrix_is_read_only():
    q = randomized_response(2, 1.0)
    with pytest.raises(ValueError):
        q.matrix[0, 0] = 1.0


# -- sampling -------------------------------------------------------------------


def test_constant_channel_always_returns_the_same_output(rng):
    q = Channel(np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]), 1.0)
    assert set(sample_many(q, rng.integers(0, 2, 500), rng).tolist()) == {1}


def test_warner_sampling_frequency():
    q = randomized_response(2, LN3)
    z = sample_many(q, np.zeros(1_000_000, dtype=int), make_rng(5))
    assert abs(np.mean(z == 0) - 0.75) < 0.003


def test_sampling_is_reproducible():
    q = randomized_response(4, 0.5, "wxyz")
    a = [sample(q, "x", make_rng(11)) for _ in range(3)]
    assert a == [sample(q, "x", make_rng(11))] * 3
    r1, r2 = make_rng(9), make_rng(9)
    np.testing.assert_array_equal(sample_many(q, np.arange(4).repeat(50), r1), sample_many(q, np.arange(4).repeat(50), r2))
    with pytest.raises(ValueError):
        sample(q, "q", r1)


def test_zero_rows_are_never_sampled(rng):
    q = Channel(np.array([[0.5, 0.2], [0.0, 0.0], [0.5, 0.8]]), 2.0)
    z = sample_many(q, rng.integers(0, 2, 20000), rng)
    assert 1 not in set(z.tolist())


def test_sampling_law_chi_square():
    rng = make_rng(2024)
    for _ in range(20):
        k = int(rng.integers(2, 5))
        q = random_channel(k, float(rng.uniform(0.2, 3.0)), rng)
        j = int(rng.integers(k))
        n = 20000
        z = sample_many(q, np.full(n, j), rng)
        keep = q.nonzero_rows()
        observed = np.array([np.sum(z == i) for i in keep])
        expected = q.matrix[keep, j] * n
        assert observed.sum() == n
        pos = expected > 0
        assert observed[~pos].sum() == 0
        assert stats.chisquare(observed[pos], expected[pos]).pvalue > 0.001


# -- Laplace mechanism ------------------------------------------------------------


def test_truncation_replaces_large_values_by_zero(rng):
    mech = LaplaceMechanism(tau=1.0, alpha=1.0)
    z = laplace_sanitize(np.full(200_000, 5.0), mech, rng)
    assert abs(z.mean()) < 0.05


def test_laplace_noise_variance(rng):
    mech = LaplaceMechanism(tau=1.0, alpha=1.0)
    assert mech.scale == 2.0
    z = laplace_sanitize(np.zeros(400_000), mech, rng)
    assert z.var() == pytest.approx(8.0, rel=0.02)


def test_laplace_density_ratio_on_grid():
    mech = LaplaceMechanism(tau=1.5, alpha=0.8)
    ys = np.linspace(-3, 3, 25)
    zs = np.linspace(-8, 8, 81)
    bound = math.exp(mech.alpha) * (1 + 1e-12)
    for y in ys:
        for y2 in ys:
            for z in zs:
                assert laplace_density(z, y, mech) <= bound * laplace_density(z, y2, mech)


def test_laplace_multivariate(rng):
    mech = LaplaceMechanism(tau=2.0, alpha=1.0, dim=2)
    out = laplace_sanitize(np.array([[0.5, 0.5], [3.0, 0.0]]), mech, rng)
    assert out.shape == (2, 2)
    with pytest.raises(ValueError):
        laplace_sanitize(np.zeros((3, 3)), mech, rng)
    with pytest.raises(ValueError):
        LaplaceMechanism(tau=0.0, alpha=1.0)
