import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldpeff.errors import DomainError, NumericalError, ResourceLimitError
from ldpeff.models import (
    DiscretizationMap,
    _adaptive_simpson,
    bernoulli_model,
    binomial_model,
    default_tail_mass,
    discretize,
    fisher_info_raw,
    gaussian_location_model,
    model_from_name,
    tabulated_model,
)

thetas = st.floats(min_value=1e-3, max_value=1 - 1e-3)


def test_bernoulli_information():
    m = bernoulli_model()
    assert fisher_info_raw(m, 0.5) == pytest.approx(4.0, rel=1e-15)
    assert fisher_info_raw(m, 0.3) == pytest.approx(1 / 0.21, rel=1e-14)


def test_constant_model_has_zero_information():
    m = tabulated_model(("a", "b", "c"), [0.2, 0.3, 0.5], [0, 0, 0])
    assert fisher_info_raw(m, 0.1) == 0.0


def test_binomial_pmf_values():
    np.testing.assert_allclose(binomial_model(1).pmf(0.3), [0.7, 0.3], rtol=1e-15)
    np.testing.assert_allclose(binomial_model(2).pmf(0.5), [0.25, 0.5, 0.25], rtol=1e-15)


def test_binomial2_derivative_matches_hand_values_and_finite_differences():
    m = binomial_model(2)
    pdot = m.pmf_dot(0.2)
    np.testing.assert_allclose(pdot, [-1.6, 1.2, 0.4], atol=1e-14)
    assert abs(pdot.sum()) < 1e-14
    h = 1e-6
    np.testing.assert_allclose(pdot, (m.pmf(0.2 + h) - m.pmf(0.2 - h)) / (2 * h), atol=1e-8)


@pytest.mark.parametrize("m", [1, 2, 5, 12])
@settings(max_examples=100, deadline=None)
@given(theta=thetas)
def test_binomial_normalization_and_zero_sum(m, theta):
    model = binomial_model(m)
    assert model.pmf(theta).sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(model.pmf_dot(theta).sum()) < 1e-10 * max(1, m)


def test_quadratic_pmfs_have_exact_central_differences():
    for m in (1, 2):
        model = binomial_model(m)
        h = 1e-3
        fd = (model.pmf(0.37 + h) - model.pmf(0.37 - h)) / (2 * h)
        np.testing.assert_allclose(model.pmf_dot(0.37), fd, atol=1e-11)


@pytest.mark.parametrize("m", [3, 6, 10])
def test_finite_difference_error_is_second_order(m):
    model = binomial_model(m)
    theta = 0.37

    def err(h):
        fd = (model.pmf(theta + h) - model.pmf(theta - h)) / (2 * h)
        return np.max(np.abs(model.pmf_dot(theta) - fd))

    ratio = err(1e-3) / err(1e-4)
    assert 50 < ratio < 200


def test_theta_outside_domain_raises():
    with pytest.raises(DomainError):
        fisher_info_raw(bernoulli_model(), 1.2)
    with pytest.raises(DomainError):
        bernoulli_model().check_theta(0.0)


def test_index_of_rejects_unknown_label():
    with pytest.raises(ValueError):
        binomial_model(2).index_of([0, 3])


def test_sampling_frequencies(rng):
    m = binomial_model(2)
    idx = m.sample(0.4, 200_000, rng)
    freq = np.bincount(idx, minlength=3) / len(idx)
    np.testing.assert_allclose(freq, m.pmf(0.4), atol=0.005)


def test_model_from_name():
    assert model_from_name("bernoulli").k == 2
    assert model_from_name("binomial:4").k == 5
    g = model_from_name("gaussian-location:2")
    assert g.density(0.0, 0.0) == pytest.approx(1 / (2 * math.sqrt(2 * math.pi)))
    for bad in ("poisson", "binomial:x", "bernoulli:3"):
        with pytest.raises(ValueError):
            model_from_name(bad)


def test_gaussian_density_derivative():
    g = gaussian_location_model(1.5)
    x = np.linspace(-4, 4, 17)
    h = 1e-6
    fd = (g.density(0.3 + h, x) - g.density(0.3 - h, x)) / (2 * h)
    np.testing.assert_allclose(g.density_dot(0.3, x), fd, atol=1e-8)


def test_adaptive_simpson_accuracy_and_failure():
    assert _adaptive_simpson(np.sin, 0.0, math.pi, 1e-12) == pytest.approx(2.0, abs=1e-11)
    with pytest.raises(NumericalError):
        _adaptive_simpson(lambda x: 1.0 if x > 0.3 else 0.0, 0.0, 1.0, 1e-300, max_depth=8)


# -- discretization -----------------------------------------------------------


def test_discretize_gaussian_cell_count():
    g = gaussian_location_model()
    gamma, delta = 1e-3, 0.5
    dm, tmap = discretize(g, 0.0, 0.1, tail_mass=gamma, cell_width=delta)
    lo, hi = tmap.edges[0], tmap.edges[-1]
    assert lo == pytest.approx(-3.2905, abs=1e-4) and hi == pytest.approx(3.2905, abs=1e-4)
    assert dm.k == math.ceil((hi - lo) / delta) + 1
    assert dm.pmf(0.0)[0] <= gamma + 1e-10
    assert dm.pmf(0.0)[0] == pytest.approx(gamma, rel=1e-6)


def test_discretized_model_is_a_valid_finite_model(rng):
    dm, _ = discretize(gaussian_location_model(), 0.2, 0.1, tail_mass=1e-3, cell_width=0.7)
    for theta in rng.uniform(-3, 3, size=100):
        assert dm.pmf(theta).sum() == pytest.approx(1.0, abs=1e-9)
        assert abs(dm.pmf_dot(theta).sum()) < 1e-9
        assert np.all(dm.pmf(theta) >= 0)
    h = 1e-5
    fd = (dm.pmf(0.5 + h) - dm.pmf(0.5 - h)) / (2 * h)
    np.testing.assert_allclose(dm.pmf_dot(0.5), fd, atol=1e-7)


def test_coarsening_loses_information():
    g = gaussian_location_model()
    coarse, _ = discretize(g, 0.0, 0.1, tail_mass=1e-3, cell_width=0.5)
    fine, _ = discretize(g, 0.0, 0.1, tail_mass=1e-3, cell_width=0.125)
    assert fisher_info_raw(coarse, 0.0) <= fisher_info_raw(fine, 0.0) + 1e-12
    # the undiscretized Gaussian location model has information 1 / sigma^2 = 1
    assert fisher_info_raw(fine, 0.0) <= 1.0 + 1e-9


def test_automatic_cell_width_halving():
    g = gaussian_location_model()
    dm, tmap = discretize(g, 0.0, 0.2, alpha=1.0)
    finer, _ = discretize(g, 0.0, 0.2, tail_mass=default_tail_mass(0.2, 1.0), cell_width=(tmap.edges[-1] - tmap.edges[0]) / (2 * (dm.k - 1)))
    assert abs(fisher_info_raw(finer, 0.0) - fisher_info_raw(dm, 0.0)) < 0.2
    with pytest.raises(ResourceLimitError):
        discretize(g, 0.0, 1e-9, alpha=1.0, max_cells=8)


def test_discretization_map_assigns_cells():
    tmap = DiscretizationMap(np.array([-1.0, 0.0, 1.0]))
    np.testing.assert_array_equal(tmap(np.array([-2.0, -0.5, 0.0, 0.5, 1.0, 3.0])), [0, 1, 2, 2, 2, 0])
    assert tmap.k == 2
