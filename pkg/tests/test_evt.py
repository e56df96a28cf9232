import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from lomn import evt


def _density_by_convolution(x):
    # density of |V| - |V'| as a convolution of two half-normal densities
    f = lambda y: 4.0 * stats.norm.pdf(y) * stats.norm.pdf(x + y)
    return integrate.quad(f, max(0.0, -x), np.inf)[0]


@pytest.mark.parametrize("x", [0.0, 0.5, 1.7, -2.3, 4.0])
def test_density_matches_convolution(x):
    assert evt.halfnorm_diff_density(x) == pytest.approx(_density_by_convolution(x), rel=1e-9)


def test_density_at_zero():
    assert evt.halfnorm_diff_density(0.0) == pytest.approx(1.0 / np.sqrt(np.pi), rel=1e-14)


def test_density_integrates_to_one():
    total, _ = integrate.quad(evt.halfnorm_diff_density, -np.inf, np.inf, epsabs=1e-13)
    assert abs(total - 1.0) < 1e-8


def test_density_is_symmetric():
    x = np.linspace(0, 6, 31)
    assert_allclose(evt.halfnorm_diff_density(x), evt.halfnorm_diff_density(-x))


def test_survival_values():
    assert evt.halfnorm_diff_survival(0.0) == 0.5
    x = 1.3
    assert evt.halfnorm_diff_survival(-x) == pytest.approx(1.0 - evt.halfnorm_diff_survival(x))
    # monte carlo oracle
    g = np.random.default_rng(5)
    d = np.abs(g.standard_normal(2_000_000)) - np.abs(g.standard_normal(2_000_000))
    assert evt.halfnorm_diff_survival(x) == pytest.approx(np.mean(d > x), abs=2e-3)


def test_survival_tail_asymptote():
    # Gbar(x) ~ (2/pi) exp(-x^2/2) / x^2; ratio approaches one from below
    ratios = [evt.halfnorm_diff_survival(x) / ((2 / np.pi) * np.exp(-x * x / 2) / x ** 2)
              for x in (6.0, 10.0, 20.0)]
    assert ratios[0] == pytest.approx(0.905949584, rel=1e-6)
    assert np.all(np.diff(ratios) > 0) and ratios[-1] < 1.0 and ratios[-1] > 0.99


def test_gumbel_quantile():
    assert evt.gumbel_quantile(0.05) == pytest.approx(2.9701952490, abs=1e-9)
    assert evt.gumbel_cdf(evt.gumbel_quantile(0.01)) == pytest.approx(0.99)
    with pytest.raises(ValueError):
        evt.gumbel_quantile(0.0)


def test_calibration_constants():
    cal = evt.GumbelCalibration(10_000)
    r = np.sqrt(2 * np.log(20_000))
    assert cal.a == pytest.approx(1 / r)
    assert cal.b == pytest.approx(r - np.log(np.pi * np.log(20_000)) / r)
    assert cal.B == pytest.approx(cal.b / cal.a)
    assert evt.global_centering(629) == pytest.approx(11.161536227, abs=1e-8)
    with pytest.raises(ValueError):
        evt.GumbelCalibration(1)


def test_tail_scaling_at_large_n():
    # N Gbar(a t + b) against exp(-t); values frozen from quadrature
    cal = evt.GumbelCalibration(10 ** 6)
    got = [1e6 * evt.halfnorm_diff_survival(cal.a * t + cal.b) / np.exp(-t) for t in (-1, 0, 1, 2)]
    assert_allclose(got, [0.409042, 0.442570, 0.463612, 0.470147], atol=1e-5)


def test_local_quantile_against_monte_carlo():
    g = np.random.default_rng(123)
    u = np.abs(np.abs(g.standard_normal(10 ** 6)) - np.abs(g.standard_normal(10 ** 6)))
    assert evt.local_quantile(0.05) == pytest.approx(np.quantile(u, 0.95), abs=1e-2)
    assert evt.local_quantile(0.05) == pytest.approx(1.7210883, abs=1e-6)
    assert 2 * evt.halfnorm_diff_survival(evt.local_quantile(0.01)) == pytest.approx(0.01, rel=1e-6)


def test_local_quantile_edges():
    assert evt.local_quantile(1.0) == 0.0
    with pytest.raises(ValueError):
        evt.local_quantile(0.0)


def test_balanced_block_count_fixed_point():
    n = 23_400
    K = evt.balanced_block_count(n)
    h = 1.0 / K
    assert h == pytest.approx(2 * np.log(2 / h - 2) * n ** (-2 / 3), rel=0.02)
    assert K == 81
