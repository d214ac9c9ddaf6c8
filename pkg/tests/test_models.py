import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from dampedcos import (InvalidParameters, MarketSpec, MomentUnavailable, NormalModel,
                       VarianceGammaModel, axis_moment, bs_log_return_model, build_damped_density,
                       cf_l2_norm, vg_log_return_model)
from dampedcos.models import EXPONENTIAL
from dampedcos.oracles import vg_density_1d, vg_density_at_zero

BASKET_COV = np.array([[0.04, 0.04], [0.04, 0.16]])
VG_CDF = dict(a=1 / 0.19, s=0.19, eta=0.0, theta=0.0, sigma=0.13)


def vg_cdf_model():
    return VarianceGammaModel(**VG_CDF)


def basket_vg_model(T=1.0):
    return vg_log_return_model(MarketSpec([50, 50], 0.0, T), 0.1, [-0.03, -0.03], [0.2, 0.2])


# --- normal -------------------------------------------------------------------

def test_normal_cf_at_zero_is_one():
    m = NormalModel([0.3, -1.0], BASKET_COV)
    assert m.cf(np.zeros(2)) == pytest.approx(1.0, abs=1e-15)


def test_normal_cf_scalar():
    m = NormalModel([0.0], [[0.04]])
    assert m.cf(np.array([1.0])) == pytest.approx(math.exp(-0.02), rel=1e-15)


def test_normal_cf_two_dim_quadratic_form():
    eta = np.array([0.1, -0.2])
    m = NormalModel(eta, BASKET_COV)
    z = np.array([1.0, 1.0])
    # hand expansion 0.04 + 2 * 0.04 + 0.16 = 0.28
    expected = np.exp(1j * eta.sum() - 0.5 * 0.28)
    assert abs(m.cf(z) - expected) < 1e-15


def test_normal_complex_argument():
    m = NormalModel([0.2], [[0.09]])
    z = np.array([0.5 - 2j])
    expected = np.exp(1j * 0.2 * z[0] - 0.5 * 0.09 * z[0] ** 2)
    assert abs(m.cf(z) - expected) < 1e-14


@pytest.mark.parametrize("cov", [[[1.0, 2.0], [2.0, 1.0]], [[1.0, 0.1], [0.0, 1.0]], [[0.0]]])
def test_normal_rejects_bad_covariance(cov):
    eta = np.zeros(len(cov))
    with pytest.raises(InvalidParameters):
        NormalModel(eta, cov)


@pytest.mark.parametrize("n, expected", [(2, 0.04), (4, 3 * 0.04 ** 2), (6, 15 * 0.04 ** 3),
                                         (8, 105 * 0.04 ** 4)])
def test_normal_axis_moments(n, expected):
    dd = build_damped_density(NormalModel([1.0], [[0.04]]), 0.0)
    assert axis_moment(dd, 0, n) == pytest.approx(expected, rel=1e-14)


def test_normal_l2_closed_forms():
    dd = build_damped_density(NormalModel([0.0], [[1.0]]), 0.0)
    assert cf_l2_norm(dd) == pytest.approx(1 / (2 * math.sqrt(math.pi)), rel=1e-15)
    dd2 = build_damped_density(NormalModel([0.0, 0.0], BASKET_COV), [-4, -4])
    expected = 0.25 / math.sqrt(math.pi ** 2 * np.linalg.det(BASKET_COV))
    assert cf_l2_norm(dd2) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("cov", [[[0.04]], BASKET_COV, np.diag([0.04, 0.09, 0.16])
                                 + 0.01 * (np.ones((3, 3)) - np.eye(3))])
def test_l2_quadrature_matches_normal_closed_form(cov):
    cov = np.asarray(cov)
    dd = build_damped_density(NormalModel(np.zeros(len(cov)), cov), 0.0)
    assert cf_l2_norm(dd, "quadrature") == pytest.approx(cf_l2_norm(dd), rel=1e-10)


# --- variance gamma -------------------------------------------------------------

def test_vg_cf_real_axis_formula():
    m = vg_cdf_model()
    u = np.linspace(-50, 50, 11)
    expected = (1 + 0.5 * 0.19 * 0.0169 * u ** 2) ** (-1 / 0.19)
    vals = m.cf(u[:, None])
    assert np.allclose(vals, expected, rtol=1e-13, atol=0)
    assert np.all(vals.real > 0) and np.allclose(vals.imag, 0)


def test_vg_cf_matches_density_fourier_integral():
    m = vg_cdf_model()
    f = lambda x: float(vg_density_1d(x, m.a, m.s, 0.0, 0.13))  # noqa: E731
    u = 10.0
    re = 2 * integrate.quad(lambda x: f(x) * math.cos(u * x), 0, 3, limit=400, points=[1e-6])[0]
    assert abs(m.cf(np.array([u])) - re) < 1e-6


@pytest.mark.parametrize("model", [vg_cdf_model(), basket_vg_model(), NormalModel([0.1, 0.3], BASKET_COV)])
def test_hermitian_and_bounded(model):
    rng = np.random.default_rng(1)
    u = rng.normal(scale=20, size=(200, model.dim))
    a, b = model.cf(u), model.cf(-u)
    assert np.allclose(a, np.conj(b), rtol=1e-13, atol=1e-300)
    assert np.all(np.abs(a) <= 1 + 1e-14)


def test_vg_decay_slope():
    m = vg_cdf_model()
    dd = build_damped_density(m, 0.0)
    t = np.geomspace(1e2, 1e4, 20)
    slope = np.polyfit(np.log(t), np.log(np.abs(dd.eval(t[:, None]))), 1)[0]
    assert abs(slope / (-2 * m.a) - 1) < 0.05
    scaled = np.abs(dd.eval(t[:, None])) * t ** (2 * m.a)
    # |fhat(u)| u^(2a) levels off at (2 / (s sigma^2))^a
    assert scaled[-1] == pytest.approx((2 / (m.s * 0.13 ** 2)) ** m.a, rel=1e-4)


def test_vg_decay_exponent():
    assert basket_vg_model().decay().p == pytest.approx(20.0)
    assert EXPONENTIAL.exponential
    assert NormalModel([0.0], [[1.0]]).decay().exponential


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_vg_moments_match_density_quadrature(n):
    m = vg_cdf_model()
    dd = build_damped_density(m, 0.0)
    f = lambda x: x ** n * float(vg_density_1d(x, m.a, m.s, 0.0, 0.13))  # noqa: E731
    ref = 2 * integrate.quad(f, 0, np.inf, limit=400)[0]
    assert axis_moment(dd, 0, n) == pytest.approx(ref, rel=1e-3 if n == 8 else 1e-8)


def test_vg_skewed_moments_match_density_quadrature():
    a, s, theta, sigma = 3.0, 0.2, -0.3, 0.25
    m = VarianceGammaModel(a, s, 0.0, theta, sigma)
    dd = build_damped_density(m, 0.0)
    mean = a * s * theta
    f = lambda x: (x - mean) ** 6 * float(vg_density_1d(x, a, s, theta, sigma))  # noqa: E731
    ref = integrate.quad(f, -np.inf, np.inf, limit=400)[0]
    assert axis_moment(dd, 0, 6) == pytest.approx(ref, rel=1e-7)


def test_vg_l2_norm_density_at_zero_identity():
    m = vg_cdf_model()
    dd = build_damped_density(m, 0.0)
    # the symmetrised law is VG with shape 2a
    ref = vg_density_at_zero(2 * m.a, m.s, 0.13)
    assert cf_l2_norm(dd) == pytest.approx(ref, rel=1e-12)
    assert cf_l2_norm(dd, "quadrature") == pytest.approx(ref, rel=1e-6)


def test_vg_l2_quadrature_for_skewed_damped_density():
    dd = build_damped_density(basket_vg_model(), [-4, -4])
    val = cf_l2_norm(dd)
    f = lambda u: abs(complex(dd.eval(np.array([u, 0.3]))))  # noqa: E731
    assert val > 0 and math.isfinite(val)
    assert f(0.0) > 0


def test_vg_strip_and_parameters():
    m = vg_cdf_model()
    assert m.admissible(np.array([5.0]))
    assert not m.admissible(np.array([30.0]))
    with pytest.raises(InvalidParameters):
        VarianceGammaModel(-1.0, 0.1, 0.0, 0.0, 0.2)
    with pytest.raises(InvalidParameters):
        VarianceGammaModel(1.0, 0.1, 0.0, 0.0, 0.0)


def test_vg_smoothness_limit():
    assert vg_cdf_model().smoothness_limit() == 8
    assert VarianceGammaModel(5.0, 0.2, 0.0, 0.0, 0.1).smoothness_limit() == 7


# --- market wrappers --------------------------------------------------------------

def test_bs_wrapper():
    m = bs_log_return_model(MarketSpec([100.0], 0.0, 1.0), [[0.04]])
    assert m.eta[0] == pytest.approx(math.log(100) - 0.02, rel=1e-15)
    assert m.cov[0, 0] == pytest.approx(0.04)
    m2 = bs_log_return_model(MarketSpec([50.0, 50.0], 0.0, 1.0), BASKET_COV)
    assert np.allclose(m2.eta, math.log(50) - 0.5 * np.diag(BASKET_COV))


@pytest.mark.parametrize("T, a", [(1.0, 10.0), (0.5, 5.0), (0.7, 7.0)])
def test_vg_wrapper_shape(T, a):
    m = basket_vg_model(T)
    assert m.a == pytest.approx(a) and m.s == pytest.approx(0.1)
    expected = math.log(50) + math.log(1 - 0.5 * 0.04 * 0.1 + 0.03 * 0.1) / 0.1 * T
    assert np.allclose(m.eta, expected, rtol=1e-15)


@pytest.mark.parametrize("model", [basket_vg_model(), bs_log_return_model(
    MarketSpec([50.0, 80.0], 0.03, 2.0), BASKET_COV)])
def test_martingale_condition(model):
    r, T = (0.0, 1.0) if isinstance(model, VarianceGammaModel) else (0.03, 2.0)
    spot = np.array([50.0, 50.0]) if isinstance(model, VarianceGammaModel) else np.array([50.0, 80.0])
    for h in range(2):
        z = np.zeros(2, dtype=complex)
        z[h] = -1j
        assert (math.exp(-r * T) * model.cf(z)).real == pytest.approx(spot[h], rel=1e-12)


def test_vg_wrapper_rejects_bad_log_argument():
    with pytest.raises(InvalidParameters):
        vg_log_return_model(MarketSpec([50.0], 0.0, 1.0), 2.0, 1.0, 0.2)


def test_market_validation():
    with pytest.raises(InvalidParameters):
        MarketSpec([-1.0], 0.0, 1.0)
    with pytest.raises(InvalidParameters):
        MarketSpec([1.0], 0.0, 0.0)
    assert MarketSpec([1.0], 0.05, 1.0).discount == pytest.approx(math.exp(-0.05))


def test_moment_order_validation():
    dd = build_damped_density(vg_cdf_model(), 0.0)
    with pytest.raises(ValueError):
        axis_moment(dd, 0, 3)


class _OnlyCf(NormalModel):
    """Normal model that hides its closed forms."""

    def damping_params(self, alpha):
        return None

    def damped_model(self, alpha):
        return None


def test_numeric_moment_fallback():
    dd = build_damped_density(_OnlyCf([0.0], [[0.04]]), 0.0)
    assert axis_moment(dd, 0, 2) == pytest.approx(0.04, rel=1e-6)
    assert axis_moment(dd, 0, 4) == pytest.approx(3 * 0.04 ** 2, rel=1e-4)
    with pytest.raises(MomentUnavailable):
        axis_moment(dd, 0, 8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 20), st.floats(0.05, 1.0), st.floats(-0.5, 0.5), st.floats(0.05, 0.5))
def test_vg_second_moment_property(a, s, theta, sigma):
    m = VarianceGammaModel(a, s, 0.0, theta, sigma)
    dd = build_damped_density(m, 0.0)
    assert axis_moment(dd, 0, 2) == pytest.approx(a * s * sigma ** 2 + a * s * s * theta ** 2,
                                                  rel=1e-12)
