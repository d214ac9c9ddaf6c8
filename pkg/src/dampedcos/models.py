"""Characteristic-function families and their financial wrappers.

Every model evaluates ``log ghat(z)`` for complex arguments ``z`` stacked
along the last axis (shape ``(..., d)``).  The sign convention is
``ghat(u) = E[exp(i u . X)]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import (InvalidParameters, MomentUnavailable, NotSquareIntegrable,
                     StripViolation)


@dataclass(frozen=True)
class DecayExponent:
    """Polynomial decay rate ``|fhat(u)| = O(|u|_inf^-p)``.

    ``p = inf`` marks exponential (or faster) decay.
    """

    p: float

    @property
    def exponential(self) -> bool:
        return math.isinf(self.p)


EXPONENTIAL = DecayExponent(math.inf)


@dataclass(frozen=True)
class MarketSpec:
    spot: np.ndarray
    rate: float
    maturity: float

    def __post_init__(self):
        spot = np.atleast_1d(np.asarray(self.spot, dtype=float))
        object.__setattr__(self, "spot", spot)
        if np.any(spot <= 0) or not np.all(np.isfinite(spot)):
            raise InvalidParameters("spot prices must be positive")
        if not self.maturity > 0:
            raise InvalidParameters("maturity must be positive")

    @property
    def dim(self) -> int:
        return self.spot.size

    @property
    def discount(self) -> float:
        return math.exp(-self.rate * self.maturity)


class CharacteristicModel:
    """Base class for densities known through their characteristic function.

    Subclasses implement :meth:`log_cf`.  The remaining hooks are optional;
    returning ``None`` makes the caller fall back to numerics.
    """

    dim: int

    def log_cf(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cf(self, z) -> np.ndarray:
        return np.exp(self.log_cf(np.asarray(z, dtype=complex)))

    def admissible(self, alpha: np.ndarray) -> bool:
        """Whether ``ghat(-i alpha)`` exists."""
        return True

    def damping_params(self, alpha: np.ndarray):
        """Closed-form ``(log lambda, mu)`` or ``None``."""
        return None

    def damped_model(self, alpha: np.ndarray):
        """Closed-form model of the centred damped density, or ``None``."""
        return None

    def decay(self) -> DecayExponent:
        return EXPONENTIAL

    def central_moment(self, h: int, n: int) -> float | None:
        return None

    def l2_norm(self) -> float | None:
        """``(2 pi)^-d int |ghat|^2`` in closed form, or ``None``."""
        return None

    def real_cf(self) -> bool:
        """Declared (never sampled) flag: ``ghat`` is real on R^d."""
        return False

    def smoothness_limit(self) -> float:
        """Largest ``J`` such that the density is ``J + 1`` times differentiable."""
        return math.inf

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no sampler")


def _quad_form(z: np.ndarray, mat: np.ndarray) -> np.ndarray:
    # z . mat z for z of shape (..., d); bilinear (no conjugation)
    return np.einsum("...i,ij,...j->...", z, mat, z)


@dataclass(frozen=True, eq=False)
class NormalModel(CharacteristicModel):
    """Multivariate normal with location ``eta`` and covariance ``cov``."""

    eta: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (eta.size, eta.size):
            raise InvalidParameters(f"covariance shape {cov.shape} does not match d={eta.size}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-14 * np.abs(cov).max()):
            raise InvalidParameters("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise InvalidParameters("covariance must be positive definite") from exc
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self) -> int:
        return self.eta.size

    def log_cf(self, z):
        z = np.asarray(z, dtype=complex)
        return 1j * (z @ self.eta) - 0.5 * _quad_form(z, self.cov)

    def damping_params(self, alpha):
        log_lam = -(self.eta @ alpha) - 0.5 * (alpha @ self.cov @ alpha)
        return float(log_lam), self.eta + self.cov @ alpha

    def damped_model(self, alpha):
        return NormalModel(np.zeros(self.dim), self.cov)

    def central_moment(self, h, n):
        if n % 2:
            return 0.0
        double_fact = math.prod(range(n - 1, 0, -2))
        return double_fact * self.cov[h, h] ** (n // 2)

    def l2_norm(self):
        d = self.dim
        return 2.0 ** (-d) / math.sqrt(math.pi ** d * np.linalg.det(self.cov))

    def real_cf(self):
        return not np.any(self.eta)

    def sample(self, rng, size):
        z = rng.standard_normal((size, self.dim))
        return self.eta + z @ self.chol.T


def _vg_cumulant_central_moment(a, s, theta, sigma, n):
    """Central moment of order ``n`` of ``theta*G + sigma*sqrt(G)*Z``.

    Uses the cumulant generating function ``-a log(1 - q(t))`` with
    ``q(t) = s*theta*t + s*sigma^2*t^2/2`` expanded as a power series.
    """
    q = np.zeros(n + 1)
    q[1] = s * theta
    if n >= 2:
        q[2] = 0.5 * s * sigma ** 2
    cgf = np.zeros(n + 1)
    power = np.zeros(n + 1)
    power[0] = 1.0
    for j in range(1, n + 1):
        power = np.convolve(power, q)[: n + 1]
        cgf += a * power / j
    kappa = [cgf[m] * math.factorial(m) for m in range(n + 1)]
    kappa[1] = 0.0
    mom = [1.0] + [0.0] * n
    for m in range(1, n + 1):
        mom[m] = sum(math.comb(m - 1, j - 1) * kappa[j] * mom[m - j] for j in range(1, m + 1))
    return mom[n]


@dataclass(frozen=True, eq=False)
class VarianceGammaModel(CharacteristicModel):
    """``X = eta + theta*G + sqrt(G)*sigma*Z`` with ``G ~ Gamma(shape a, scale s)``.

    The covariance of ``Z`` is the identity, so the Gaussian part has the
    diagonal covariance ``diag(sigma**2)``.
    """

    a: float
    s: float
    eta: np.ndarray
    theta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        d = eta.size
        theta = np.broadcast_to(np.asarray(self.theta, dtype=float), (d,)).copy()
        sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), (d,)).copy()
        if not (self.a > 0 and self.s > 0 and np.all(sigma > 0)):
            raise InvalidParameters("VG requires a > 0, s > 0 and sigma > 0")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.eta.size

    @property
    def var(self) -> np.ndarray:
        return self.sigma ** 2

    def zeta(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        return float(1.0 - self.s * (self.theta @ alpha) - 0.5 * self.s * (alpha ** 2 @ self.var))

    def admissible(self, alpha):
        return self.zeta(alpha) > 0

    def _log_base(self, z):
        base = 1.0 - 1j * self.s * (z @ self.theta) + 0.5 * self.s * ((z * z) @ self.var)
        return np.log(base)

    def log_cf(self, z):
        z = np.asarray(z, dtype=complex)
        # principal branch; Re(base) > 0 on every admissible strip
        return 1j * (z @ self.eta) - self.a * self._log_base(z)

    def damping_params(self, alpha):
        zeta = self.zeta(alpha)
        if zeta <= 0:
            raise StripViolation(f"zeta = {zeta:.6g} <= 0: alpha outside the VG strip")
        log_lam = -(self.eta @ alpha) + self.a * math.log(zeta)
        mu = self.eta + self.a * self.s / zeta * (self.theta + self.var * alpha)
        return float(log_lam), mu

    def damped_model(self, alpha):
        zeta = self.zeta(alpha)
        s_f = self.s / zeta
        theta_f = self.theta + self.var * alpha
        return VarianceGammaModel(self.a, s_f, -self.a * s_f * theta_f, theta_f, self.sigma)

    def decay(self):
        return DecayExponent(2.0 * self.a)

    def central_moment(self, h, n):
        return _vg_cumulant_central_moment(self.a, self.s, self.theta[h], self.sigma[h], n)

    def l2_norm(self):
        """Closed form only for symmetric VG, via the density at zero at time 2T."""
        if not self.real_cf():
            return None
        d = self.dim
        if 4.0 * self.a <= d:
            raise NotSquareIntegrable(f"p = 2a = {2 * self.a} <= d/2")
        a2 = 2.0 * self.a
        log_val = (-0.5 * d * math.log(2 * math.pi) - np.log(self.sigma).sum()
                   + gammaln(a2 - 0.5 * d) - gammaln(a2) - 0.5 * d * math.log(self.s))
        return math.exp(log_val)

    def real_cf(self):
        return not np.any(self.theta) and not np.any(self.eta)

    def smoothness_limit(self):
        # largest natural number strictly below 2a - 2
        return max(math.ceil(2.0 * self.a - 2.0) - 1, 0)

    def sample(self, rng, size):
        g = rng.gamma(self.a, self.s, size)[:, None]
        z = rng.standard_normal((size, self.dim))
        return self.eta + self.theta * g + np.sqrt(g) * self.sigma * z


def bs_log_return_model(market: MarketSpec, sigma_mat) -> NormalModel:
    """Log-returns ``log S(T)`` in the multivariate Black-Scholes model."""
    sigma_mat = np.atleast_2d(np.asarray(sigma_mat, dtype=float))
    T = market.maturity
    eta = np.log(market.spot) + (market.rate - 0.5 * np.diag(sigma_mat)) * T
    return NormalModel(eta, T * sigma_mat)


def vg_log_return_model(market: MarketSpec, nu: float, theta, sigma) -> VarianceGammaModel:
    """Log-returns in the multivariate VG model of Luciano and Schoutens."""
    d = market.dim
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (d,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (d,))
    arg = 1.0 - 0.5 * sigma ** 2 * nu - theta * nu
    if np.any(arg <= 0):
        raise InvalidParameters("1 - sigma^2 nu / 2 - theta nu must be positive on every axis")
    T = market.maturity
    eta = np.log(market.spot) + (market.rate + np.log(arg) / nu) * T
    return VarianceGammaModel(T / nu, nu, eta, theta, sigma)


# --- quantities of the damped density -------------------------------------

def axis_moment(dd, h: int, n: int) -> float:
    """Moment ``int x_h^n f(x) dx`` of the centred damped density ``f``."""
    if n < 2 or n % 2:
        raise ValueError("moment order must be even and >= 2")
    damped = dd.model.damped_model(dd.alpha)
    if damped is not None:
        value = damped.central_moment(h, n)
        if value is not None:
            return float(value)
    if n <= 4:
        return _numeric_axis_moment(dd, h, n)
    raise MomentUnavailable(f"no closed form for moment order {n} and numeric "
                            "differentiation is unstable beyond order 4")


def _numeric_axis_moment(dd, h, n):
    # even-order central differences of Re fhat along axis h
    step = 1e-2 / math.sqrt(max(abs(_second_derivative_guess(dd, h)), 1e-300))
    e = np.zeros(dd.dim)
    e[h] = 1.0
    ts = np.arange(-3, 4) * step
    vals = np.array([dd.eval(t * e).real for t in ts])
    if n == 2:
        w = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
        deriv = w @ vals / step ** 2
    else:
        w = np.array([-1 / 6, 2, -13 / 2, 28 / 3, -13 / 2, 2, -1 / 6])
        deriv = w @ vals / step ** 4
    value = (-1) ** (n // 2) * deriv
    if not value > 0:
        raise MomentUnavailable(f"numeric moment of order {n} is not positive")
    return float(value)


def _second_derivative_guess(dd, h):
    e = np.zeros(dd.dim)
    e[h] = 1e-3
    return (2.0 - dd.eval(e).real - dd.eval(-e).real) / 1e-6


def cf_l2_norm(dd, method: str = "auto", tail_tol: float = 1e-14) -> float:
    """``(2 pi)^-d int |fhat(u)|^2 du`` for the damped density.

    ``method="auto"`` prefers a closed form of the damped model and falls back
    to tensor Gauss-Legendre quadrature; ``"quadrature"`` forces the latter.
    """
    if method not in ("auto", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    decay = dd.model.decay()
    if not decay.exponential and decay.p <= dd.dim / 2:
        raise NotSquareIntegrable(f"decay exponent {decay.p} <= d/2")
    if method == "auto":
        damped = dd.model.damped_model(dd.alpha)
        if damped is not None:
            value = damped.l2_norm()
            if value is not None:
                return float(value)
    return _l2_quadrature(dd, decay, tail_tol)


def _axis_scales(dd) -> np.ndarray:
    scales = []
    for h in range(dd.dim):
        try:
            m2 = axis_moment(dd, h, 2)
        except MomentUnavailable:
            m2 = 1.0
        scales.append(1.0 / math.sqrt(m2))
    return np.array(scales)


def _cutoff(dd, decay, scales, tail_tol) -> float:
    """Half-width ``U`` (in units of ``scales``) of the quadrature cube."""
    d = dd.dim
    dirs = [np.eye(d)[h] for h in range(d)] + [np.ones(d)]
    if decay.exponential:
        t = 1.0
        while max(abs(dd.eval(t * e * scales)) ** 2 for e in dirs) > tail_tol * 1e-4:
            t *= 1.5
        return t
    p = decay.p
    t0 = 1e4
    # fitted constant of |fhat(u)|^2 <= C |u|_inf^(-2p), u in scaled units
    C = max(abs(dd.eval(t0 * e * scales)) ** 2 * t0 ** (2 * p) for e in dirs)
    C *= d * 2.0 ** d / (2 * p - d) / (2 * math.pi) ** d * np.prod(scales)
    return max((C / tail_tol) ** (1.0 / (2 * p - d)), 8.0)


def _panel_nodes(U: float, nodes_per_panel: int = 12, growth: float = 1.3):
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = [0.0]
    width = 1.0
    while edges[-1] < U:
        edges.append(min(edges[-1] + width, U))
        width *= growth
    pts, wts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        pts.append(lo + half * (x + 1.0))
        wts.append(half * w)
    pos = np.concatenate(pts)
    wpos = np.concatenate(wts)
    return np.concatenate([-pos[::-1], pos]), np.concatenate([wpos[::-1], wpos])


def _l2_quadrature(dd, decay, tail_tol):
    d = dd.dim
    scales = _axis_scales(dd)
    U = _cutoff(dd, decay, scales, tail_tol)
    x, w = _panel_nodes(U)
    total = 0.0
    # iterate over the first axis to bound memory
    rest = np.stack(np.meshgrid(*([x] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1) if d > 1 else np.zeros((1, 0))
    wrest = np.prod(np.stack(np.meshgrid(*([w] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1), axis=1) if d > 1 else np.ones(1)
    partial = []
    for xi, wi in zip(x, w):
        u = np.concatenate([np.full((rest.shape[0], 1), xi), rest], axis=1) * scales
        vals = np.abs(dd.eval(u)) ** 2
        partial.append(wi * (wrest @ vals))
    total = math.fsum(partial)
    return total * np.prod(scales) / (2 * math.pi) ** d
