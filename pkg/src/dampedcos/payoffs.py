"""Functions of interest and their cosine coefficients.

Two routes produce the payoff coefficients paired with ``c_k``:

* closed-form box coefficients ``v_k = int_{[-M, M]} v(x) e_k(x) dx``
  (CDF, digital put, 1-d vanilla put, 1-d absolute moment);
* transform coefficients ``vtilde_k = int_{R^d} v(x) e_k(x) dx`` obtained from
  the Fourier transform ``what`` on the strip ``Im z < 0`` (digital put,
  arithmetic basket put).

``v`` is the damped function of interest
``v(x) = exp(-alpha . (x + mu)) w(x + mu) / lam``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .engine import sign_sum
from .errors import DampingNotSupported, InvalidParameters, StripViolation, TransformOverflow
from .special import loggamma

_LOG_MAX = math.log(np.finfo(float).max)


# --- one-dimensional building block ----------------------------------------

def _exp_integral(a, b, c, power: int):
    """``int_a^b x**power * exp(c x) dx`` for complex ``c``, ``power`` in {0, 1}.

    Broadcasts over ``a``, ``b`` and ``c``; a Taylor series handles small ``|c|``.
    """
    a, b, c = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(c, complex))
    out = np.zeros(c.shape, dtype=complex)
    radius = np.maximum(np.abs(a), np.abs(b))
    small = np.abs(c) * radius < 0.5
    if small.any():
        cs, as_, bs = c[small], a[small], b[small]
        acc = np.zeros(cs.shape, dtype=complex)
        term = np.ones(cs.shape, dtype=complex)
        for j in range(40):
            if j:
                term = term * cs / j
            n = j + power + 1
            acc += term * (bs ** n - as_ ** n) / n
        out[small] = acc
    big = ~small
    if big.any():
        cb, ab, bb = c[big], a[big], b[big]
        ea, eb = np.exp(cb * ab), np.exp(cb * bb)
        if power == 0:
            out[big] = (eb - ea) / cb
        else:
            out[big] = (bb * eb - ab * ea) / cb - (eb - ea) / cb ** 2
    return out


def _cos_moment(lo, hi, k, L, rate, power=0):
    """``int_lo^hi x**power exp(rate x) cos(k pi (x + L) / (2L)) dx``; zero when lo >= hi."""
    k = np.asarray(k, dtype=float)
    omega = k * np.pi / (2 * L)
    hi_c = np.maximum(hi, lo)
    val = np.exp(1j * omega * L) * _exp_integral(lo, hi_c, rate + 1j * omega, power)
    return np.where(hi > lo, val.real, 0.0)


# --- payoff types -----------------------------------------------------------

@dataclass(frozen=True)
class PayoffBounds:
    sup_norm: float
    l2_norm_sq: float

    def __post_init__(self):
        if not (0 < self.sup_norm < math.inf and 0 < self.l2_norm_sq < math.inf):
            raise ValueError(f"bounds must be finite and positive: {self}")


class Payoff:
    """A function of interest ``w`` on R^d."""

    kind: str
    required_alpha: str = "any"  # one of "any", "strictly_negative", "zero_only"
    dim: int

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_alpha(self, alpha) -> None:
        alpha = np.asarray(alpha, dtype=float)
        if self.required_alpha == "zero_only" and np.any(alpha):
            raise DampingNotSupported(f"{self.kind} coefficients are only available for alpha = 0")
        if self.required_alpha == "strictly_negative" and not np.all(alpha < 0):
            raise StripViolation(f"{self.kind} needs alpha < 0 componentwise")

    def log_transform(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} has no Fourier transform")

    def coefficient_provider(self, dd, M, L):
        """Callable ``k -> v_k`` (or ``vtilde_k``) for blocks of multi-indices."""
        raise NotImplementedError

    def bounds(self, dd, M) -> PayoffBounds:
        raise NotImplementedError


def _vec(x, d, name):
    x = np.broadcast_to(np.asarray(x, dtype=float), (d,)).copy()
    if not np.all(np.isfinite(x)):
        raise InvalidParameters(f"{name} must be finite")
    return x


@dataclass(frozen=True, eq=False)
class CDF(Payoff):
    """Indicator of ``(-inf, y]``."""

    y: np.ndarray
    kind = "cdf"
    required_alpha = "zero_only"

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        object.__setattr__(self, "y", _vec(y, y.size, "threshold y"))

    @property
    def dim(self):
        return self.y.size

    def evaluate(self, x):
        return np.all(x <= self.y, axis=-1).astype(float)

    def coefficient_provider(self, dd, M, L):
        self.check_alpha(dd.alpha)
        return lambda k: cdf_vk(self.y, M, L, dd.lam, dd.mu, k)

    def bounds(self, dd, M):
        return PayoffBounds(1.0, 2.0 ** self.dim * float(np.prod(M)))


def cdf_vk(y, M, L, lam, mu, k) -> np.ndarray:
    """Closed-form box coefficients of the indicator of ``(-inf, y]`` (alpha = 0)."""
    y, M, L, mu = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (y, M, L, mu))
    k = np.atleast_2d(np.asarray(k))
    gamma = np.minimum(y - mu, M)
    if np.any(gamma < -M):
        return np.zeros(k.shape[0])
    kf = k.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = (2 * L / (np.pi * kf)) * (np.sin(kf * np.pi * (gamma + L) / (2 * L))
                                           - np.sin(kf * np.pi * (L - M) / (2 * L)))
    factor = np.where(k == 0, gamma + M, factor)
    return np.prod(factor, axis=-1) / lam


@dataclass(frozen=True, eq=False)
class DigitalPut(Payoff):
    """Cash-or-nothing put paying 1 if ``exp(x) <= K`` componentwise."""

    strike: np.ndarray
    kind = "digital_put"

    def __post_init__(self):
        K = np.atleast_1d(np.asarray(self.strike, dtype=float))
        if np.any(K <= 0):
            raise InvalidParameters("strikes must be positive")
        object.__setattr__(self, "strike", K)

    @property
    def dim(self):
        return self.strike.size

    def evaluate(self, x):
        return np.all(x <= np.log(self.strike), axis=-1).astype(float)

    def log_transform(self, z):
        return log_digital_put_transform(self.strike, z)

    def coefficient_provider(self, dd, M, L, route: str = "auto"):
        if route == "auto":
            route = "transform" if np.all(dd.alpha < 0) else "box"
        if route == "transform":
            return lambda k: payoff_vk_tilde(self, dd, L, k)
        return lambda k: digital_put_vk(self.strike, M, L, dd, k)

    def bounds(self, dd, M):
        alpha = dd.alpha
        logK = np.log(self.strike)
        if np.all(alpha < 0):
            sup = math.exp(-dd.log_lam - alpha @ logK)
            l2 = math.exp(-2 * dd.log_lam - 2 * alpha @ logK) / np.prod(-2 * alpha)
            return PayoffBounds(sup, float(l2))
        if np.any(alpha):
            raise StripViolation("digital put needs alpha < 0 or alpha = 0")
        return PayoffBounds(1.0, 2.0 ** self.dim * float(np.prod(M)))


def log_digital_put_transform(K, z) -> np.ndarray:
    """``log what(z)`` with ``what(z) = prod_h K_h**(i z_h) / (i z_h)``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag >= 0):
        raise StripViolation("digital put transform needs Im z < 0")
    iz = 1j * z
    return np.sum(iz * np.log(K) - np.log(iz), axis=-1)


def digital_put_transform(K, z):
    K = np.atleast_1d(np.asarray(K, dtype=float))
    return np.exp(log_digital_put_transform(K, z))


def digital_put_vk(K, M, L, dd, k) -> np.ndarray:
    """Closed-form box coefficients of the damped digital put (any alpha)."""
    K = np.atleast_1d(np.asarray(K, dtype=float))
    M = np.broadcast_to(np.asarray(M, dtype=float), K.shape)
    L = np.broadcast_to(np.asarray(L, dtype=float), K.shape)
    k = np.atleast_2d(np.asarray(k))
    hi = np.minimum(np.log(K) - dd.mu, M)
    factors = _cos_moment(-M, hi, k, L, -dd.alpha)
    return math.exp(-dd.log_lam - dd.alpha @ dd.mu) * np.prod(factors, axis=-1)


@dataclass(frozen=True, eq=False)
class BasketPut(Payoff):
    """Arithmetic basket put ``max(K - sum_h exp(x_h), 0)``."""

    strike: float
    d: int
    kind = "basket_put"

    def __post_init__(self):
        if not self.strike > 0:
            raise InvalidParameters("strike must be positive")
        if self.d < 1:
            raise InvalidParameters("dimension must be positive")

    @property
    def dim(self):
        return self.d

    def check_alpha(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        if self.d == 1 and not np.any(alpha):
            return
        if not np.all(alpha < 0):
            raise StripViolation("basket put needs alpha < 0 (or alpha = 0 when d = 1)")

    def evaluate(self, x):
        return np.maximum(self.strike - np.exp(x).sum(axis=-1), 0.0)

    def log_transform(self, z):
        return log_basket_put_transform(self.strike, z)

    def coefficient_provider(self, dd, M, L):
        self.check_alpha(dd.alpha)
        if self.d == 1 and not np.any(dd.alpha):
            return lambda k: vanilla_put_vk(self.strike, M, L, dd.mu, k)
        return lambda k: payoff_vk_tilde(self, dd, L, k)

    def bounds(self, dd, M):
        alpha = dd.alpha
        K = self.strike
        if self.d == 1 and not np.any(alpha):
            return PayoffBounds(K, 2.0 * float(np.prod(M)) * K * K)
        self.check_alpha(alpha)
        sa = float(alpha.sum())
        sup = math.exp(-dd.log_lam + (1 - sa) * math.log(K))
        log_l2 = ((2 - 2 * sa) * math.log(K) - 2 * dd.log_lam
                  + gammaln(-2 * alpha).sum() - gammaln(1 - 2 * sa))
        return PayoffBounds(sup, math.exp(log_l2))


def log_basket_put_transform(K, z) -> np.ndarray:
    """``log what(z) = (1 + i sum z) log K + sum logGamma(i z_h) - logGamma(i sum z + 2)``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag >= 0):
        raise StripViolation("basket put transform needs Im z < 0")
    iz = 1j * z
    isum = iz.sum(axis=-1)
    out = (1 + isum) * math.log(K) + loggamma(iz).sum(axis=-1) - loggamma(isum + 2)
    return out


def basket_put_transform(K, z):
    log_w = log_basket_put_transform(K, z)
    if np.any(np.real(log_w) > _LOG_MAX):
        raise TransformOverflow("basket transform exceeds the double range")
    return np.exp(log_w)


@dataclass(frozen=True, eq=False)
class VanillaPut(Payoff):
    """One-dimensional put ``max(K - exp(x), 0)``."""

    strike: float
    kind = "vanilla_put"
    required_alpha = "zero_only"
    dim = 1

    def __post_init__(self):
        if not self.strike > 0:
            raise InvalidParameters("strike must be positive")

    def evaluate(self, x):
        return np.maximum(self.strike - np.exp(x[..., 0]), 0.0)

    def coefficient_provider(self, dd, M, L):
        self.check_alpha(dd.alpha)
        return lambda k: vanilla_put_vk(self.strike, M, L, dd.mu, k)

    def bounds(self, dd, M):
        K = self.strike
        return PayoffBounds(K, 2.0 * float(np.prod(M)) * K * K)


def vanilla_put_vk(K, M, L, mu, k) -> np.ndarray:
    """Box coefficients of ``max(K - exp(x + mu), 0)`` on ``[-M, M]`` (alpha = 0)."""
    M, L, mu = (float(np.ravel(v)[0]) for v in (M, L, mu))
    k = np.atleast_2d(np.asarray(k))[:, 0]
    hi = min(math.log(K) - mu, M)
    if hi <= -M:
        return np.zeros(k.shape)
    return (K * _cos_moment(-M, hi, k, L, 0.0)
            - math.exp(mu) * _cos_moment(-M, hi, k, L, 1.0))


@dataclass(frozen=True, eq=False)
class AbsMoment(Payoff):
    """``|x|`` in one dimension, optionally restricted to one branch.

    ``branch="positive"`` is ``max(x, 0)``, ``"negative"`` is ``max(-x, 0)``.
    """

    branch: str = "both"
    kind = "abs_moment"
    dim = 1

    def __post_init__(self):
        if self.branch not in ("both", "positive", "negative"):
            raise InvalidParameters(f"unknown branch {self.branch!r}")

    def check_alpha(self, alpha):
        a = float(np.ravel(alpha)[0])
        if self.branch == "both" and a != 0:
            raise DampingNotSupported("damp the two branches separately")
        if self.branch == "positive" and a < 0:
            raise StripViolation("positive branch needs alpha >= 0")
        if self.branch == "negative" and a > 0:
            raise StripViolation("negative branch needs alpha <= 0")

    def evaluate(self, x):
        x = x[..., 0]
        if self.branch == "positive":
            return np.maximum(x, 0.0)
        if self.branch == "negative":
            return np.maximum(-x, 0.0)
        return np.abs(x)

    def coefficient_provider(self, dd, M, L):
        self.check_alpha(dd.alpha)
        a = float(dd.alpha[0])
        branches = ("positive", "negative") if self.branch == "both" else (self.branch,)

        def provider(k):
            return sum(abs_moment_vk(M, L, a, dd.log_lam, dd.mu, b, k) for b in branches)
        return provider

    def bounds(self, dd, M):
        M = float(np.ravel(M)[0])
        a = float(dd.alpha[0])
        if a == 0:
            top = M + abs(float(dd.mu[0]))
            return PayoffBounds(top, 2 * M * top * top)
        return PayoffBounds(math.exp(-dd.log_lam) / (abs(a) * math.e),
                            math.exp(-2 * dd.log_lam) / (4 * abs(a) ** 3))


def abs_moment_vk(M, L, alpha, log_lam, mu, branch, k) -> np.ndarray:
    """Box coefficients of ``exp(-alpha (x + mu)) max(+-(x + mu), 0) / lam`` on ``[-M, M]``."""
    M, L, mu, alpha = (float(np.ravel(v)[0]) for v in (M, L, mu, alpha))
    k = np.atleast_2d(np.asarray(k))[:, 0]
    if branch == "positive":
        lo, hi, sign = max(-mu, -M), M, 1.0
    else:
        lo, hi, sign = -M, min(-mu, M), -1.0
    if hi <= lo:
        return np.zeros(k.shape)
    # (x + mu) exp(-alpha x) integrated against e_k
    body = _cos_moment(lo, hi, k, L, -alpha, 1) + mu * _cos_moment(lo, hi, k, L, -alpha, 0)
    return sign * math.exp(-log_lam - alpha * mu) * body


# --- transform route --------------------------------------------------------

def payoff_vk_tilde(payoff: Payoff, dd, L, k) -> np.ndarray:
    """``vtilde_k = 2^-(d-1) sum_s Re{ vhat(pi/2 s k / L) i^(s.k) }``.

    ``vhat(u) = exp(-i u . mu) what(u + i alpha) / lam``.
    """
    payoff.check_alpha(dd.alpha)
    L = np.broadcast_to(np.asarray(L, dtype=float), (dd.dim,))
    k = np.atleast_2d(np.asarray(k))

    def log_vhat(u):
        val = -dd.log_lam - 1j * (u @ dd.mu) + payoff.log_transform(u + 1j * dd.alpha)
        if np.any(val.real > _LOG_MAX):
            raise TransformOverflow(f"{payoff.kind} transform exceeds the double range")
        return val

    return sign_sum(log_vhat, k, L) / 2 ** (dd.dim - 1)


def payoff_bounds(payoff: Payoff, dd, M) -> PayoffBounds:
    return payoff.bounds(dd, np.broadcast_to(np.asarray(M, dtype=float), (payoff.dim,)))
