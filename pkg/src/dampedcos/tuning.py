"""Error-tolerance driven choice of the truncation range and number of terms."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .engine import coefficients_block, primed_weights
from .errors import (DecayTooSlow, NotConverged, PlateauDetected,
                     SmoothnessExceeded)
from .models import DecayExponent, NormalModel, axis_moment, cf_l2_norm
from .payoffs import AbsMoment, BasketPut, CDF, DigitalPut, Payoff, VanillaPut


@dataclass(frozen=True)
class Tolerance:
    epsilon: float
    moment_order: int = 8
    n_max: int = 2000
    l_over_m: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.moment_order < 2 or self.moment_order % 2:
            raise ValueError("moment order must be even and >= 2")
        if self.l_over_m < 1:
            raise ValueError("L/M must be >= 1")


@dataclass(frozen=True)
class ConvergenceStudy:
    beta: float = 0.5
    gamma: float = 0.5
    n_grid: tuple = (32, 64, 128, 256, 512)

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def box(self, n: int) -> float:
        return self.gamma * n ** self.beta


def truncation_range(dd, sup_norm: float, tol: Tolerance) -> np.ndarray:
    """``M_h = (3 d ||v||_inf m_h(n) / eps)^(1/n)`` for every axis."""
    n = tol.moment_order
    d = dd.dim
    moments = np.array([axis_moment(dd, h, n) for h in range(d)])
    return (3 * d * sup_norm * moments / tol.epsilon) ** (1.0 / n)


@dataclass
class TermSelection:
    n: int
    gap: float
    threshold: float
    target: float
    plateau: bool = False
    history: list | None = None


def _shell(n_prev: int, n: int, d: int) -> np.ndarray:
    """Multi-indices in ``[0, n]^d`` with some component in ``(n_prev, n]``."""
    parts = []
    for j in range(d):
        ranges = ([np.arange(n_prev + 1)] * j + [np.arange(n_prev + 1, n + 1)]
                  + [np.arange(n + 1)] * (d - j - 1))
        grids = np.meshgrid(*ranges, indexing="ij")
        parts.append(np.stack([g.reshape(-1) for g in grids], axis=-1))
    return np.concatenate(parts)


def select_n_terms(dd, L, tol: Tolerance, l2_norm_sq: float, step: int = 1,
                   target: float | None = None, plateau_window: int = 3) -> TermSelection:
    """Smallest diagonal ``N = (n, ..., n)`` meeting the Parseval stopping rule

    ``|(2 pi)^-d int |fhat|^2 - prod(L) sum'_{k <= N} |c_k|^2| <= eps^2 / (162 ||v 1_M||_2^2)``.

    Coefficients are accumulated shell by shell.  If the gap fails to shrink
    by 0.1% over ``plateau_window`` consecutive shells a :class:`PlateauDetected`
    warning is emitted and the best ``n`` seen so far is returned.
    """
    d = dd.dim
    L = np.broadcast_to(np.asarray(L, dtype=float), (d,))
    if target is None:
        target = cf_l2_norm(dd)
    threshold = tol.epsilon ** 2 / (162.0 * l2_norm_sq)
    real = dd.real_cf
    vol = float(np.prod(L))
    total, comp = 0.0, 0.0
    history = []
    best = (math.inf, 0)
    n_prev = -1
    n = 0
    while n <= tol.n_max:
        k = np.zeros((1, d), dtype=np.int64) if n_prev < 0 else _shell(n_prev, n, d)
        c = coefficients_block(dd, L, k, real=real)
        shell_sum = vol * math.fsum((primed_weights(k) * c * c).tolist())
        # Neumaier compensated running sum
        t = total + shell_sum
        comp += (total - t) + shell_sum if abs(total) >= abs(shell_sum) else (shell_sum - t) + total
        total = t
        gap = abs(target - (total + comp))
        history.append((n, gap))
        if gap < best[0]:
            best = (gap, n)
        if gap <= threshold:
            return TermSelection(n, gap, threshold, target, history=history)
        if len(history) > plateau_window:
            old = history[-1 - plateau_window][1]
            if gap > (1 - 1e-3) * old:
                warnings.warn(PlateauDetected(
                    f"Parseval gap stalled at {best[0]:.3e} (n = {best[1]}) above the "
                    f"threshold {threshold:.3e}"), stacklevel=2)
                return TermSelection(best[1], best[0], threshold, target, plateau=True,
                                     history=history)
        n_prev = n
        n += step
    raise NotConverged(f"stopping rule not met up to n_max = {tol.n_max} "
                       f"(best gap {best[0]:.3e}, threshold {threshold:.3e})")


def derivative_bound(dd, s: int) -> float:
    """``(1/2 pi) int |u|^(s+1) |fhat(u)| du``, bounding ``||f^(s+1)||_inf`` (d = 1)."""
    damped = dd.model.damped_model(dd.alpha)
    if isinstance(damped, NormalModel):
        var = float(damped.cov[0, 0])
        log_val = (0.5 * (s + 2) * math.log(2.0 / var) + gammaln(0.5 * (s + 2))
                   - math.log(2 * math.pi))
        return math.exp(log_val)
    return _derivative_bound_numeric(dd, s)


def _derivative_bound_numeric(dd, s, rel_tail=1e-3):
    decay = dd.model.decay()
    if not decay.exponential and decay.p <= s + 2:
        raise SmoothnessExceeded(f"int |u|^{s + 1} |fhat| diverges for p = {decay.p}")
    scale = 1.0 / math.sqrt(axis_moment(dd, 0, 2))

    def integrand(u):
        return u ** (s + 1) * abs(complex(dd.eval(np.array([u]))))

    total = 0.0
    lo, hi = 0.0, 8.0 * scale
    while True:
        # geometric panels keep the adaptive rule accurate on long ranges
        edges = np.concatenate([[lo], np.geomspace(max(lo, scale / 8), hi, 16)])
        for a, b in zip(edges[:-1], edges[1:]):
            if b > a:
                total += integrate.quad(integrand, a, b, limit=200, epsrel=1e-10)[0]
        if decay.exponential:
            tail = hi * integrand(hi)
        else:
            tail = hi * integrand(hi) / (decay.p - s - 2)
        if tail <= rel_tail * total:
            return (2.0 * (total + tail)) / (2 * math.pi)
        lo, hi = hi, 2.0 * hi


def select_n_smoothness_1d(dd, L: float, tol: Tolerance, sup_norm: float, s: int) -> int:
    """Number of terms from the smoothness bound of the one-dimensional COS method."""
    if dd.dim != 1:
        raise ValueError("the smoothness bound is one-dimensional")
    if s < 1:
        raise ValueError("s must be >= 1")
    J = dd.model.smoothness_limit()
    if s > J:
        raise SmoothnessExceeded(f"s = {s} exceeds the smoothness limit J = {J}")
    L = float(np.ravel(L)[0])
    bound = derivative_bound(dd, s)
    log_rhs = ((s + 2.5) * math.log(2) + math.log(bound) + (s + 2) * math.log(L)
               - math.log(s) - (s + 1) * math.log(math.pi)
               + math.log(12 * sup_norm / tol.epsilon))
    return math.ceil(math.exp(log_rhs / s))


def convergence_slope_bound(p: DecayExponent | float, d: int, beta: float, damped: bool) -> float:
    """Exponent of ``n`` in the order-of-convergence bound with ``M = L = gamma n^beta``."""
    p = p.p if isinstance(p, DecayExponent) else float(p)
    if p <= d / 2:
        raise DecayTooSlow(f"p = {p} <= d/2")
    if damped:
        return -(1 - beta) * (p - d / 2)
    return -(1 - beta) * p + d / 2


def default_alpha(payoff: Payoff) -> np.ndarray:
    d = payoff.dim
    if isinstance(payoff, BasketPut):
        return np.full(d, -4.0)
    if isinstance(payoff, DigitalPut):
        return np.full(d, -7.0)
    if isinstance(payoff, (CDF, VanillaPut, AbsMoment)):
        return np.zeros(d)
    return np.zeros(d)
