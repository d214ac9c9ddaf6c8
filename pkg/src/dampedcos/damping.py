"""Centred damped densities built from a characteristic model.

For a damping factor ``alpha`` the damped density is
``f(x) = lam * exp(alpha . (x + mu)) * g(x + mu)`` with ``lam`` and ``mu``
chosen so that ``f`` is a probability density with vanishing first moments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameters, StripViolation
from .models import CharacteristicModel


def as_alpha(alpha, dim: int) -> np.ndarray:
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (dim,)).copy()
    if not np.all(np.isfinite(alpha)):
        raise InvalidParameters("damping factor must be finite")
    return alpha


@dataclass(frozen=True, eq=False)
class DampedDensity:
    model: CharacteristicModel
    alpha: np.ndarray
    log_lam: float
    mu: np.ndarray

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def lam(self) -> float:
        return math.exp(self.log_lam)

    @property
    def classical(self) -> bool:
        return not np.any(self.alpha)

    @property
    def real_cf(self) -> bool:
        """Model-declared: ``fhat`` is real, so odd-index coefficients vanish."""
        damped = self.model.damped_model(self.alpha)
        return damped is not None and damped.real_cf()

    def log_eval(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        z = u - 1j * self.alpha
        return self.log_lam - 1j * (u @ self.mu) + self.model.log_cf(z)

    def eval(self, u) -> np.ndarray:
        """``fhat(u) = lam * exp(-i u . mu) * ghat(u - i alpha)``."""
        return np.exp(self.log_eval(u))


_FD_STEP = np.finfo(float).eps ** 0.2


def _numeric_mu(model, alpha, log_lam):
    # mu_h = -i lam d/du_h ghat(u - i alpha) at u = 0, 4th-order central differences
    d = model.dim
    mu = np.empty(d)
    for h in range(d):
        e = np.zeros(d)
        e[h] = _FD_STEP
        vals = [model.cf(k * e - 1j * alpha) for k in (-2, -1, 1, 2)]
        deriv = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * _FD_STEP)
        mu[h] = (-1j * math.exp(log_lam) * deriv).real
    return mu


def build_damped_density(model: CharacteristicModel, alpha) -> DampedDensity:
    """Damped density with ``lam = 1 / ghat(-i alpha)`` and centring shift ``mu``."""
    alpha = as_alpha(alpha, model.dim)
    if not model.admissible(alpha):
        raise StripViolation(f"ghat(-i alpha) does not exist for alpha = {alpha}")
    closed = model.damping_params(alpha)
    if closed is not None:
        log_lam, mu = closed
    else:
        log_g = complex(model.log_cf(-1j * alpha))
        if not np.isfinite(log_g.real):
            raise StripViolation(f"ghat(-i alpha) is not finite for alpha = {alpha}")
        log_lam = -log_g.real
        mu = _numeric_mu(model, alpha, log_lam)
    return DampedDensity(model, alpha, float(log_lam), np.asarray(mu, dtype=float))


def eval_damped_cf(dd: DampedDensity, u) -> complex | np.ndarray:
    return dd.eval(u)
