"""Complex log-Gamma via the Lanczos approximation.

Values are returned modulo ``2*pi*i``: callers only ever exponentiate the
result (possibly after adding other logarithms), so the branch of the
imaginary part is irrelevant.
"""
from __future__ import annotations

import numpy as np

# Godfrey's coefficient set, g = 607/128, 15 terms.
_G = 607.0 / 128.0
_COEF = np.array([
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
])
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG_PI = np.log(np.pi)


def _lanczos(z: np.ndarray) -> np.ndarray:
    # log Gamma(z) for Re z >= 1/2
    zm1 = z - 1.0
    acc = np.full_like(zm1, _COEF[0])
    for k in range(1, _COEF.size):
        acc = acc + _COEF[k] / (zm1 + k)
    t = zm1 + _G + 0.5
    return _HALF_LOG_2PI + (zm1 + 0.5) * np.log(t) - t + np.log(acc)


def log_sin_pi(z: np.ndarray) -> np.ndarray:
    """``log(sin(pi*z))`` without overflow for large ``|Im z|``."""
    z = np.asarray(z, dtype=complex)
    # z = n + r exactly, sin(pi z) = (-1)^n sin(pi r); keeps accuracy near the zeros
    n = np.round(z.real)
    r = (z.real - n) + 1j * z.imag
    flip = r.imag < 0
    w = np.where(flip, np.conj(r), r)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        direct = np.log(np.sin(np.pi * w))
        # sin(pi w) = (i/2) exp(-i pi w) (1 - exp(2 i pi w)), |exp(2 i pi w)| <= 1
        far = np.log(0.5j) - 1j * np.pi * w + np.log1p(-np.exp(2j * np.pi * w))
    out = np.where(w.imag < 1.0, direct, far)
    out = np.where(flip, np.conj(out), out)
    return out + 1j * np.pi * n


def loggamma(z) -> np.ndarray | complex:
    """Complex ``log Gamma(z)`` (mod ``2*pi*i``), vectorised over ``z``.

    Uses the reflection formula for ``Re z < 1/2``.  Poles (non-positive
    integers) give ``inf``/``nan`` like the real Gamma function.
    """
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    out = np.empty_like(z_arr)
    right = z_arr.real >= 0.5
    if right.any():
        out[right] = _lanczos(z_arr[right])
    left = ~right
    if left.any():
        zl = z_arr[left]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[left] = _LOG_PI - log_sin_pi(zl) - _lanczos(1.0 - zl)
    return out[0] if scalar else out
