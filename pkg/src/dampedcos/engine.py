"""COS core: multi-index grids, cosine coefficients and the primed sum.

Multi-indices are handled in lexicographic blocks of shape ``(m, d)`` so
that tensors with millions of entries never need a dense index array.
Every reduction goes through :func:`math.fsum`, which is exactly rounded,
so the result does not depend on block size or thread count.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import AllocationTooLarge

BLOCK_SIZE = 1 << 15
MAX_ENTRIES = 1 << 31
# i**m for m = 0..3, exact
_I_POW = np.array([1, 1j, -1, -1j])

Provider = Callable[[np.ndarray], np.ndarray]


def sign_vectors(d: int) -> np.ndarray:
    """The ``2**(d-1)`` vectors ``(1, +-1, ..., +-1)``, remaining signs from a bit counter."""
    rows = []
    for bits in range(2 ** (d - 1)):
        rows.append([1] + [-1 if bits >> (d - 2 - j) & 1 else 1 for j in range(d - 1)])
    return np.array(rows, dtype=np.int64).reshape(-1, d)


def n_zero(k: np.ndarray) -> np.ndarray:
    """Number of zero components of each multi-index."""
    return np.count_nonzero(np.asarray(k) == 0, axis=-1)


def primed_weights(k: np.ndarray) -> np.ndarray:
    return np.ldexp(1.0, -n_zero(k))


def grid_shape(N) -> tuple[int, ...]:
    return tuple(int(n) + 1 for n in np.atleast_1d(N))


def index_blocks(N, block_size: int = BLOCK_SIZE) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(offset, k)`` with ``k`` the multi-indices ``offset ... offset+m-1``
    of the grid ``0 <= k <= N`` in lexicographic (C) order."""
    shape = grid_shape(N)
    total = math.prod(shape)
    for start in range(0, total, block_size):
        flat = np.arange(start, min(start + block_size, total))
        yield start, np.stack(np.unravel_index(flat, shape), axis=-1)


def basis_eval(k, L, x) -> np.ndarray:
    """``e_k(x) = prod_h cos(k_h pi (x_h + L_h) / (2 L_h))``."""
    k = np.asarray(k, dtype=float)
    L = np.asarray(L, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.prod(np.cos(k * np.pi * (x + L) / (2 * L)), axis=-1)


def sign_sum(log_fn: Callable[[np.ndarray], np.ndarray], k: np.ndarray, L: np.ndarray) -> np.ndarray:
    """``sum_s Re{ exp(log_fn(pi/2 * s*k/L)) * i**(s.k) }`` over the sign vectors."""
    k = np.asarray(k, dtype=np.int64)
    d = k.shape[-1]
    out = np.zeros(k.shape[:-1])
    for s in sign_vectors(d):
        sk = k * s
        u = (0.5 * np.pi) * sk / L
        phase = _I_POW[np.sum(sk, axis=-1) % 4]
        out += (np.exp(log_fn(u)) * phase).real
    return out


def coefficients_block(dd, L, k: np.ndarray, real: bool = False) -> np.ndarray:
    """Cosine coefficients ``c_k`` of the damped density for a block of indices.

    With ``real=True`` entries with odd index sum are set to zero without
    evaluating ``fhat``.
    """
    L = np.asarray(L, dtype=float)
    k = np.atleast_2d(k)
    d = k.shape[-1]
    scale = 1.0 / (2 ** (d - 1) * np.prod(L))
    if not real:
        return scale * sign_sum(dd.log_eval, k, L)
    out = np.zeros(k.shape[0])
    even = np.sum(k, axis=-1) % 2 == 0
    if even.any():
        out[even] = scale * sign_sum(dd.log_eval, k[even], L)
    return out


def coefficient(dd, L, k) -> float:
    k = np.asarray(k, dtype=np.int64).reshape(1, -1)
    return float(coefficients_block(dd, L, k)[0])


def _check_size(N, cap):
    n = math.prod(grid_shape(N))
    if n > cap:
        raise AllocationTooLarge(f"grid of {n} coefficients exceeds the cap of {cap}")
    return n


def _map_blocks(fn, N, threads: int):
    blocks = index_blocks(N)
    if threads <= 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def coefficient_tensor(dd, L, N, real: bool | None = None, threads: int = 1,
                       cap: int = MAX_ENTRIES) -> np.ndarray:
    """Dense tensor of ``c_k`` for ``0 <= k <= N`` (shape ``N + 1``)."""
    N = np.broadcast_to(np.asarray(N, dtype=np.int64), (dd.dim,))
    if np.any(N < 0):
        raise ValueError("N must be non-negative")
    _check_size(N, cap)
    if real is None:
        real = dd.real_cf
    L = np.broadcast_to(np.asarray(L, dtype=float), (dd.dim,))
    parts = _map_blocks(lambda blk: coefficients_block(dd, L, blk[1], real), N, threads)
    return np.concatenate(parts).reshape(grid_shape(N))


@dataclass(frozen=True, eq=False)
class CosPlan:
    M: np.ndarray
    L: np.ndarray
    N: np.ndarray
    coefficients: np.ndarray
    real: bool = False

    def __post_init__(self):
        if np.any(self.M <= 0) or np.any(self.L < self.M):
            raise ValueError("need L >= M > 0 componentwise")
        if self.coefficients.shape != grid_shape(self.N):
            raise ValueError("coefficient tensor shape does not match N")

    @property
    def dim(self) -> int:
        return self.N.size


def build_plan(dd, M, L, N, threads: int = 1, real: bool | None = None) -> CosPlan:
    d = dd.dim
    M = np.broadcast_to(np.asarray(M, dtype=float), (d,)).copy()
    L = np.broadcast_to(np.asarray(L, dtype=float), (d,)).copy()
    N = np.broadcast_to(np.asarray(N, dtype=np.int64), (d,)).copy()
    if real is None:
        real = dd.real_cf
    coeffs = coefficient_tensor(dd, L, N, real=real, threads=threads)
    return CosPlan(M, L, N, coeffs, real)


@dataclass
class ApproxResult:
    value: float
    n_terms_used: np.ndarray
    wall_time: float
    diagnostics: dict = field(default_factory=dict)


def parseval_sum(plan: CosPlan) -> float:
    """``prod(L) * sum' |c_k|^2`` over the plan's grid."""
    parts = []
    for start, k in index_blocks(plan.N):
        c = plan.coefficients.reshape(-1)[start:start + k.shape[0]]
        parts.append(primed_weights(k) * c * c)
    return float(np.prod(plan.L)) * math.fsum(np.concatenate(parts).tolist())


def approximate_integral(plan: CosPlan, provider: Provider, threads: int = 1) -> ApproxResult:
    """``sum'_{0 <= k <= N} c_k * provider(k)`` with exactly rounded summation."""
    t0 = time.perf_counter()
    flat = plan.coefficients.reshape(-1)

    def term(blk):
        start, k = blk
        c = flat[start:start + k.shape[0]]
        return primed_weights(k) * c * np.asarray(provider(k), dtype=float)

    with np.errstate(invalid="ignore", over="ignore"):
        terms = np.concatenate(_map_blocks(term, plan.N, threads))
    if not np.all(np.isfinite(terms)):
        raise FloatingPointError("COS sum has non-finite terms")
    value = math.fsum(terms.tolist())
    elapsed = time.perf_counter() - t0
    return ApproxResult(value, plan.N.copy(), elapsed)


def price_option(market, result: ApproxResult) -> float:
    """Discount the raw integral by ``exp(-r T)``."""
    return market.discount * result.value
