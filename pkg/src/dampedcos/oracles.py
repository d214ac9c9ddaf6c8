"""Independent reference values: Monte Carlo, closed forms, high-resolution COS."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import CorrelatedNotSupported, InvalidParameters
from .models import NormalModel

Z_995 = float(stats.norm.ppf(0.995))
MC_BLOCK = 1 << 16


@dataclass(frozen=True)
class McResult:
    estimate: float
    half_width_99: float
    n_paths: int
    seed: int
    variance: float = 0.0


def _block_sums(model, payoff, seq, size):
    # Philox is counter based; each block owns a spawned SeedSequence
    rng = np.random.Generator(np.random.Philox(seq))
    vals = payoff.evaluate(model.sample(rng, size))
    return math.fsum(vals.tolist()), math.fsum((vals * vals).tolist())


def mc_estimate(model, payoff, market=None, n_paths: int = 10 ** 6, seed: int = 0,
                threads: int = 1, block: int = MC_BLOCK) -> McResult:
    """Sample mean of the (discounted) payoff with a 99% CLT half-width.

    Paths are cut into fixed blocks, each with its own RNG stream spawned
    from ``seed``, and reduced in block order, so the estimate does not
    depend on ``threads``.
    """
    if n_paths < 10 ** 4:
        raise InvalidParameters("need at least 1e4 paths")
    n_blocks = -(-n_paths // block)
    seqs = np.random.SeedSequence(seed).spawn(n_blocks)
    sizes = [min(block, n_paths - i * block) for i in range(n_blocks)]
    jobs = list(zip(seqs, sizes))
    fn = lambda job: _block_sums(model, payoff, *job)  # noqa: E731
    if threads <= 1:
        sums = [fn(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sums = list(pool.map(fn, jobs))
    s1 = math.fsum(s for s, _ in sums)
    s2 = math.fsum(q for _, q in sums)
    mean = s1 / n_paths
    var = max(s2 / n_paths - mean * mean, 0.0) * n_paths / (n_paths - 1)
    disc = 1.0 if market is None else market.discount
    half = Z_995 * disc * math.sqrt(var / n_paths)
    return McResult(disc * mean, half, n_paths, seed, disc * disc * var)


def required_paths(target_epsilon: float, variance_estimate: float) -> int:
    """``U = ceil((z_0.995 sd / eps)^2)``."""
    if not target_epsilon > 0 or variance_estimate < 0:
        raise InvalidParameters("need eps > 0 and a non-negative variance")
    return math.ceil((Z_995 * math.sqrt(variance_estimate) / target_epsilon) ** 2)


def std_normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_cdf_closed_form(model: NormalModel, y) -> float:
    """``P(X <= y)`` for a normal model with diagonal covariance."""
    cov = model.cov
    if np.any(cov[~np.eye(model.dim, dtype=bool)] != 0):
        raise CorrelatedNotSupported("closed form needs a diagonal covariance")
    y = np.broadcast_to(np.asarray(y, dtype=float), (model.dim,))
    sd = np.sqrt(np.diag(cov))
    return math.prod(std_normal_cdf(float(v)) for v in (y - model.eta) / sd)


def vg_density_1d(x, a, s, theta, sigma, eta=0.0):
    """Density of ``eta + theta G + sigma sqrt(G) Z`` with ``G ~ Gamma(a, s)``.

    ``2 e^(theta x / sigma^2) (|x| / beta)^(a - 1/2) K_(a - 1/2)(|x| beta / sigma^2)
    / (s^a sqrt(2 pi) sigma Gamma(a))`` with ``beta = sqrt(theta^2 + 2 sigma^2 / s)``.
    """
    x = np.asarray(x, dtype=float) - eta
    s2 = sigma * sigma
    beta = math.sqrt(theta * theta + 2 * s2 / s)
    order = a - 0.5
    ax = np.maximum(np.abs(x), 1e-300)
    arg = ax * beta / s2
    log_c = (0.5 * math.log(2 / math.pi) - a * math.log(s) - special.gammaln(a)
             - math.log(sigma))
    # kve(v, z) = K_v(z) e^z
    return (np.exp(log_c + theta * x / s2 + order * np.log(ax / beta) - arg)
            * special.kve(order, arg))


def vg_density_at_zero(a, s, sigma) -> float:
    """Symmetric centred VG density at 0, defined for ``a > 1/2`` (d = 1)."""
    if a <= 0.5:
        return math.inf
    return math.exp(special.gammaln(a - 0.5) - special.gammaln(a)
                    - 0.5 * math.log(2 * math.pi * s) - math.log(sigma))


def high_res_cos_oracle(problem, n_per_axis: int | None = None, epsilon: float = 1e-9,
                        threads: int = 1) -> float:
    """The engine itself at oracle resolution (``N`` large, truncation for eps = 1e-9)."""
    from .pipeline import solve
    from .tuning import Tolerance

    d = problem.dim
    if n_per_axis is None:
        n_per_axis = 2000 if d <= 2 else 300
    sol = solve(problem, Tolerance(epsilon), N=n_per_axis, threads=threads)
    return sol.value
