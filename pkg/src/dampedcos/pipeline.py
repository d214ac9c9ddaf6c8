"""End-to-end solve: damping, truncation range, number of terms, COS sum."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .damping import as_alpha, build_damped_density
from .engine import ApproxResult, build_plan, approximate_integral
from .models import CharacteristicModel, MarketSpec
from .payoffs import AbsMoment, Payoff
from .tuning import TermSelection, Tolerance, default_alpha, select_n_terms, truncation_range


@dataclass(frozen=True, eq=False)
class Problem:
    model: CharacteristicModel
    payoff: Payoff
    market: MarketSpec | None = None
    alpha: np.ndarray | None = None

    def __post_init__(self):
        if self.payoff.dim != self.model.dim:
            raise ValueError(f"payoff dimension {self.payoff.dim} != model dimension {self.model.dim}")
        if self.market is not None and self.market.dim != self.model.dim:
            raise ValueError("market dimension does not match the model")
        alpha = default_alpha(self.payoff) if self.alpha is None else self.alpha
        object.__setattr__(self, "alpha", as_alpha(alpha, self.model.dim))

    @property
    def dim(self) -> int:
        return self.model.dim


@dataclass
class Solution:
    value: float
    price: float | None
    M: np.ndarray
    L: np.ndarray
    N: np.ndarray
    alpha: np.ndarray
    selection: TermSelection | None = None
    result: ApproxResult | None = None
    timings: dict = field(default_factory=dict)


def _truncation(dd, payoff, tol, iterations=50):
    # sup norms that depend on M (|x| on the box) need a fixed point
    d = dd.dim
    M = np.ones(d)
    for _ in range(iterations):
        new = truncation_range(dd, payoff.bounds(dd, M).sup_norm, tol)
        if np.allclose(new, M, rtol=1e-12, atol=0):
            return new
        M = new
    return M


def solve(problem: Problem, tol: Tolerance | None = None, *, M=None, L=None, N=None,
          threads: int = 1, step: int = 1) -> Solution:
    """Approximate ``int w g`` (and the discounted price when a market is set).

    Unspecified ``M``, ``L`` or ``N`` are chosen from ``tol``: the truncation
    range from the moment bound and ``N`` by the Parseval stopping rule.
    """
    if isinstance(problem.payoff, AbsMoment) and problem.payoff.branch == "both" \
            and np.any(problem.alpha):
        return _solve_abs_split(problem, tol, M=M, L=L, N=N, threads=threads, step=step)
    d = problem.dim
    timings = {}
    t0 = time.perf_counter()
    dd = build_damped_density(problem.model, problem.alpha)
    problem.payoff.check_alpha(dd.alpha)
    if (M is None and L is None) or N is None:
        if tol is None:
            raise ValueError("a tolerance is needed to choose M, L or N")
    if M is None:
        M = np.asarray(L, dtype=float) if L is not None else _truncation(dd, problem.payoff, tol)
    M = np.broadcast_to(np.asarray(M, dtype=float), (d,)).copy()
    if L is None:
        L = M * (tol.l_over_m if tol is not None else 1.0)
    L = np.broadcast_to(np.asarray(L, dtype=float), (d,)).copy()
    timings["truncation"] = time.perf_counter() - t0
    selection = None
    if N is None:
        t1 = time.perf_counter()
        bounds = problem.payoff.bounds(dd, M)
        selection = select_n_terms(dd, L, tol, bounds.l2_norm_sq, step=step)
        N = selection.n
        timings["select_n"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    plan = build_plan(dd, M, L, N, threads=threads)
    result = approximate_integral(plan, problem.payoff.coefficient_provider(dd, M, L), threads)
    timings["cos"] = time.perf_counter() - t2
    timings["total"] = time.perf_counter() - t0
    value = result.value
    price = None if problem.market is None else problem.market.discount * value
    if selection is not None:
        result.diagnostics.update(parseval_gap=selection.gap, threshold=selection.threshold,
                                  plateau=selection.plateau)
    return Solution(value, price, M, L, plan.N, dd.alpha, selection, result, timings)


def _solve_abs_split(problem, tol, **kw):
    # |x| = max(x, 0) + max(-x, 0), damped with +|alpha| and -|alpha|
    a = abs(float(problem.alpha[0]))
    half = None if tol is None else Tolerance(tol.epsilon / 2, tol.moment_order, tol.n_max,
                                               tol.l_over_m)
    parts = []
    for branch, sign in (("positive", 1.0), ("negative", -1.0)):
        sub = Problem(problem.model, AbsMoment(branch), problem.market, [sign * a])
        parts.append(solve(sub, half, **kw))
    value = math.fsum(p.value for p in parts)
    price = None if problem.market is None else problem.market.discount * value
    timings = {"total": sum(p.timings["total"] for p in parts)}
    first = parts[0]
    return Solution(value, price, np.maximum(first.M, parts[1].M), np.maximum(first.L, parts[1].L),
                    np.maximum(first.N, parts[1].N), problem.alpha, None, None, timings)
