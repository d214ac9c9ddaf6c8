"""``cosctl``: run pricing, CDF, moment, tuning, convergence and MC-comparison jobs.

Configs are flat ``key = value`` files with dotted section prefixes::

    model.family = vg-market        # normal | variance-gamma | black-scholes | vg-market
    market.spot = 50, 50
    payoff.kind = basket-put        # cdf | digital-put | basket-put | vanilla-put | abs-moment
    payoff.strike = 100
    damping.alpha = -4
    tolerance.epsilon = 1e-2

Scalars are broadcast to the problem dimension, which is the longest
vector among the problem keys (or ``problem.dim``).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CosError, PlateauDetected
from .models import (MarketSpec, NormalModel, VarianceGammaModel, bs_log_return_model,
                     vg_log_return_model)
from .oracles import mc_estimate, normal_cdf_closed_form, required_paths
from .payoffs import CDF, AbsMoment, BasketPut, DigitalPut, VanillaPut
from .pipeline import Problem, solve
from .tuning import (ConvergenceStudy, Tolerance, convergence_slope_bound,
                     select_n_smoothness_1d)
from .damping import build_damped_density

COMMANDS = ("price", "cdf", "moment", "tune", "convergence", "compare-mc")
CONVERGENCE_HEADER = ["n", "value", "abs_error", "slope_bound", "fitted_slope"]
COMPARE_HEADER = ["d", "N", "L", "U", "cos_time", "mc_time", "value"]
SWEEP_HEADER = ["alpha", "value", "reference", "abs_error"]
PRICE_HEADER = ["value", "price", "n", "M", "L", "alpha"]

_PROBLEM_VECTORS = ("market.spot", "model.eta", "model.theta", "model.sigma", "payoff.y",
                    "damping.alpha")
_PAYOFF_FOR = {"cdf": {"cdf"}, "moment": {"abs-moment"},
               "price": {"digital-put", "basket-put", "vanilla-put"}}


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    """17 significant digits, round-trip exact for doubles."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass
class JobConfig:
    values: dict

    @classmethod
    def from_text(cls, text: str) -> "JobConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string("[job]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        return cls(dict(parser["job"]))

    @classmethod
    def load(cls, path: str) -> "JobConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None

    def has(self, key):
        return key in self.values

    def str(self, key, default=None):
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing key {key!r}")
            return default
        return self.values[key].strip()

    def floats(self, key, default=None) -> np.ndarray:
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing key {key!r}")
            return np.atleast_1d(np.asarray(default, dtype=float))
        try:
            return np.array([float(v) for v in self.values[key].split(",") if v.strip()])
        except ValueError:
            raise ConfigError(f"{key!r} must be a comma-separated list of numbers") from None

    def float(self, key, default=None) -> float:
        vals = self.floats(key, default)
        if vals.size != 1:
            raise ConfigError(f"{key!r} must be a single number")
        return float(vals[0])

    def ints(self, key, default=None) -> list[int]:
        vals = self.floats(key, default)
        if np.any(vals != np.round(vals)):
            raise ConfigError(f"{key!r} must be integers")
        return [int(v) for v in vals]

    def dim(self) -> int:
        if self.has("problem.dim"):
            return self.ints("problem.dim")[0]
        sizes = [self.floats(k).size for k in _PROBLEM_VECTORS if self.has(k)]
        if self.has("model.cov"):
            sizes.append(math.isqrt(self.floats("model.cov").size))
        return max(sizes, default=1)


def _vec(cfg, key, d, default=None):
    v = cfg.floats(key, default)
    if v.size == 1:
        return np.full(d, v[0])
    if v.size != d:
        raise ConfigError(f"{key!r} has {v.size} entries, expected 1 or {d}")
    return v


def _matrix(cfg, key, d):
    v = cfg.floats(key)
    if v.size == 1:
        return v[0] * np.eye(d)
    if v.size == d:
        return np.diag(v)
    if v.size == d * d:
        return v.reshape(d, d)
    raise ConfigError(f"{key!r} must have 1, {d} or {d * d} entries")


def build_market(cfg, d):
    if not cfg.has("market.spot"):
        return None
    return MarketSpec(_vec(cfg, "market.spot", d), cfg.float("market.rate", 0.0),
                      cfg.float("market.maturity", 1.0))


def build_model(cfg, d, market):
    family = cfg.str("model.family")
    if family == "normal":
        return NormalModel(_vec(cfg, "model.eta", d, 0.0), _matrix(cfg, "model.cov", d))
    if family == "variance-gamma":
        if cfg.has("model.nu"):
            nu = cfg.float("model.nu")
            a, s = cfg.float("model.t", 1.0) / nu, nu
        else:
            a, s = cfg.float("model.a"), cfg.float("model.s")
        return VarianceGammaModel(a, s, _vec(cfg, "model.eta", d, 0.0),
                                  _vec(cfg, "model.theta", d, 0.0), _vec(cfg, "model.sigma", d))
    if market is None:
        raise ConfigError(f"model family {family!r} needs a market section")
    if family == "black-scholes":
        if cfg.has("model.cov"):
            cov = _matrix(cfg, "model.cov", d)
        else:
            vol = _vec(cfg, "model.sigma", d)
            rho = cfg.float("model.corr", 0.0)
            corr = np.full((d, d), rho) + (1 - rho) * np.eye(d)
            cov = corr * np.outer(vol, vol)
        return bs_log_return_model(market, cov)
    if family == "vg-market":
        return vg_log_return_model(market, cfg.float("model.nu"), _vec(cfg, "model.theta", d),
                                   _vec(cfg, "model.sigma", d))
    raise ConfigError(f"unknown model family {family!r}")


def build_payoff(cfg, d):
    kind = cfg.str("payoff.kind")
    if kind == "cdf":
        return CDF(_vec(cfg, "payoff.y", d))
    if kind == "digital-put":
        return DigitalPut(_vec(cfg, "payoff.strike", d))
    if kind == "basket-put":
        return BasketPut(cfg.float("payoff.strike"), d)
    if kind == "vanilla-put":
        return VanillaPut(cfg.float("payoff.strike"))
    if kind == "abs-moment":
        return AbsMoment(cfg.str("payoff.branch", "both"))
    raise ConfigError(f"unknown payoff kind {kind!r}")


def build_problem(cfg, d=None, alpha=None) -> Problem:
    d = cfg.dim() if d is None else d
    market = build_market(cfg, d)
    model = build_model(cfg, d, market)
    payoff = build_payoff(cfg, d)
    if alpha is None and cfg.has("damping.alpha"):
        alpha = _vec(cfg, "damping.alpha", d)
    return Problem(model, payoff, market, alpha)


def build_tolerance(cfg):
    if not cfg.has("tolerance.epsilon"):
        return None
    return Tolerance(cfg.float("tolerance.epsilon"), cfg.ints("tolerance.moment_order", 8)[0],
                     cfg.ints("tolerance.n_max", 2000)[0], cfg.float("tolerance.l_over_m", 1.0))


def _fixed(cfg):
    out = {}
    for key in ("M", "L"):
        if cfg.has(f"cos.{key}"):
            out[key] = cfg.floats(f"cos.{key}")
    if cfg.has("cos.N"):
        out["N"] = cfg.ints("cos.N")
    return out


def _fmt_vec(v):
    v = np.atleast_1d(v)
    return fmt(v[0]) if v.size == 1 else "(" + ", ".join(fmt(x) for x in v) + ")"


def _write_csv(path, header, rows, stream):
    if path is None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    # write to a sibling temp file and rename, so failures leave no partial CSV
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _closed_form_reference(problem):
    model, payoff = problem.model, problem.payoff
    if not isinstance(model, NormalModel):
        return None
    try:
        if isinstance(payoff, CDF):
            return normal_cdf_closed_form(model, payoff.y)
        if isinstance(payoff, DigitalPut):
            disc = 1.0 if problem.market is None else problem.market.discount
            return disc * normal_cdf_closed_form(model, np.log(payoff.strike))
    except CosError:
        return None
    return None


def _reference(cfg, problem):
    if cfg.has("reference.value"):
        return cfg.float("reference.value")
    return _closed_form_reference(problem)


def run_value(cfg, args, out):
    if cfg.has("damping.sweep"):
        return run_sweep(cfg, args, out)
    problem = build_problem(cfg)
    allowed = _PAYOFF_FOR[args.command]
    kind = cfg.str("payoff.kind")
    if kind not in allowed:
        raise ConfigError(f"command {args.command!r} does not accept payoff kind {kind!r}")
    sol = solve(problem, build_tolerance(cfg), threads=args.threads, **_fixed(cfg))
    lines = [f"value = {fmt(sol.value)}"]
    if sol.price is not None:
        lines.append(f"price = {fmt(sol.price)}")
    ref = _reference(cfg, problem)
    if ref is not None:
        shown = sol.price if sol.price is not None else sol.value
        lines.append(f"reference = {fmt(ref)}")
        lines.append(f"abs_error = {fmt(abs(shown - ref))}")
    lines += [f"alpha = {_fmt_vec(sol.alpha)}", f"M = {_fmt_vec(sol.M)}", f"L = {_fmt_vec(sol.L)}",
              f"N = {int(sol.N[0])}"]
    if sol.selection is not None:
        lines += [f"parseval_gap = {fmt(sol.selection.gap)}",
                  f"threshold = {fmt(sol.selection.threshold)}",
                  f"plateau = {sol.selection.plateau}"]
    lines.append(f"time_total = {sol.timings['total']:.6f}")
    print("\n".join(lines), file=out)
    if args.out:
        row = [fmt(sol.value), "" if sol.price is None else fmt(sol.price), int(sol.N[0]),
               _fmt_vec(sol.M), _fmt_vec(sol.L), _fmt_vec(sol.alpha)]
        _write_csv(args.out, PRICE_HEADER, [row], out)
    return 0


def run_sweep(cfg, args, out):
    """One solve per damping value ``alpha = (a, ..., a)``."""
    d = cfg.dim()
    tol = build_tolerance(cfg)
    rows = []
    for a in cfg.floats("damping.sweep"):
        problem = build_problem(cfg, d, alpha=np.full(d, a))
        sol = solve(problem, tol, threads=args.threads, **_fixed(cfg))
        value = sol.price if sol.price is not None else sol.value
        ref = _reference(cfg, problem)
        rows.append([fmt(a), fmt(value), "" if ref is None else fmt(ref),
                     "" if ref is None else fmt(abs(value - ref))])
    _write_csv(args.out, SWEEP_HEADER, rows, out)
    return 0


def run_tune(cfg, args, out):
    problem = build_problem(cfg)
    tol = build_tolerance(cfg)
    if tol is None:
        raise ConfigError("tune needs tolerance.epsilon")
    fixed = _fixed(cfg)
    fixed.pop("N", None)
    sol = solve(problem, tol, threads=args.threads, **fixed)
    lines = [f"alpha = {_fmt_vec(sol.alpha)}", f"M = {_fmt_vec(sol.M)}",
             f"L = {_fmt_vec(sol.L)}", f"N = {int(sol.N[0])}"]
    if cfg.has("tune.smoothness_s"):
        dd = build_damped_density(problem.model, problem.alpha)
        raw = cfg.str("tune.smoothness_s")
        s = problem.model.smoothness_limit() if raw == "J" else int(raw)
        bound = problem.payoff.bounds(dd, sol.M)
        n_s = select_n_smoothness_1d(dd, sol.L, tol, bound.sup_norm, int(s))
        lines.append(f"N_smoothness = {n_s} (s = {int(s)})")
    print("\n".join(lines), file=out)
    return 0


def fitted_slope(ns, errs, lo=32, hi=256) -> float:
    """Least-squares slope of log error against log n over ``lo <= n <= hi``."""
    ns, errs = np.asarray(ns, dtype=float), np.asarray(errs, dtype=float)
    keep = (ns >= lo) & (ns <= hi) & (errs > 0)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(ns[keep]), np.log(errs[keep]), 1)[0])


def convergence_rows(problem, study: ConvergenceStudy, reference: float, threads=1,
                     fit=(32, 256)):
    p = problem.model.damped_model(problem.alpha).decay()
    bound = convergence_slope_bound(p, problem.dim, study.beta, bool(np.any(problem.alpha)))
    values, errs = [], []
    for n in study.n_grid:
        box = study.box(n)
        sol = solve(problem, M=box, L=box, N=n, threads=threads)
        values.append(sol.value)
        errs.append(abs(sol.value - reference))
    slope = fitted_slope(study.n_grid, errs, *fit)
    return [[n, fmt(v), fmt(e), fmt(bound), fmt(slope)]
            for n, v, e in zip(study.n_grid, values, errs)], slope, bound


def run_convergence(cfg, args, out):
    from .oracles import high_res_cos_oracle

    problem = build_problem(cfg)
    study = ConvergenceStudy(cfg.float("convergence.beta", 0.5), cfg.float("convergence.gamma", 0.5),
                             tuple(cfg.ints("convergence.n", [32, 64, 128, 256, 512])))
    if cfg.has("convergence.reference"):
        ref = cfg.float("convergence.reference")
    else:
        n_ref = cfg.ints("convergence.reference_n", [0])[0] or None
        ref = high_res_cos_oracle(problem, n_ref, cfg.float("convergence.reference_epsilon", 1e-9),
                                  threads=args.threads)
    fit = tuple(cfg.ints("convergence.fit_range", [32, 256]))
    rows, _, _ = convergence_rows(problem, study, ref, args.threads, fit)
    _write_csv(args.out, CONVERGENCE_HEADER, rows, out)
    return 0


def run_compare_mc(cfg, args, out):
    dims = cfg.ints("compare.dims")
    Ns = cfg.ints("compare.N")
    Ls = cfg.floats("compare.L")
    if not len(dims) == len(Ns) == Ls.size:
        raise ConfigError("compare.dims, compare.N and compare.L must have equal length")
    eps = cfg.float("mc.epsilon")
    pilot = cfg.ints("mc.pilot_paths", [100_000])[0]
    rows = []
    for d, n, L in zip(dims, Ns, Ls):
        problem = build_problem(cfg, d)
        t0 = time.perf_counter()
        sol = solve(problem, M=L, L=L, N=n, threads=args.threads)
        cos_time = time.perf_counter() - t0
        value = sol.price if sol.price is not None else sol.value
        t1 = time.perf_counter()
        mc = mc_estimate(problem.model, problem.payoff, problem.market, pilot, args.seed,
                         args.threads)
        pilot_time = time.perf_counter() - t1
        U = required_paths(eps, mc.variance)
        # time for U paths, extrapolated linearly from the pilot run
        mc_time = pilot_time * U / pilot
        rows.append([d, n, fmt(L), U, fmt(cos_time), fmt(mc_time), fmt(value)])
    _write_csv(args.out, COMPARE_HEADER, rows, out)
    return 0


_RUNNERS = {"price": run_value, "cdf": run_value, "moment": run_value, "tune": run_tune,
            "convergence": run_convergence, "compare-mc": run_compare_mc}


def make_parser():
    parser = argparse.ArgumentParser(prog="cosctl", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--strict", action="store_true",
                        help="treat a Parseval plateau as a failure")
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = make_parser().parse_args(argv)
    if args.seed < 0 or args.seed >= 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = JobConfig.load(args.config)
        # tune accepts any problem config
        if cfg.has("command") and args.command != "tune" and cfg.str("command") != args.command:
            raise ConfigError(f"config is for {cfg.str('command')!r}, not {args.command!r}")
        with warnings.catch_warnings():
            if args.strict:
                warnings.simplefilter("error", PlateauDetected)
            return _RUNNERS[args.command](cfg, args, out)
    except (ConfigError, CosError, PlateauDetected, ValueError, ArithmeticError,
            MemoryError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3 if isinstance(exc, (CosError, PlateauDetected, ArithmeticError)) else 2


if __name__ == "__main__":
    sys.exit(main())
