import csv
import io
import math
import pathlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dampedcos.cli import (COMPARE_HEADER, CONVERGENCE_HEADER, ConfigError, JobConfig,
                           build_problem, fitted_slope, fmt, main)

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def write(tmp_path, text, name="job.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_vg_cdf_config():
    code, out = run(["cdf", "--config", str(CONFIGS / "vg_cdf.cfg")])
    assert code == 0
    assert "value = 0.79193" in out
    assert "N = 46" in out.splitlines()


def test_tune_prints_only_parameters():
    code, out = run(["tune", "--config", str(CONFIGS / "bs_put.cfg")])
    assert code == 0
    keys = [line.split(" = ")[0] for line in out.strip().splitlines()]
    assert keys == ["alpha", "M", "L", "N", "N_smoothness"]
    assert "N_smoothness = 20 (s = 40)" in out


def test_malformed_config_negative_strike(tmp_path, capsys):
    cfg = write(tmp_path, (CONFIGS / "bs_put.cfg").read_text().replace(
        "payoff.strike = 50", "payoff.strike = -50"))
    target = tmp_path / "out.csv"
    code, _ = run(["price", "--config", cfg, "--out", str(target)])
    assert code != 0
    assert not target.exists()
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error:")


@pytest.mark.parametrize("text", [
    "model.family = nonsense\npayoff.kind = cdf\npayoff.y = 0\n",
    "model.family = normal\nmodel.cov = 1\npayoff.kind = cdf\n",
    "model.family = normal\nmodel.cov = 1\npayoff.kind = cdf\npayoff.y = abc\n",
    "this line has no separator\n",
])
def test_config_errors_exit_2(tmp_path, text):
    code, _ = run(["cdf", "--config", write(tmp_path, text)])
    assert code == 2


def test_missing_config_file(tmp_path):
    assert run(["cdf", "--config", str(tmp_path / "nope.cfg")])[0] == 2


def test_command_payoff_mismatch(tmp_path):
    text = "model.family = normal\nmodel.cov = 1\npayoff.kind = cdf\npayoff.y = 0\ntolerance.epsilon = 1e-3\n"
    assert run(["price", "--config", write(tmp_path, text)])[0] == 2
    assert run(["cdf", "--config", write(tmp_path, text)])[0] == 0


def test_config_command_mismatch():
    assert run(["cdf", "--config", str(CONFIGS / "bs_put.cfg")])[0] == 2


def test_strict_escalates_plateau(tmp_path):
    text = ("model.family = normal\nmodel.cov = 1\npayoff.kind = abs-moment\n"
            "tolerance.epsilon = 1e-8\n")
    cfg = write(tmp_path, text)
    assert run(["moment", "--config", cfg])[0] == 0
    assert run(["moment", "--config", cfg, "--strict"])[0] == 3


def test_numerical_failure_exit_3(tmp_path):
    text = ("model.family = variance-gamma\nmodel.a = 5\nmodel.s = 0.2\nmodel.sigma = 0.1\n"
            "payoff.kind = digital-put\npayoff.strike = 1\ndamping.alpha = 50\n"
            "tolerance.epsilon = 1e-3\n")
    assert run(["price", "--config", write(tmp_path, text)])[0] == 3


def test_moment_command(tmp_path):
    text = ("model.family = normal\nmodel.cov = 1\npayoff.kind = abs-moment\n"
            "damping.alpha = 1\ntolerance.epsilon = 1e-7\n")
    code, out = run(["moment", "--config", write(tmp_path, text)])
    assert code == 0
    value = float(out.splitlines()[0].split(" = ")[1])
    assert value == pytest.approx(math.sqrt(2 / math.pi), abs=1e-7)


def _convergence_cfg(tmp_path):
    text = (CONFIGS / "vg_basket_convergence_T1.cfg").read_text()
    text = text.replace("convergence.n = 32, 64, 128, 256, 512", "convergence.n = 16, 32, 64")
    text = text.replace("convergence.reference_n = 2000", "convergence.reference = 5.5951726239380575")
    text += "convergence.fit_range = 16, 64\n"
    return write(tmp_path, text.replace("convergence.fit_range = 32, 256\n", ""))


def test_convergence_csv_deterministic(tmp_path):
    cfg = _convergence_cfg(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["convergence", "--config", cfg, "--out", str(a)])[0] == 0
    assert run(["convergence", "--config", cfg, "--out", str(b), "--threads", "3"])[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(a.open()))
    assert rows[0] == CONVERGENCE_HEADER
    assert [r[0] for r in rows[1:]] == ["16", "32", "64"]
    assert float(rows[1][3]) == -9.5
    assert b"\r\n" not in a.read_bytes()


def test_compare_mc_csv(tmp_path):
    text = (CONFIGS / "digital_compare.cfg").read_text()
    text = text.replace("mc.pilot_paths = 100000", "mc.pilot_paths = 20000")
    cfg = write(tmp_path, text)
    code, out = run(["compare-mc", "--config", cfg, "--seed", "11"])
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == COMPARE_HEADER
    assert [r[0] for r in rows[1:]] == ["1", "2", "3"]
    vals = [float(r[6]) for r in rows[1:]]
    assert vals == pytest.approx([0.539827, 0.291414, 0.157313], abs=1e-5)
    again = list(csv.reader(io.StringIO(run(["compare-mc", "--config", cfg, "--seed", "11"])[1])))
    # everything except the wall-clock columns is deterministic
    strip = lambda table: [[r[i] for i in (0, 1, 2, 3, 6)] for r in table]  # noqa: E731
    assert strip(rows) == strip(again)


def test_damping_sweep_csv():
    code, out = run(["price", "--config", str(CONFIGS / "digital_damping_sweep.cfg")])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    errs = {float(r["alpha"]): float(r["abs_error"]) for r in rows}
    assert all(errs[a] <= 1e-4 for a in (-10, -7, -4, -2))
    assert errs[-0.1] > 1e-3


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_fitted_slope():
    ns = [32, 64, 128, 256, 512]
    assert fitted_slope(ns, [n ** -3.0 for n in ns]) == pytest.approx(-3.0)
    assert math.isnan(fitted_slope([32], [1.0]))


def test_config_parsing_and_broadcast():
    cfg = JobConfig.from_text("market.spot = 50, 60\nmodel.family = black-scholes\n"
                              "model.sigma = 0.2\nmodel.corr = 0.5\npayoff.kind = basket-put\n"
                              "payoff.strike = 100  # inline comment\n")
    assert cfg.dim() == 2
    prob = build_problem(cfg)
    assert prob.model.cov[0, 1] == pytest.approx(0.02)
    assert np.all(prob.alpha == -4)
    with pytest.raises(ConfigError):
        cfg.float("market.spot")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.name)
def test_checked_in_configs_build(path):
    cfg = JobConfig.load(str(path))
    if cfg.has("compare.dims"):
        for d in cfg.ints("compare.dims"):
            assert build_problem(cfg, d).dim == d
    else:
        assert build_problem(cfg).dim == cfg.dim()


def test_bad_seed():
    assert run(["cdf", "--config", str(CONFIGS / "vg_cdf.cfg"), "--seed", "-1"])[0] == 2
