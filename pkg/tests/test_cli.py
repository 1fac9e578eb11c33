import json

import numpy as np
import pytest

from bertrand_mfg.audit import audit_all
from bertrand_mfg.cli import (
    EXIT_AUDIT_FAILED,
    EXIT_ERROR,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    exit_status,
    main,
    run_convergence,
    run_sweep,
)
from bertrand_mfg.config import RunOptions, load_config, parse_config
from bertrand_mfg.core import ConfigurationError, Discretization, ModelParams
from bertrand_mfg.coupling import Solution
from bertrand_mfg.io import read_field, read_paths, write_field, write_paths

SMALL_CFG = "[discretization]\nNx = 40\nNt = 40\n"


def test_empty_config_gives_defaults():
    params, disc, opts = parse_config("")
    assert params == ModelParams()
    assert disc == Discretization()
    assert opts == RunOptions()
    assert (params.epsilon, params.sigma, params.r, params.L, params.T) == (0.3, 0.5, 0.1, 1.0, 1.0)
    assert (disc.Nx, disc.Nt, disc.damping, disc.picard_tol, disc.picard_max) == (200, 400, 0.5, 1e-8, 500)


def test_load_config_file(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[model]\nepsilon = 1.5\nuT = zero\n[run]\nuniqueness = yes\n", encoding="utf-8")
    params, disc, opts = load_config(p)
    assert params.epsilon == 1.5 and params.uT == "zero" and opts.uniqueness


def test_zero_volatility_rejected():
    with pytest.raises(ConfigurationError, match="sigma"):
        parse_config("[model]\nsigma = 0\n")


def test_unknown_key_reports_line():
    with pytest.raises(ConfigurationError, match=r"run.ini:3: unknown key 'gamma'"):
        parse_config("[model]\nepsilon = 0.2\ngamma = 1\n", "run.ini")


def test_unknown_section_and_bad_value():
    with pytest.raises(ConfigurationError, match=r":2: unknown section"):
        parse_config("\n[solver]\nx = 1\n", "c")
    with pytest.raises(ConfigurationError, match=r":2: Nx"):
        parse_config("[discretization]\nNx = many\n", "c")


def test_sampled_m0_with_wrong_mass_is_rejected():
    x = np.linspace(0, 1, 41)
    vals = ",".join(str(v) for v in 60 * x**2 * (1 - x) ** 2)
    with pytest.raises(ConfigurationError, match="m0 integral"):
        parse_config(SMALL_CFG + f"[model]\nm0 = {vals}\n")


def test_tau_zero_schedule_writes_zeros(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL_CFG + "continuation = 0\n", encoding="utf-8")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "out")]) == EXIT_OK
    _, _, u = read_field(tmp_path / "out" / "u.csv")
    _, _, m = read_field(tmp_path / "out" / "m.csv")
    assert np.all(u == 0.0) and np.all(m == 0.0)
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["converged"] and report["audit"]["passed"]


def test_solve_then_audit_round_trip(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL_CFG, encoding="utf-8")
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert main(["audit", str(out / "u.csv"), str(out / "m.csv"), "--config", str(cfg)]) == EXIT_OK
    paths = read_paths(out / "paths.csv")
    assert paths["eta"][0] == pytest.approx(1.0, abs=1e-12)


def test_field_round_trip_is_bit_exact(tmp_path, coarse_solution):
    sol = coarse_solution
    write_field(tmp_path / "u.csv", sol.u, sol.grid)
    write_paths(tmp_path / "p.csv", sol.grid, sol.eta, sol.Q, sol.f, sol.pbar)
    t, x, u = read_field(tmp_path / "u.csv")
    assert np.array_equal(u, sol.u)
    assert np.array_equal(t, sol.grid.t) and np.array_equal(x, sol.grid.x)
    assert np.array_equal(read_paths(tmp_path / "p.csv")["Q"], sol.Q)
    again = Solution.from_fields(u, sol.m, sol.params, sol.grid)
    assert np.array_equal(again.Q, sol.Q)
    assert audit_all(again).as_dict() == audit_all(sol).as_dict()


def test_undefined_price_is_an_empty_cell(tmp_path):
    from bertrand_mfg.core import Grid

    g = Grid(1.0, 1.0, 4, 2)
    write_paths(tmp_path / "p.csv", g, np.zeros(3), np.zeros(3), np.ones(3), np.full(3, np.nan))
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[1].endswith(",")
    assert np.all(np.isnan(read_paths(tmp_path / "p.csv")["pbar"]))


def test_unwritable_output_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL_CFG, encoding="utf-8")
    assert main(["solve", "--config", str(cfg), "--out", str(blocker / "sub")]) == EXIT_ERROR
    assert not (blocker / "sub").exists()


def test_not_converged_exit_status(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL_CFG + "picard_max = 2\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == EXIT_NOT_CONVERGED
    assert json.loads((out / "report.json").read_text())["converged"] is False


def test_exit_status_table():
    assert exit_status(True, True) == EXIT_OK
    assert exit_status(False, True) == EXIT_NOT_CONVERGED
    assert exit_status(False, False) == EXIT_NOT_CONVERGED
    assert exit_status(True, False) == EXIT_AUDIT_FAILED
    assert exit_status(True, True, error=True) == EXIT_ERROR


def test_sweep_no_competition_single_row(tmp_path):
    params, disc, opts = parse_config(SMALL_CFG)
    rows = run_sweep(params, disc, opts, "epsilon", [0.0], tmp_path)
    assert len(rows) == 1 and rows[0]["converged"] is True and rows[0]["iterations"] <= 2
    assert (tmp_path / "summary.csv").read_text().count("\n") == 2


def test_sweep_records_invalid_volatility_and_continues(tmp_path):
    params, disc, opts = parse_config(SMALL_CFG + "[run]\nuniqueness = true\n")
    rows = run_sweep(params, disc, opts, "sigma", [0.5, 0.0, 0.7], tmp_path, jobs=2)
    assert [r["value"] for r in rows] == [0.5, 0.0, 0.7]
    assert "sigma" in rows[1]["error"] and rows[1]["converged"] == ""
    assert rows[0]["converged"] and rows[2]["converged"]
    assert rows[0]["uniqueness_gap"] <= 1e-6


def test_sweep_cli(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL_CFG, encoding="utf-8")
    rc = main(["sweep", "--config", str(cfg), "--out", str(tmp_path), "--param", "epsilon",
               "--values", "0,0.1,0.3,1.0"])
    assert rc == EXIT_OK
    assert (tmp_path / "summary.csv").read_text().count("\n") == 5


def test_convergence_needs_two_levels(tmp_path):
    params, disc, _ = parse_config(SMALL_CFG)
    with pytest.raises(ConfigurationError):
        run_convergence(params, disc, 1, tmp_path)
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL_CFG, encoding="utf-8")
    assert main(["convergence", "--config", str(cfg), "--out", str(tmp_path), "--levels", "1"]) == EXIT_ERROR


@pytest.mark.slow
def test_convergence_orders(tmp_path):
    params, disc, _ = parse_config("[discretization]\nNx = 25\nNt = 50\n")
    res = run_convergence(params, disc, 3, tmp_path)
    assert min(res["fp_eigenfunction_space"]["orders"]) >= 1.8
    assert min(res["hjb_manufactured_space"]["orders"]) >= 1.8
    assert min(res["hjb_manufactured_time"]["orders"]) >= 0.9
    assert json.loads((tmp_path / "orders.json").read_text())["levels"][2] == {"Nx": 100, "Nt": 200}


def test_default_run_matches_golden_report(default_solution):
    from pathlib import Path

    golden = Path(__file__).resolve().parents[1] / "golden"
    report = json.loads((golden / "report.json").read_text())
    assert report["converged"] and report["audit"]["passed"]
    assert default_solution.iterations == report["iterations"]
    ref = read_paths(golden / "paths.csv")
    np.testing.assert_allclose(default_solution.Q, ref["Q"], atol=1e-10)
    np.testing.assert_allclose(default_solution.eta, ref["eta"], atol=1e-10)
