import numpy as np
import pytest

from anticonc.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, run
from anticonc.harness import VerifyReport, VerifyRow, fitted_c0, run_sweep
from anticonc.config import ExperimentConfig


def _body(text):
    return [ln for ln in text.splitlines() if not ln.startswith("#")]


def test_bounds_zero_variance(capsys):
    assert run(["bounds", "--equicorrelated", "3,0.2", "--var", "0", "--eps", "0.5"]) == EXIT_OK
    out = capsys.readouterr().out
    row = next(ln for ln in _body(out) if ln.startswith("order_stat"))
    assert float(row.split(",")[-2]) == pytest.approx(1.0)


def test_verify_exact_abs_gaussian(tmp_path):
    out = tmp_path / "v.csv"
    code = run(["verify", "--equicorrelated", "1,0", "--stat", "max_abs", "--checks", "exact",
                "--n-samples", "50000", "--seed", "5", "--out", str(out)])
    assert code == EXIT_OK
    assert "schema=1" in out.read_text()


def test_verify_sandwich_passes(tmp_path):
    code = run(["verify", "--equicorrelated", "4,0.3", "--checks", "sandwich,var_lower,var_upper,deng",
                "--n-samples", "20000", "--out", str(tmp_path / "v.csv")])
    assert code == EXIT_OK


def test_verify_output_is_deterministic(tmp_path):
    args = ["verify", "--equicorrelated", "3,0.5", "--n-samples", "5000", "--seed", "2"]
    run(args + ["--out", str(tmp_path / "a.csv")])
    run(args + ["--out", str(tmp_path / "b.csv"), "--workers", "3"])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_usage_errors(capsys):
    assert run(["bounds", "--spec-file", "/nonexistent.txt"]) == EXIT_USAGE
    assert "not found" in capsys.readouterr().err
    assert run(["verify", "--checks", "bogus"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        run(["bounds", "--equicorrelated", "nope"])
    assert e.value.code == 2


def test_density_and_qfunc(capsys):
    assert run(["density", "--equicorrelated", "2,0", "--grid=-6,6,97", "--budget", "256"]) == EXIT_OK
    rows = _body(capsys.readouterr().out)
    assert rows[0] == "z,f,err" and len(rows) == 98
    assert run(["qfunc", "--equicorrelated", "2,0", "--eps", "0.5", "--n-samples", "1000"]) == EXIT_OK
    assert _body(capsys.readouterr().out)[0] == "eps,q,se,t_star"


def test_failing_row_sets_exit_code():
    rep = VerifyReport(0, [VerifyRow("sandwich", "", 0.1, 0.2, 0.5, 0.01, 0.0, "")])
    assert not rep.all_pass and rep.n_fail == 1


def test_sweep_small():
    cfg = ExperimentConfig(n_list=(2, 8), rho_list=(0.0, 0.5), n_samples=20000, seed=1)
    cells = run_sweep(cfg)
    assert len(cells) == 4
    assert all(c.lower_ok and c.ratios_ok for c in cells)
    assert np.isfinite(fitted_c0(cells))
