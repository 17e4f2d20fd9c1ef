import math
import subprocess
import sys

import numpy as np
import pytest

from mmwave_mimo import IllConditionedError, selftest
from mmwave_mimo.cli import main, parse_eval_params
from mmwave_mimo.experiments import dump_config, read_results

from .test_experiments import SMALL


def test_parse_eval_params_units_and_aliases():
    p = parse_eval_params(["M=128", "P=10", "snr=20dB", "pilot_snr_db=10", "a=90deg", "υ=2", "x=∞", "normalization=exact"])
    assert p["bs_elements"] == 128 and p["user_elements"] == 10 and p["k_factor"] == 2
    assert p["snr"] == pytest.approx(100.0)
    assert p["pilot_snr"] == pytest.approx(10.0)
    assert p["a"] == pytest.approx(math.pi / 2)
    assert math.isinf(p["x"])
    assert p["normalization"] == "exact"


def test_eval_prints_one_csv_line(capsys):
    assert main(["eval", "fd_hybrid_gap", "k=2"]) == 0
    line = capsys.readouterr().out.strip()
    fid, value, inputs = line.split(",")
    assert fid == "fd_hybrid_gap"
    assert float(value) == pytest.approx(math.log2(2 / 3))
    assert inputs == "k_factor=2.0"


def test_eval_multicell_nmse(capsys):
    assert main(["eval", "multicell_nmse", "M=128", "P=10", "sum_rho2=0.01", "pilot_snr_db=inf"]) == 0
    assert float(capsys.readouterr().out.split(",")[1]) == pytest.approx(7.8125e-6)


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "no_such_formula"],
        ["eval", "slos_mse", "k_factor=1", "bogus=3"],
        ["eval", "slos_mse", "novalue"],
        ["eval", "slos_mse", "k=xdB"],
    ],
)
def test_eval_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "status=error" in capsys.readouterr().err


def test_run_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(dump_config(SMALL), encoding="utf-8")
    out = tmp_path / "out.csv"
    rc = main(["run", "--config", str(cfg), "--out", str(out), "--workers", "1", "--override", "snr_db_sweep=5,15"])
    assert rc == 0
    res = read_results(out)
    assert res.column("snr_db") == [5.0, 15.0]
    err = capsys.readouterr().err
    assert "status=ok" in err and "points=2" in err and "workers=1" in err


def test_seed_flag_changes_output(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(dump_config(SMALL), encoding="utf-8")
    outs = []
    for seed in ("1", "1", "2"):
        out = tmp_path / f"o{len(outs)}.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out), "--workers", "1", "--seed", seed]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] != outs[2]


def test_preset_with_small_override(tmp_path):
    out = tmp_path / "p.csv"
    rc = main(["preset", "hybrid_nmse", "--out", str(out), "--workers", "1", "--override", "trials=2"])
    assert rc == 0
    assert read_results(out).column("trials") == [2, 2, 2]


def test_config_errors_exit_2(tmp_path, capsys):
    out = str(tmp_path / "x.csv")
    assert main(["preset", "no_such_preset", "--out", out]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.cfg"), "--out", out]) == 2
    assert main(["preset", "hybrid_nmse", "--out", out, "--override", "m=2", "--override", "array_sweep=2x1"]) == 2
    assert main(["preset", "hybrid_nmse", "--out", out, "--workers", "0"]) == 2
    err = capsys.readouterr().err
    assert err.count("kind=config") == 4


def test_io_error_exits_1(tmp_path, capsys):
    out = str(tmp_path / "no_dir" / "x.csv")
    assert main(["preset", "hybrid_nmse", "--out", out, "--workers", "1", "--override", "trials=1"]) == 1
    assert "kind=io" in capsys.readouterr().err


def test_numerical_failure_exits_3(tmp_path, monkeypatch, capsys):
    from mmwave_mimo import simulations

    def singular(cfg, rng, angles):
        raise IllConditionedError("ZF Gram matrix is singular")

    monkeypatch.setitem(simulations.KERNELS, "equivalent_channel_nmse", singular)
    out = str(tmp_path / "x.csv")
    assert main(["preset", "hybrid_nmse", "--out", out, "--workers", "1", "--override", "trials=1"]) == 3
    err = capsys.readouterr().err
    assert "kind=numerical" in err and "array sweep" in err


def test_list_presets(capsys):
    assert main(["list-presets"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 16
    assert any(line.startswith("hybrid_nmse\t") for line in lines)


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    assert "status=ok" in capsys.readouterr().err


def test_selftest_reports_injected_fault(monkeypatch, capsys):
    monkeypatch.setattr(selftest, "array_gain", lambda m, x: np.asarray(m, dtype=float) * 0.5)
    assert main(["selftest"]) == 1
    err = capsys.readouterr().err
    assert "status=fail" in err and "invariant=array_gain_limits" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "mmwave_mimo", "eval", "slos_mse", "k=10"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert float(proc.stdout.split(",")[1]) == pytest.approx(0.0930748, rel=1e-6)
