import json
import math

import numpy as np
import pytest

from entlab.cli import main
from entlab.io import file_sha256, load_config, validate_config, write_csv
from entlab.errors import ConfigError


def run_cli(args):
    return main([str(a) for a in args])


def write_cfg(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return p


# ------------------------------------------------------------------ config/io

def test_validate_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        validate_config({"bogus": 1}, {"tau": (float, 0.2)}, "simulate")


def test_validate_config_type_errors():
    schema = {"n": (int, 1), "x": (float, 0.5), "g": (list, [1.0])}
    with pytest.raises(ConfigError):
        validate_config({"n": 2.5}, schema, "t")
    with pytest.raises(ConfigError):
        validate_config({"x": "abc"}, schema, "t")
    out = validate_config({"g": [1, 2]}, schema, "t")
    assert out["g"] == [1.0, 2.0] and out["n"] == 1


def test_csv_format_17_digits(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b"], [np.array([1.0 / 3.0]), np.array([2.0])])
    lines = p.read_text().splitlines()
    assert lines[0] == "a,b"
    assert lines[1].startswith("0.3333333333333333")


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("not json")
    with pytest.raises(ConfigError):
        load_config(bad)


# ----------------------------------------------------------------- simulate

def test_simulate_reproducible_and_thread_invariant(tmp_path):
    cfg = write_cfg(tmp_path, {"tau": 0.2, "gammas": [0.0, 3.0], "dt": 0.02,
                               "t_final": 3.0, "n_traj": 30})
    outs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 3)):
        out = tmp_path / name
        code = run_cli(["simulate", "--config", cfg, "--out", out,
                        "--seed", 11, "--threads", threads])
        assert code == 0
        outs.append(out)
    f = "c2_vs_time_gamma3.csv"
    h = [file_sha256(o / f) for o in outs]
    assert h[0] == h[1] == h[2]
    # manifest checksums match the files on disk
    man = json.loads((outs[0] / "manifest.json").read_text())
    for fname, digest in man["files"].items():
        assert file_sha256(outs[0] / fname) == digest
    assert man["seed"] == 11 and man["version"]
    # t = 0 row starts at zero concurrence
    first = (outs[0] / f).read_text().splitlines()[1].split(",")
    assert float(first[0]) == 0.0 and float(first[1]) == 0.0


def test_simulate_single_trajectory_drops_stderr(tmp_path):
    cfg = write_cfg(tmp_path, {"gammas": [1.0], "n_traj": 1, "t_final": 1.0})
    out = tmp_path / "o"
    assert run_cli(["simulate", "--config", cfg, "--out", out, "--seed", 1]) == 0
    header = (out / "c2_vs_time_gamma1.csv").read_text().splitlines()[0]
    assert header == "t,mean_c2"
    man = json.loads((out / "manifest.json").read_text())
    assert any("stderr column absent" in str(v) for v in man["notes"].values())


def test_simulate_rejects_unknown_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"gamma": 1.0})  # wrong key name
    assert run_cli(["simulate", "--config", cfg, "--out", tmp_path / "x"]) == 2


def test_env_var_threads(tmp_path, monkeypatch):
    monkeypatch.setenv("ENTLAB_THREADS", "2")
    cfg = write_cfg(tmp_path, {"gammas": [0.5], "n_traj": 8, "t_final": 1.0})
    assert run_cli(["simulate", "--config", cfg, "--out", tmp_path / "e",
                    "--seed", 4]) == 0
    monkeypatch.setenv("ENTLAB_THREADS", "junk")
    assert run_cli(["simulate", "--config", cfg, "--out", tmp_path / "f",
                    "--seed", 4]) == 2


# ------------------------------------------------------------------- diagram

def test_diagram_outputs_and_zero_start(tmp_path):
    cfg = write_cfg(tmp_path, {"tau": 2.0, "gamma": 0.05, "t_final": 2.0,
                               "dt": 0.05})
    out = tmp_path / "d"
    assert run_cli(["diagram", "--config", cfg, "--out", out, "--seed", 1]) == 0
    rows = (out / "diagram.csv").read_text().splitlines()
    assert rows[0] == "t,linear_c2,closed_form_c2"
    r0 = rows[1].split(",")
    assert float(r0[1]) == 0.0 and float(r0[2]) == 0.0


def test_diagram_weak_limit_matches_sin4(tmp_path):
    cfg = write_cfg(tmp_path, {"tau": 1e9, "gamma": 0.0, "t_final": 3.0,
                               "dt": 0.1})
    out = tmp_path / "d2"
    assert run_cli(["diagram", "--config", cfg, "--out", out, "--seed", 1]) == 0
    data = np.genfromtxt(out / "diagram.csv", delimiter=",", names=True)
    assert np.max(np.abs(data["linear_c2"] - np.sin(data["t"]) ** 4)) < 1e-6
    assert np.max(np.abs(data["closed_form_c2"] - np.sin(data["t"]) ** 4)) < 1e-6


def test_diagram_paired_deviation_report(tmp_path):
    sim_cfg = write_cfg(tmp_path, {"tau": 2.0, "gammas": [0.05], "dt": 0.01,
                                   "t_final": 0.5, "n_traj": 500}, "s.json")
    sim_out = tmp_path / "sim"
    assert run_cli(["simulate", "--config", sim_cfg, "--out", sim_out,
                    "--seed", 3]) == 0
    dia_cfg = write_cfg(tmp_path, {"tau": 2.0, "gamma": 0.05, "t_final": 0.5,
                                   "dt": 0.01}, "d.json")
    dia_out = tmp_path / "dia"
    assert run_cli(["diagram", "--config", dia_cfg, "--out", dia_out,
                    "--seed", 3, "--paired",
                    sim_out / "c2_vs_time_gamma0p05.csv"]) == 0
    rep = json.loads((dia_out / "deviation_report.json").read_text())
    assert rep["max_abs_dev"] < 0.02


# ------------------------------------------------------------------ optimal

def test_optimal_zero_horizon_noop(tmp_path):
    cfg = write_cfg(tmp_path, {"t_final": 0.0})
    out = tmp_path / "o0"
    assert run_cli(["optimal", "--config", cfg, "--out", out, "--seed", 1]) == 0
    summary = json.loads((out / "optimal_summary.json").read_text())
    assert summary["action"] == 0.0


def test_optimal_deterministic_limit(tmp_path):
    cfg = write_cfg(tmp_path, {"tau": 1e9, "gamma": 1e-9, "t_final": math.pi / 2,
                               "target": "max", "n_starts": 6,
                               "n_candidates": 4, "n_perturbations": 8})
    out = tmp_path / "o1"
    assert run_cli(["optimal", "--config", cfg, "--out", out, "--seed", 1]) == 0
    summary = json.loads((out / "optimal_summary.json").read_text())
    assert summary["final_c2"] > 1.0 - 1e-6
    assert abs(summary["action"]) < 1e-4
    data = np.genfromtxt(out / "optimal_c2.csv", delimiter=",", names=True)
    assert abs(data["c2"][-1] - 1.0) < 1e-6


# ----------------------------------------------------------------- global-opt

def test_global_opt_curves_and_transition(tmp_path):
    cfg = write_cfg(tmp_path, {"taus": [0.3, 0.4, 0.6, 0.7], "t_final": 20.0})
    out = tmp_path / "g"
    assert run_cli(["global-opt", "--config", cfg, "--out", out, "--seed", 1]) == 0
    summary = json.loads((out / "global_opt_summary.json").read_text())
    assert summary["classifications"] == {"0.3": "saturating", "0.4": "saturating",
                                          "0.6": "oscillatory", "0.7": "oscillatory"}
    assert abs(summary["transition"]["tau_c"] - 0.5) <= 0.05
    for tau in ("0p3", "0p7"):
        assert (out / f"global_opt_tau{tau}.csv").exists()


# --------------------------------------------------------------------- sweep

def test_sweep_csv_and_empty_grid(tmp_path):
    cfg = write_cfg(tmp_path, {"taus": [0.2], "gammas": [0.5, 2.0],
                               "t_final": 8.0, "n_traj": 24, "burn_in": 4.0,
                               "window": 4.0})
    out = tmp_path / "s"
    assert run_cli(["sweep", "--config", cfg, "--out", out, "--seed", 2]) == 0
    data = np.genfromtxt(out / "sweep_tau0p2.csv", delimiter=",", names=True)
    assert list(data.dtype.names) == ["gamma", "mean_c", "err_c", "mean_c2",
                                      "err_c2"]
    assert data.shape == (2,)
    empty = write_cfg(tmp_path, {"taus": [0.2], "gammas": [], "t_final": 8.0,
                                 "n_traj": 8, "burn_in": 4.0, "window": 4.0},
                      "empty.json")
    assert run_cli(["sweep", "--config", empty, "--out", tmp_path / "s2",
                    "--seed", 2]) == 2


# ------------------------------------------------------------------ validate

def test_validate_fast_passes(tmp_path):
    cfg = write_cfg(tmp_path, {"fast": True, "n_traj": 200})
    out = tmp_path / "v"
    assert run_cli(["validate", "--config", cfg, "--out", out, "--seed", 5]) == 0
    rep = json.loads((out / "validation.json").read_text())
    hard = {k: v for k, v in rep["checks"].items() if v["hard"]}
    assert all(v["passed"] for v in hard.values())
    assert rep["sde_checked"]


def test_validate_without_sde_says_so(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"fast": True, "n_traj": 100})
    out = tmp_path / "v2"
    assert run_cli(["validate", "--config", cfg, "--out", out, "--seed", 5,
                    "--without-sde"]) == 0
    rep = json.loads((out / "validation.json").read_text())
    assert not rep["sde_checked"]
    assert "kraus-only" in capsys.readouterr().out


def test_validate_tampered_catalog_fails(tmp_path, monkeypatch):
    import entlab.diagram as dg
    from entlab.errors import CatalogError

    def boom(path=None):
        raise CatalogError("tampered")

    monkeypatch.setattr(dg, "load_vertex_catalog", boom)
    cfg = write_cfg(tmp_path, {"fast": True, "n_traj": 50})
    assert run_cli(["validate", "--config", cfg, "--out", tmp_path / "v3",
                    "--seed", 5]) == 2
