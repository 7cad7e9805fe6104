import csv
import json

import numpy as np
import pytest

from splitflow import cli, experiments
from splitflow.errors import ConfigError, ReferenceNotConvergedError
from splitflow.experiments import RunConfig, load_config
from splitflow.torus import read_field_csv


def write_cfg(tmp_path, **kw):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(kw))
    return str(p)


def test_schemes_listing(capsys):
    assert cli.main(["schemes"]) == 0
    out = capsys.readouterr().out
    assert "lie: [(1, 1)]" in out
    assert "strang: [(0.5, 1), (0.5, 0)]" in out
    assert "empirically certified order 4" in out


@pytest.mark.parametrize(
    "cfg",
    [{"n": 0}, {"m": 256}, {"bogus": 1}, {"T": -1.0}, {"m_list": [33, 64]}, {"n_list": [64, 32]},
     {"n_list": [32, 64], "ref_n": 100}],
)
def test_config_errors_exit_2(tmp_path, cfg, capsys):
    rc = cli.main(["solve", "--config", write_cfg(tmp_path, **cfg), "--out", str(tmp_path)])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_flag_override_validation(tmp_path):
    assert cli.main(["solve", "--n", "0", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--scheme", "ruth"])
    assert exc.value.code == 2


def test_missing_config_file(tmp_path):
    assert cli.main(["solve", "--config", str(tmp_path / "nope.json")]) == 2


def test_load_config_precedence(tmp_path):
    path = write_cfg(tmp_path, m=65, n=10)
    cfg = load_config(path, "desk-time", n=20)
    assert (cfg.m, cfg.n, cfg.ref_n) == (65, 20, 8192)
    with pytest.raises(ConfigError, match="m"):
        load_config(None, None, m=4)


def test_solve_outputs(tmp_path, capsys):
    rc = cli.main(["solve", "--m", "257", "--n", "1024", "--T", "0.5", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "status: completed" in out and "cost model" in out
    with open(tmp_path / "solve_lie_sp_trajectory.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1025
    norms = np.array([float(r["norm_l2"]) for r in rows])
    assert np.max(np.abs(norms - norms[0])) <= 1e-10 * norms[0]
    field = read_field_csv(tmp_path / "solve_lie_sp_final.csv")
    assert field.grid.m == 257


def test_solve_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["solve", "--problem", "nls", "--m", "65", "--n", "50", "--scheme", "strang"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    for name in ("solve_strang_nls_trajectory.csv", "solve_strang_nls_final.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_solve_wave(tmp_path):
    assert cli.main(["solve", "--problem", "wave", "--m", "255", "--n", "32", "--out", str(tmp_path)]) == 0
    header = (tmp_path / "solve_lie_wave_final.csv").read_text().splitlines()[0]
    assert header == "q,x,re1,im1,re2,im2"


def test_cost_model_scales():
    small = experiments.cmd_solve(RunConfig(m=129, n=8), out_dir="/tmp/splitflow-cost-a", echo=lambda s: None)
    large = experiments.cmd_solve(RunConfig(m=257, n=8), out_dir="/tmp/splitflow-cost-b", echo=lambda s: None)
    ratio = large["cost"] / small["cost"]
    assert 2.0 < ratio < 2.5


def test_converge_time_linear_control(tmp_path, capsys):
    cfg = write_cfg(tmp_path, problem="nls", nonlinearity="none", datum="bandlimited",
                    m=65, n_list=[8, 16, 32], T=0.5)
    assert cli.main(["converge-time", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "fit skipped" in capsys.readouterr().out
    rep = experiments.ConvergenceReport.from_csv(tmp_path / "converge-time_lie_nls.csv")
    assert all(r.err_l2 <= 1e-12 for r in rep.rows)
    assert (tmp_path / "converge-time_lie_nls.svg").read_text().lstrip().startswith("<?xml")


def test_converge_space_bandlimited_floor(tmp_path, capsys):
    cfg = write_cfg(tmp_path, problem="nls", nonlinearity="none", datum="bandlimited",
                    m_list=[33, 65, 129], ref_m=517, n=10, T=0.1)
    assert cli.main(["converge-space", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "fit skipped" in capsys.readouterr().out
    rep = experiments.ConvergenceReport.from_csv(tmp_path / "converge-space_lie_nls.csv")
    assert all(r.err_l2 <= 1e-12 for r in rep.rows)


def test_converge_space_rejects_wave(tmp_path):
    cfg = write_cfg(tmp_path, problem="wave")
    assert cli.main(["converge-space", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_converge_time_small_sweep(tmp_path):
    cfg = write_cfg(tmp_path, m=65, n_list=[16, 32, 64, 128], T=0.25, alpha=0.5)
    assert cli.main(["converge-time", "--config", cfg, "--out", str(tmp_path)]) == 0
    rep = experiments.ConvergenceReport.from_csv(tmp_path / "converge-time_lie_sp.csv")
    assert 0.8 < rep.slope < 1.3


def test_workers_do_not_change_results(tmp_path):
    base = dict(m=65, n_list=[16, 32, 64], T=0.25, alpha=0.5)
    a = experiments.converge_time(RunConfig(**base))
    b = experiments.converge_time(RunConfig(**base, workers=3))
    assert [r.err_l2 for r in a.rows] == [r.err_l2 for r in b.rows]


def test_convergence_failure_exit_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ReferenceNotConvergedError("forced")

    monkeypatch.setattr(experiments, "reference_solve", boom)
    cfg = write_cfg(tmp_path, m=33, n_list=[4, 8, 16])
    assert cli.main(["converge-time", "--config", cfg, "--out", str(tmp_path)]) == 3
