import json

import numpy as np
import pytest

from fracpme import cli, harness
from fracpme.harness import ConfigError

SMALL = """
name: small
physics: {m: 2.0, s: 0.25}
grid: {x_min: -4.0, x_max: 4.0, n: 128}
time: {t_end: 0.05, snapshot_every: 0.01}
datum: {kind: box, radius: 1.0}
"""


def test_minimal_config_defaults():
    cfg = harness.parse_config("physics: {m: 1.5, s: 0.3}\n")
    assert cfg.name == "run" and cfg.seed == 0
    assert cfg.grid["n"] == 1024 and cfg.datum["kind"] == "gaussian"
    assert cfg.sim_params().m == 1.5


def test_m_outside_existence_range_is_named():
    with pytest.raises(ConfigError) as info:
        harness.parse_config("physics: {m: 3.5, s: 0.3}\n")
    assert any("m=3.5" in p and "solver guard" in p for p in info.value.problems)


def test_all_problems_listed_together():
    text = "physics: {m: 0.5, s: 2.0, bogus: 1}\ngrid: {n: 3}\ncolour: red\n"
    with pytest.raises(ConfigError) as info:
        harness.parse_config(text)
    probs = info.value.problems
    assert len(probs) >= 5
    assert "unknown key 'colour'" in probs and "unknown key 'physics.bogus'" in probs


def test_duplicate_keys_reported_with_lines():
    with pytest.raises(ConfigError) as info:
        harness.parse_config("physics:\n  m: 1.5\n  m: 2.0\n  s: 0.3\n")
    assert info.value.problems == ["duplicate key 'm' (line 3)"]


def test_missing_required_and_bad_barrier():
    with pytest.raises(ConfigError) as info:
        harness.parse_config("physics: {s: 0.3}\nbarriers:\n  - {family: wedge}\n")
    probs = " | ".join(info.value.problems)
    assert "physics.m" in probs and "barriers[0].family" in probs


@pytest.mark.parametrize("kind", ["box", "gaussian", "exp_tail", "heaviside_integrated"])
def test_build_datum_kinds(kind):
    cfg = harness.parse_config(SMALL.replace("kind: box", f"kind: {kind}"))
    u = harness.build_datum(cfg)
    assert u.shape == (128,) and np.all(u >= 0) and u.max() > 0


def test_file_datum(tmp_path):
    table = tmp_path / "d.csv"
    np.savetxt(table, np.c_[[-1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], delimiter=",")
    cfg = harness.parse_config(SMALL.replace("kind: box, radius: 1.0", f"kind: file, path: {table}"))
    u = harness.build_datum(cfg)
    assert u.max() <= 1.0 and u[np.abs(cfg.grid_obj().x) > 1.0].max() == 0.0


def test_run_is_deterministic(tmp_path):
    cfg = harness.parse_config(SMALL)
    a = harness.run_experiment(cfg, tmp_path / "a")
    b = harness.run_experiment(cfg, tmp_path / "b")
    assert a.exit_code == 0 and a.manifest["status"] == "ok"
    for name in a.manifest["files"]:
        assert (a.path / name).read_bytes() == (b.path / name).read_bytes()
    assert (a.path / "manifest.json").read_bytes() == (b.path / "manifest.json").read_bytes()


def test_manifest_is_written_last_and_lists_hashes(tmp_path):
    res = harness.run_experiment(harness.parse_config(SMALL), tmp_path)
    manifest = res.path / "manifest.json"
    others = [p for p in res.path.iterdir() if p.name != "manifest.json"]
    assert all(p.stat().st_mtime_ns <= manifest.stat().st_mtime_ns for p in others)
    data = json.loads(manifest.read_text())
    assert data["schema_version"] == harness.SCHEMA_VERSION
    assert set(data["files"]) == {p.name for p in others}


def test_disabled_diagnostics_write_nothing(tmp_path):
    text = SMALL + "diagnostics: {enabled: false}\noutput: {plots: false}\n"
    res = harness.run_experiment(harness.parse_config(text), tmp_path)
    assert not (res.path / "diagnostics.csv").exists()
    assert sorted(p.name for p in res.path.iterdir()) == ["manifest.json", "snapshots.csv"]


def test_failing_barrier_gives_exit_one(tmp_path):
    text = SMALL + "barriers:\n  - {family: persistence, a: 0.01, radius: 1.0, height: 5.0}\n"
    res = harness.run_experiment(harness.parse_config(text), tmp_path)
    assert res.exit_code == 1 and res.manifest["status"] == "failed"


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.OUTPUT_ROOT_ENV, str(tmp_path / "env_root"))
    res = harness.run_experiment(harness.parse_config(SMALL))
    assert res.path == tmp_path / "env_root" / "small"


def test_dichotomy_preset():
    plan = harness.default_dichotomy_plan(concurrency=1)
    assert plan.ms == [1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75] and plan.ss == [0.25, 0.4]
    assert plan.cells()[0] == (1.25, 0.25) and plan.cells()[7] == (1.25, 0.4)
    assert plan.base.datum["kind"] == "box"


def test_threads_environment_sets_concurrency(monkeypatch):
    monkeypatch.setenv(harness.THREADS_ENV, "3")
    assert harness.default_dichotomy_plan().concurrency == 3


def test_plan_guards():
    with pytest.raises(ConfigError):
        harness.parse_plan("sweep: {m: [3.5], s: [0.25]}\n")
    with pytest.raises(ConfigError):
        harness.parse_plan("sweep: {m: [1.5], s: [0.25], extra: 1}\n")


MINI_PLAN = """
name: mini
sweep: {m: [1.5, 2.5], s: [0.25]}
base:
  grid: {x_min: -8.0, x_max: 8.0, n: 512}
  time: {t_end: 0.3, snapshot_every: 0.01, dt_max: 2.0e-4}
  datum: {kind: box, radius: 1.0}
  diagnostics: {energy: false}
  output: {plots: false, snapshots: false}
"""


def test_small_sweep_regimes_and_concurrency(tmp_path):
    serial = harness.parse_plan(MINI_PLAN)
    serial.concurrency = 1
    a = harness.run_sweep(serial, tmp_path / "one")
    assert a["labels"] == {(1.5, 0.25): "infinite", (2.5, 0.25): "finite"}
    parallel = harness.parse_plan(MINI_PLAN)
    parallel.concurrency = 2
    b = harness.run_sweep(parallel, tmp_path / "two")
    for name in ("sweep.csv", "regime_map.csv", "regime_map.svg"):
        assert (a["path"] / name).read_bytes() == (b["path"] / name).read_bytes()
    summary = harness.regenerate_report(a["path"])
    assert "infinite" in summary.read_text()


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text(SMALL)
    bad = tmp_path / "bad.yaml"
    bad.write_text("physics: {m: 3.5, s: 0.3}\n")
    failing = tmp_path / "failing.yaml"
    failing.write_text(SMALL + "barriers:\n  - {family: persistence, a: 0.01, radius: 1.0, height: 5.0}\n")
    root = str(tmp_path / "out")
    assert cli.main(["run", str(good), "--output-root", root]) == 0
    assert cli.main(["run", str(failing), "--output-root", root]) == 1
    assert cli.main(["run", str(bad), "--output-root", root]) == 2
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_kernels_and_report(tmp_path):
    out = tmp_path / "k"
    assert cli.main(["kernels", "--n", "32", "--s", "0.25", "--alpha", "0.5", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["frac_lap_a0.5.csv", "grad_riesz_s0.25.csv", "riesz_s0.25.csv"]
    assert cli.main(["kernels", "--n", "32", "--out", str(out)]) == 2
    good = tmp_path / "good.yaml"
    good.write_text(SMALL)
    cli.main(["run", str(good), "--output-root", str(tmp_path / "o")])
    assert cli.main(["report", str(tmp_path / "o" / "small")]) == 0
