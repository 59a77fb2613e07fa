"""Command-line batch runner: configs, artifacts, manifests, diffs."""

import hashlib
import json

import pytest

from fpflow.cli import diff_runs, load_config, main, run
from fpflow.errors import ConfigError


def _write_config(path, **overrides):
    cfg = {
        "preset": "linear-ou",
        "grid": {"dim": 1, "half_width": 6.0, "cells": 64},
        "evolution": {"T": 0.2, "h": 0.01, "record_every": 4},
        "initial": {"kind": "gaussian", "mean": 1.0, "var": 0.25},
        "tasks": ["evolve"],
        "seed": 3,
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return cfg


def test_load_config_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"preset": "soft-confinement", "tasks": ["validate"]}))
    cfg = load_config(p)
    assert cfg["grid"]["cells"] == 200
    assert cfg["seed"] == 0


def test_load_config_rejects_bad_input(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps({"preset": "nope", "tasks": ["evolve"]}))
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.field == "preset"
    p.write_text(json.dumps({"preset": "linear-ou", "tasks": []}))
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps({"preset": "linear-ou", "tasks": ["teleport"]}))
    with pytest.raises(ConfigError):
        load_config(p)


def test_validate_only_run(tmp_path, capsys):
    p = tmp_path / "c.json"
    _write_config(p, preset="soft-confinement", tasks=["validate"],
                  output_dir=str(tmp_path / "out"))
    assert main(["run", str(p)]) == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["tasks"]["validate"]["status"] == "ok"
    assert (tmp_path / "out" / "validation_report.json").exists()


def test_validate_verb(tmp_path, capsys):
    p = tmp_path / "c.json"
    _write_config(p, tasks=["validate"])
    assert main(["validate", str(p)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] is True


def test_unknown_preset_exits_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"preset": "nope", "tasks": ["evolve"]}))
    assert main(["run", str(p)]) == 2
    assert "unknown preset" in capsys.readouterr().err


def test_run_writes_artifacts_and_checksums(tmp_path):
    p = tmp_path / "c.json"
    out = tmp_path / "out"
    _write_config(p, tasks=["evolve", "steady", "exp-order"],
                  output_dir=str(out),
                  steady={"tol": 1e-5},
                  exp_order={"t": 0.5, "n_values": [10, 20, 40]})
    assert main(["run", str(p)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    for task, entry in manifest["tasks"].items():
        assert entry["status"] == "ok"
        for art in entry["artifacts"]:
            path = out / art["file"]
            assert path.exists()
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            assert digest == art["sha256"]
    assert (out / "evolve_energy.svg").exists()
    ratios = manifest["tasks"]["exp-order"]["metrics"]["ratios"]
    assert all(1.5 <= r <= 2.5 for r in ratios)


def test_runs_byte_stable(tmp_path):
    p = tmp_path / "c.json"
    _write_config(p, tasks=["evolve", "contraction"])
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["run", str(p), "--output-dir", str(out)]) == 0
        outs.append(out)
    man_a = json.loads((outs[0] / "manifest.json").read_text())
    man_b = json.loads((outs[1] / "manifest.json").read_text())
    assert man_a["tasks"] == man_b["tasks"]
    for task in man_a["tasks"]:
        for art in man_a["tasks"][task]["artifacts"]:
            assert (outs[0] / art["file"]).read_bytes() == \
                (outs[1] / art["file"]).read_bytes()


def test_diff_identical_runs_zero(tmp_path):
    p = tmp_path / "c.json"
    _write_config(p, tasks=["evolve"])
    for sub in ("a", "b"):
        assert main(["run", str(p), "--output-dir", str(tmp_path / sub)]) == 0
    report = diff_runs(tmp_path / "a" / "manifest.json",
                       tmp_path / "b" / "manifest.json")
    for entry in report["tasks"]:
        assert all(v == 0.0 for v in entry["metric_deltas"].values())
        for cols in entry["csv_deltas"].values():
            assert all(v == 0.0 for v in cols.values())


def test_diff_refinement_shrinks(tmp_path):
    p = tmp_path / "c.json"
    deltas = {}
    for cells in (64, 128):
        _write_config(p, tasks=["evolve"],
                      grid={"dim": 1, "half_width": 6.0, "cells": cells})
        assert main(["run", str(p), "--output-dir", str(tmp_path / f"n{cells}")]) == 0
    base = json.loads((tmp_path / "n64" / "manifest.json").read_text())
    fine = json.loads((tmp_path / "n128" / "manifest.json").read_text())
    e64 = base["tasks"]["evolve"]["metrics"]["final_energy"]
    e128 = fine["tasks"]["evolve"]["metrics"]["final_energy"]
    assert abs(e128 - e64) < 0.05  # refinement moves diagnostics, slightly


def test_diff_mismatched_tasks_usage_error(tmp_path, capsys):
    p = tmp_path / "c.json"
    _write_config(p, tasks=["evolve"])
    assert main(["run", str(p), "--output-dir", str(tmp_path / "a")]) == 0
    _write_config(p, tasks=["steady"])
    assert main(["run", str(p), "--output-dir", str(tmp_path / "b")]) == 0
    status = main(["diff", str(tmp_path / "a" / "manifest.json"),
                   str(tmp_path / "b" / "manifest.json")])
    assert status == 2
    err = capsys.readouterr().err
    assert "evolve" in err and "steady" in err


def test_output_root_override(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    _write_config(p, tasks=["validate"], output_dir=str(tmp_path / "ignored"))
    target = tmp_path / "override"
    monkeypatch.setenv("FPFLOW_OUTPUT_ROOT_OVERRIDE", str(target))
    assert main(["run", str(p)]) == 0
    assert (target / "manifest.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_custom_model_config(tmp_path):
    p = tmp_path / "c.json"
    cfg = {
        "model": {
            "beta": {"poly": [0.0, 2.0], "terms": [{"kind": "arctan"}]},
            "b": {"poly": [1.0], "terms": [{"kind": "gauss"}]},
            "potential": {"kind": "soft"},
            "constants": {"gamma1": 2.0, "gamma2": 3.0, "b0": 1.0, "gamma3": 2.0},
            "name": "custom-soft",
        },
        "grid": {"dim": 1, "half_width": 6.0, "cells": 64},
        "evolution": {"T": 0.1, "h": 0.01},
        "tasks": ["validate", "evolve"],
        "seed": 1,
        "output_dir": str(tmp_path / "out"),
    }
    p.write_text(json.dumps(cfg))
    assert main(["run", str(p)]) == 0


def test_sequential_flag_accepted(tmp_path):
    p = tmp_path / "c.json"
    _write_config(p, tasks=["validate"], output_dir=str(tmp_path / "out"))
    assert main(["--sequential", "run", str(p)]) == 0
