import json
from pathlib import Path

import numpy as np
import pytest

from lpsim import cluster
from lpsim.cli import main
from lpsim.errors import WorkerFailure
from lpsim.latent import random_latent
from lpsim.latentio import HEADER, dump_latent, load_latent, read_latent

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_config(tmp_path, **overrides):
    raw = {
        "latent": {"C": 2, "T": 6, "H": 8, "W": 8},
        "patch": {"p_T": 1, "p_H": 2, "p_W": 2},
        "sampler": {"steps": 6},
        "denoiser": {"kind": "box", "radius": [1, 1, 1], "seed": 5},
        "cluster": {"K": 3, "r": 0.5, "layers": 6},
    }
    for key, value in overrides.items():
        raw[key] = {**raw.get(key, {}), **value} if isinstance(value, dict) else value
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    return path


def run(cmd, cfg, out, *extra):
    return main([cmd, "--config", str(cfg), "--out", str(out), "--quiet", *extra])


def test_simulate_writes_outputs(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "out"
    assert run("simulate", cfg, out) == 0
    assert {p.name for p in out.iterdir()} == {"z0.lpz", "ledger.csv", "summary.json"}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["formula_check"] is True
    assert summary["total_bytes"] == sum(summary["per_step_bytes"].values())
    assert read_latent(out / "z0.lpz").shape == (2, 6, 8, 8)


def test_simulate_respects_formats(tmp_path):
    cfg = small_config(tmp_path, output={"formats": ["json"]})
    out = tmp_path / "out"
    assert run("simulate", cfg, out) == 0
    assert [p.name for p in out.iterdir()] == ["summary.json"]


def test_compare_identity_is_exact(tmp_path):
    cfg = small_config(tmp_path, denoiser={"kind": "identity"})
    out = tmp_path / "out"
    assert run("compare", cfg, out) == 0
    report = json.loads((out / "compare.json").read_text())
    assert report["final_max_abs"] == 0.0
    assert report["comm_bytes"]["NMP"] == report["comm_bytes"]["PP"] == report["nmp_formula"]
    rows = (out / "compare.csv").read_text().splitlines()
    assert rows[0] == "step,max_abs,rms" and len(rows) == 7


def test_compare_global_without_overlap_differs(tmp_path):
    cfg = small_config(tmp_path, denoiser={"kind": "global"}, cluster={"r": 0.0})
    out = tmp_path / "out"
    assert run("compare", cfg, out) == 0
    assert json.loads((out / "compare.json").read_text())["final_max_abs"] > 1e-3


def test_cost_hybrid_within_bound(tmp_path):
    out = tmp_path / "out"
    assert run("cost", CONFIGS / "wan21_cost.json", out) == 0
    report = json.loads((out / "cost.json").read_text())
    assert report["ratio_R"] <= 0.05
    assert report["C_PP"] == report["C_NMP"]
    hyb = report["hybrid"]
    assert hyb["ratio_vs_NMP"] < hyb["bound"]
    assert (out / "cost.csv").read_text().count("\n") == 2


def test_completeness_default_grid(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "out"
    assert run("completeness", cfg, out) == 0
    verdict = json.loads((out / "completeness.json").read_text())
    assert verdict["complete_at"] == 2
    assert verdict["grid"] == [6, 4, 4]
    assert verdict["schedule"][:3] == ["temporal", "height", "width"]


def test_completeness_constant_schedule(tmp_path):
    cfg = small_config(tmp_path, completeness={"schedule": "width", "max_steps": 10}, cluster={"r": 0.0})
    out = tmp_path / "out"
    assert run("completeness", cfg, out) == 0
    assert json.loads((out / "completeness.json").read_text())["complete_at"] is None


def test_partition_plan_step_two(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "out"
    assert run("partition-plan", cfg, out, "--step", "2") == 0
    plan = json.loads((out / "plan.json").read_text())
    assert plan["axis"] == "height" and plan["step"] == 2
    assert len(plan["entries"]) == 2  # 4 height patches over 3 workers
    weights = (out / "weights.csv").read_text().splitlines()
    assert weights[0] == "position,worker_id,weight"


def test_malformed_json_exits_2_without_outputs(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    out = tmp_path / "out"
    assert run("simulate", cfg, out) == 2
    assert not out.exists()
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize(
    "override",
    [{"cluster": {"r": 5.0}}, {"cluster": {"K": 0}}, {"bogus": 1}, {"latent": {"T": 1}, "patch": {"p_T": 2}}],
)
def test_invalid_configs_exit_2(tmp_path, override):
    cfg = small_config(tmp_path, **override)
    assert run("cost", cfg, tmp_path / "out") == 2


def test_missing_config_exits_2(tmp_path):
    assert run("cost", tmp_path / "nope.json", tmp_path / "out") == 2


def test_too_few_layers_exits_2(tmp_path):
    cfg = small_config(tmp_path, cluster={"layers": 2, "K": 3})
    assert run("compare", cfg, tmp_path / "out") == 2


def test_worker_failure_exits_3(tmp_path, monkeypatch, capsys):
    def broken(*args, **kwargs):
        raise WorkerFailure(2, 1, RuntimeError("lost"))

    monkeypatch.setattr(cluster, "run_lp", broken)
    assert run("simulate", small_config(tmp_path), tmp_path / "out") == 3
    assert "worker 2" in capsys.readouterr().err


def test_seed_override_changes_result(tmp_path):
    cfg = small_config(tmp_path)
    assert run("simulate", cfg, tmp_path / "a") == 0
    assert run("simulate", cfg, tmp_path / "b", "--seed", "6") == 0
    assert (tmp_path / "a" / "z0.lpz").read_bytes() != (tmp_path / "b" / "z0.lpz").read_bytes()


@pytest.mark.parametrize("dtype_bytes", [2, 4, 8])
def test_latent_dump_round_trip(dtype_bytes):
    z = random_latent((3, 2, 5, 7), seed=1, dtype_bytes=dtype_bytes)
    blob = dump_latent(z)
    assert len(blob) == HEADER.size + z.nbytes
    assert blob[:4] == b"LPZ1"
    back = load_latent(blob)
    assert back.dtype == z.dtype and back.tobytes() == z.tobytes()


def test_latent_dump_rejects_garbage():
    with pytest.raises(ValueError):
        load_latent(b"XXXX" + bytes(60))
    blob = dump_latent(np.zeros((1, 1, 1, 2), np.float32))
    with pytest.raises(ValueError):
        load_latent(blob[:-1])
