"""``lpsim`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import cluster as cl
from .completeness import constant_schedule, rotating_schedule, verify_n_complete
from .cost import cost_lp, cost_nmp, cost_report
from .config import RunConfig, load_config
from .denoise import run_centralized
from .errors import ConfigError, LPError
from .latent import Axis
from .latentio import write_latent
from .partition import build_plan
from .reconstruct import build_weight_mask

log = logging.getLogger("lpsim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _cluster(cfg: RunConfig) -> cl.ClusterConfig:
    return cl.ClusterConfig(K=cfg.K, r=cfg.r, preset=cfg.preset)


def _emit(args, data) -> None:
    if not args.quiet:
        print(json.dumps(data, indent=2, sort_keys=True))


def cmd_simulate(cfg: RunConfig, args) -> int:
    z_T = cfg.initial_latent()
    result = cl.run_lp(cfg.denoiser(), z_T, cfg.sampler, cfg.conditioning(), _cluster(cfg), cfg.geometry)
    expected, _ = cost_lp(cfg.cost_inputs(with_hybrid=False))
    summary = result.ledger.summary(expected_total=expected)
    summary.update(
        steps=cfg.sampler.total_steps,
        K=cfg.K,
        r=cfg.r,
        total_bytes=summary["grand_total"],
        per_step_bytes={str(k): v for k, v in result.ledger.per_step().items()},
    )
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if "latent" in cfg.formats:
        write_latent(out / "z0.lpz", result.z0)
    if "csv" in cfg.formats:
        with open(out / "ledger.csv", "w", newline="") as fh:
            result.ledger.to_csv(fh)
    if "json" in cfg.formats:
        _write_json(out / "summary.json", summary)
    _emit(args, {k: summary[k] for k in ("grand_total", "formula_check", "per_worker_totals")})
    return EXIT_OK


def _diff(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.abs(d).max()), float(np.sqrt(np.mean(d * d)))


def cmd_compare(cfg: RunConfig, args) -> int:
    z_T = cfg.initial_latent()
    f, c, sampler = cfg.denoiser(), cfg.conditioning(), cfg.sampler
    lp = cl.run_lp(f, z_T, sampler, c, _cluster(cfg), cfg.geometry)
    _, ref_trace = run_centralized(f, z_T, sampler, c)
    rows = []
    for i, (a, b) in enumerate(zip(lp.trace, ref_trace), start=1):
        rows.append((i, *_diff(a, b)))
    nmp = cl.run_nmp_emulation(cfg.layers, cfg.shape, sampler, _cluster(cfg), cfg.geometry)
    pp = cl.run_pp_emulation(cfg.layers, cfg.shape, sampler, _cluster(cfg), cfg.geometry)
    report = {
        "final_max_abs": rows[-1][1],
        "final_rms": rows[-1][2],
        "comm_bytes": {"LP": lp.ledger.grand_total, "NMP": nmp.grand_total, "PP": pp.grand_total},
        "nmp_formula": cost_nmp(cfg.cost_inputs(with_hybrid=False)),
    }
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in cfg.formats:
        _write_csv(out / "compare.csv", ("step", "max_abs", "rms"), rows)
    if "json" in cfg.formats:
        _write_json(out / "compare.json", report)
    _emit(args, report)
    return EXIT_OK


def cmd_cost(cfg: RunConfig, args) -> int:
    report = cost_report(cfg.cost_inputs())
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if "json" in cfg.formats:
        _write_json(out / "cost.json", report.to_dict())
    if "csv" in cfg.formats:
        row = report.csv_row()
        _write_csv(out / "cost.csv", list(row), [list(row.values())])
    _emit(args, report.to_dict())
    return EXIT_OK


def cmd_completeness(cfg: RunConfig, args) -> int:
    opts = cfg.raw.get("completeness", {})
    grid = tuple(opts.get("grid", cfg.geometry.grid(cfg.shape)))
    n_steps = opts.get("max_steps", 6)
    kind = opts.get("schedule", "rotating")
    if kind == "rotating":
        schedule = rotating_schedule(n_steps)
    else:
        schedule = constant_schedule(Axis.parse(kind), n_steps)
    try:
        result = verify_n_complete(grid, cfg.K, cfg.r, schedule, n_steps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    verdict = result.verdict()
    verdict.update(grid=list(grid), K=cfg.K, r=cfg.r, steps_checked=n_steps)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if "json" in cfg.formats:
        _write_json(out / "completeness.json", verdict)
    if "csv" in cfg.formats:
        total = int(np.prod(grid))
        rows = [
            (i, int(cov.min()), float(cov.mean()), int((cov == total).sum()))
            for i, cov in enumerate(result.coverage)
        ]
        _write_csv(out / "coverage.csv", ("step", "min_coverage", "mean_coverage", "complete_positions"), rows)
    _emit(args, verdict)
    return EXIT_OK


def cmd_partition_plan(cfg: RunConfig, args) -> int:
    plan = build_plan(cfg.shape, cfg.geometry, args.step, cfg.K, cfg.r)
    data = plan.to_dict()
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if "json" in cfg.formats:
        _write_json(out / "plan.json", data)
    if "csv" in cfg.formats:
        rows = []
        for entry in plan.entries:
            profile = build_weight_mask(entry).axis_profile
            s = entry.latent[0]
            rows.extend((s + j, entry.worker_id, float(w)) for j, w in enumerate(profile))
        _write_csv(out / "weights.csv", ("position", "worker_id", "weight"), rows)
    _emit(args, data)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "cost": cmd_cost,
    "completeness": cmd_completeness,
    "partition-plan": cmd_partition_plan,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpsim", description="Latent-parallel diffusion denoising simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON run config")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="override the latent seed")
        p.add_argument("--quiet", action="store_true", help="print nothing on success")
        if name == "partition-plan":
            p.add_argument("--step", type=int, default=1, help="1-based denoising step")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="lpsim: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, out=args.out)
        if args.command == "partition-plan" and args.step < 1:
            raise ConfigError("--step must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"lpsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LPError as exc:
        print(f"lpsim: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"lpsim: unexpected error: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
