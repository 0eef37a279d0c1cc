"""Command-line surface.  One subcommand per reproducible experiment:

    simulate <config>            run a simulation into its run directory
    kernel-verify                audit table of the kernel profile + constants
    verify <run-dir>             re-check invariants of a recorded run
    probe <snapshot> <points>    velocity/gradient/swirl at probe points
    sweep <config>               mollification-width sweep for measure data

Determinism contract: identical config and binary produce byte-identical
run directories, for any worker count (ALPHAVORTEX_WORKERS overrides the
thread pool size; per-point sums are order-fixed regardless).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import build_initial_cloud, evolve_controls, load_config, serialize_config
from .diagnostics import energy_monitor, verify_suite
from .errors import AlphaVortexError
from .evolve import advance
from .kernel import bound_scan, f_prime, f_scalar, green_alpha
from .measure import MeasureData, uniform_bound_sweep
from .snapshots import SnapshotWriter, clouds_from_frames, read_snapshot_frames
from .velocity import eval_grad_batch, eval_velocity_batch


def _apply_worker_override():
    workers = os.environ.get("ALPHAVORTEX_WORKERS")
    if workers:
        import numba

        numba.set_num_threads(max(1, int(workers)))


def _fmt(v):
    return format(float(v), ".17g")


def cmd_kernel_verify(args) -> int:
    zs = np.concatenate([[0.0], np.logspace(-3, 3, 25)])
    print("z,f,fprime,zf,G1")
    for z in zs:
        print(
            f"{_fmt(z)},{_fmt(f_scalar(z))},{_fmt(f_prime(z))},"
            f"{_fmt(z * f_scalar(z))},{_fmt(green_alpha(z, 1.0))}"
        )
    c = bound_scan()
    print(f"# m0 = {_fmt(c.m0)}")
    print(f"# m1 = {_fmt(c.m1)}")
    print(f"# mf1 = {_fmt(c.mf1)}")
    return 0


def _run_dir_for(cfg, override):
    run_dir = Path(override) if override else Path(cfg.output.directory)
    if run_dir.exists() and any(run_dir.iterdir()):
        raise AlphaVortexError(f"run directory {run_dir} already exists and is not empty")
    return run_dir


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    run_dir = _run_dir_for(cfg, args.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.yaml").write_text(serialize_config(cfg), encoding="utf-8", newline="\n")

    cloud = build_initial_cloud(cfg)
    controls = evolve_controls(cfg)

    energy_grid = None
    if cfg.diagnostics.energy and cloud.n:
        m = 6.0 * cfg.alpha + 0.5
        energy_grid = (
            (0.0, float(cloud.r.max()) + m, float(cloud.z.min()) - m, float(cloud.z.max()) + m),
            64,
            64,
        )

    with SnapshotWriter(run_dir, cfg.output.format) as writer:

        def on_snapshot(c):
            extra = {}
            if energy_grid is not None:
                extra["energy"] = float(_fmt(energy_monitor(c, energy_grid)))
            writer.write_snapshot(c, extra)

        result = advance(cloud, cfg.evolve.T, controls, on_snapshot=on_snapshot)

    report_rows = []
    if cfg.diagnostics.verify_after:
        frames = read_snapshot_frames(
            run_dir / ("snapshots.csv" if cfg.output.format == "csv" else "snapshots.jsonl")
        )
        clouds = clouds_from_frames(frames, cfg.alpha, cfg.grid.n_theta)
        checks = verify_suite(clouds, bound_scan(), seed=cfg.seed)
        report_rows = [c.as_dict() for c in checks]
        (run_dir / "verify.json").write_text(
            json.dumps(report_rows, indent=2) + "\n", encoding="utf-8", newline="\n"
        )
    print(str(run_dir))
    failed = [r["property"] for r in report_rows if not r["pass"]]
    if failed:
        print(f"error: verification failed: {failed[0]}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = load_config(run_dir / "config.yaml")
    snap = run_dir / ("snapshots.csv" if cfg.output.format == "csv" else "snapshots.jsonl")
    clouds = clouds_from_frames(read_snapshot_frames(snap), cfg.alpha, cfg.grid.n_theta)
    checks = verify_suite(clouds, bound_scan(), seed=cfg.seed)
    rows = [c.as_dict() for c in checks]
    payload = json.dumps(rows, indent=2)
    (run_dir / "verify.json").write_text(payload + "\n", encoding="utf-8", newline="\n")
    print(payload)
    for c in checks:
        if not c.passed:
            print(f"error: verification failed: {c.name}", file=sys.stderr)
            return 1
    return 0


def _read_points(path):
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    rows = []
    for ln in text:
        if ln.lower().replace(" ", "") in ("x,y,z", ""):
            continue
        rows.append([float(v) for v in ln.split(",")])
    pts = np.asarray(rows, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise AlphaVortexError(f"points file {path} must have three columns x,y,z")
    return pts


def cmd_probe(args) -> int:
    snap_path = Path(args.snapshot)
    alpha, n_theta = args.alpha, args.n_theta
    if alpha is None or n_theta is None:
        for candidate in (snap_path.parent / "config.yaml",):
            if candidate.exists():
                cfg = load_config(candidate)
                alpha = cfg.alpha if alpha is None else alpha
                n_theta = cfg.grid.n_theta if n_theta is None else n_theta
    if alpha is None or n_theta is None:
        raise AlphaVortexError(
            "alpha/n_theta not given and no config.yaml found next to the snapshot"
        )
    frames = read_snapshot_frames(snap_path)
    if not frames:
        raise AlphaVortexError(f"no snapshot records in {snap_path}")
    cloud = clouds_from_frames(frames[-1:], float(alpha), int(n_theta))[0]
    pts = _read_points(args.points)

    u = eval_velocity_batch(pts, cloud)
    g = eval_grad_batch(pts, cloud)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        swirl = np.where(rho > 0, (u[:, 0] * pts[:, 1] - u[:, 1] * pts[:, 0]) / rho, math.nan)

    lines = ["x,y,z,ux,uy,uz," + ",".join(f"g{i}{k}" for i in range(3) for k in range(3)) + ",swirl"]
    for m in range(pts.shape[0]):
        vals = list(pts[m]) + list(u[m]) + list(g[m].ravel()) + [swirl[m]]
        lines.append(",".join(_fmt(v) for v in vals))
    out_text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(out_text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(out_text)
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if cfg.measure is None or cfg.measure.eps_list is None:
        raise AlphaVortexError("sweep requires a measure block with eps_list")
    if cfg.sweep is None or not cfg.sweep.probes:
        raise AlphaVortexError("sweep requires a sweep block with probes")
    run_dir = _run_dir_for(cfg, args.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.yaml").write_text(serialize_config(cfg), encoding="utf-8", newline="\n")

    data = MeasureData.from_atoms(cfg.measure.atoms)
    report = uniform_bound_sweep(
        data,
        cfg.measure.eps_list,
        cfg.alpha,
        cfg.sweep.probes,
        (cfg.grid.box, cfg.grid.nr, cfg.grid.nz),
        n_theta=cfg.grid.n_theta,
        horizon=cfg.sweep.T,
        dt=cfg.sweep.dt,
    )
    with open(run_dir / "sweep.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rec in report.records:
            fh.write(
                json.dumps(
                    {
                        "eps": rec.eps,
                        "t": float(_fmt(rec.t)),
                        "sup_u": float(_fmt(rec.sup_u)),
                        "sup_grad_far": float(_fmt(rec.sup_grad_far)),
                        "sup_grad_near": float(_fmt(rec.sup_grad_near)),
                        "l1": float(_fmt(report.l1_by_eps[rec.eps])),
                        "total_variation": float(_fmt(report.total_variation)),
                    }
                )
                + "\n"
            )
        for eps, err in report.failures:
            fh.write(json.dumps({"eps": eps, "error": err}) + "\n")
    print(str(run_dir))
    print(f"envelope_variation = {report.envelope_variation:.6f}")
    if report.failures:
        print(f"error: {len(report.failures)} sweep member(s) failed", file=sys.stderr)
        return 1
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="alphavortex", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a simulation from a config file")
    s.add_argument("config")
    s.add_argument("--out-dir", default=None, help="override output.directory")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("kernel-verify", help="print the kernel audit table (CSV)")
    s.set_defaults(fn=cmd_kernel_verify)

    s = sub.add_parser("verify", help="re-run invariant checks on a run directory")
    s.add_argument("run_dir")
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("probe", help="evaluate velocity/gradient/swirl at points")
    s.add_argument("snapshot")
    s.add_argument("points")
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--n-theta", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=cmd_probe)

    s = sub.add_parser("sweep", help="mollification-width sweep for measure data")
    s.add_argument("config")
    s.add_argument("--out-dir", default=None)
    s.set_defaults(fn=cmd_sweep)
    return p


def main(argv=None) -> int:
    _apply_worker_override()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (AlphaVortexError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
