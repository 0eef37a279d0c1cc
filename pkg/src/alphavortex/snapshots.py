"""Snapshot persistence: one record per ring per snapshot time, CSV or
JSONL, numeric fields at 17 significant digits so a write/read round trip
is bit-exact.  One diagnostics record per snapshot time rides along."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import SnapshotError
from .state import ParticleCloud, lp_norm

CSV_HEADER = "t,j,r,z,g,vol"
_FIELDS = ("t", "j", "r", "z", "g", "vol")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


class SnapshotWriter:
    """Appends ring records and per-time diagnostics under a run directory."""

    def __init__(self, run_dir, fmt="csv"):
        if fmt not in ("csv", "jsonl"):
            raise SnapshotError(f"unknown snapshot format {fmt!r}")
        self.run_dir = Path(run_dir)
        self.fmt = fmt
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.snap_path = self.run_dir / ("snapshots.csv" if fmt == "csv" else "snapshots.jsonl")
        self.diag_path = self.run_dir / "diagnostics.jsonl"
        try:
            self._snap = open(self.snap_path, "w", encoding="utf-8", newline="\n")
            self._diag = open(self.diag_path, "w", encoding="utf-8", newline="\n")
        except OSError as exc:
            raise SnapshotError(f"cannot open snapshot sink in {self.run_dir}: {exc}") from exc
        if fmt == "csv":
            self._snap.write(CSV_HEADER + "\n")

    def write_snapshot(self, cloud: ParticleCloud, diagnostics: dict = None):
        try:
            for j in range(cloud.n):
                vals = (cloud.t, j, cloud.r[j], cloud.z[j], cloud.g[j], cloud.vol[j])
                if self.fmt == "csv":
                    self._snap.write(
                        ",".join(_fmt(v) if i != 1 else str(int(v)) for i, v in enumerate(vals))
                        + "\n"
                    )
                else:
                    row = {
                        k: (int(v) if k == "j" else float(_fmt(v)))
                        for k, v in zip(_FIELDS, vals)
                    }
                    self._snap.write(json.dumps(row) + "\n")
            rec = {"t": float(_fmt(cloud.t)), "n_rings": cloud.n}
            if cloud.n:
                rec["l1"] = float(_fmt(lp_norm(cloud, 1)))
                rec["l2"] = float(_fmt(lp_norm(cloud, 2)))
                rec["linf"] = float(_fmt(lp_norm(cloud, math.inf)))
            if diagnostics:
                rec.update(diagnostics)
            self._diag.write(json.dumps(rec) + "\n")
        except OSError as exc:
            raise SnapshotError(f"write failed in {self.run_dir}: {exc}") from exc

    def close(self):
        self._snap.close()
        self._diag.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_snapshot_frames(path):
    """Parse a snapshot file into [(t, {field: array})], grouped by time in
    file order."""
    path = Path(path)
    if not path.exists():
        raise SnapshotError(f"snapshot file not found: {path}")
    rows = []
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".csv" or text.startswith(CSV_HEADER):
        lines = text.strip().splitlines()
        if not lines or lines[0] != CSV_HEADER:
            raise SnapshotError(f"{path}: missing snapshot header")
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != 6:
                raise SnapshotError(f"{path}: malformed row {ln!r}")
            rows.append(
                {
                    "t": float(parts[0]),
                    "j": int(parts[1]),
                    "r": float(parts[2]),
                    "z": float(parts[3]),
                    "g": float(parts[4]),
                    "vol": float(parts[5]),
                }
            )
    else:
        for ln in text.strip().splitlines():
            if ln:
                rows.append(json.loads(ln))
    frames = []
    current_t = None
    bucket = None
    for row in rows:
        if current_t is None or row["t"] != current_t:
            if bucket is not None:
                frames.append((current_t, _to_arrays(bucket)))
            current_t = row["t"]
            bucket = []
        bucket.append(row)
    if bucket is not None:
        frames.append((current_t, _to_arrays(bucket)))
    return frames


def _to_arrays(bucket):
    return {
        "r": np.array([b["r"] for b in bucket]),
        "z": np.array([b["z"] for b in bucket]),
        "g": np.array([b["g"] for b in bucket]),
        "vol": np.array([b["vol"] for b in bucket]),
    }


def clouds_from_frames(frames, alpha, n_theta):
    out = []
    for t, arrs in frames:
        n = arrs["r"].shape[0]
        out.append(
            ParticleCloud(
                r=arrs["r"],
                z=arrs["z"],
                g=arrs["g"],
                vol=arrs["vol"],
                n_theta=np.full(n, int(n_theta), dtype=np.int64),
                alpha=alpha,
                t=float(t),
            )
        )
    return out
