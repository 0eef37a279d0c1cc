"""Simulation configuration: one YAML schema, strict validation, lossless
round-trip.  Every run directory embeds the exact serialized config."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .evolve import EvolveControls
from .measure import mollify
from .state import PROFILES, MeasureData, init_from_profile

SCHEMA_VERSION = 1


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _take(d, section, allowed, required=()):
    if d is None:
        d = {}
    _require(isinstance(d, dict), f"section '{section}' must be a mapping")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key '{k}' in section '{section}'")
    for k in required:
        if k not in d:
            raise ConfigError(f"missing key '{k}' in section '{section}'")
    return d


@dataclass(frozen=True)
class ProfileConfig:
    name: str
    params: tuple  # sorted (key, value) pairs

    @classmethod
    def parse(cls, d):
        d = dict(_take(d, "profile", {"name", "amplitude", "ring_radius", "core_width", "z_offset"},
                       required=("name",)))
        name = d.pop("name")
        _require(name in PROFILES, f"unknown profile '{name}'; available: {sorted(PROFILES)}")
        return cls(name=name, params=tuple(sorted((k, float(v)) for k, v in d.items())))

    def as_dict(self):
        return {"name": self.name, **{k: v for k, v in self.params}}


@dataclass(frozen=True)
class MeasureConfig:
    atoms: tuple  # ((r, z, m), ...)
    eps: float = None
    eps_list: tuple = None

    @classmethod
    def parse(cls, d):
        d = _take(d, "measure", {"atoms", "eps", "eps_list"}, required=("atoms",))
        atoms = tuple(tuple(float(v) for v in row) for row in d["atoms"])
        for row in atoms:
            _require(len(row) == 3, "measure.atoms entries must be (r, z, m) triples")
            _require(row[0] >= 0, "atom radius must be >= 0")
        eps = d.get("eps")
        if eps is not None:
            eps = float(eps)
            _require(eps > 0, "measure.eps > 0 required")
        eps_list = d.get("eps_list")
        if eps_list is not None:
            eps_list = tuple(float(v) for v in eps_list)
            _require(all(v > 0 for v in eps_list), "measure.eps_list entries must be positive")
        return cls(atoms=atoms, eps=eps, eps_list=eps_list)

    def as_dict(self):
        out = {"atoms": [list(a) for a in self.atoms]}
        if self.eps is not None:
            out["eps"] = self.eps
        if self.eps_list is not None:
            out["eps_list"] = list(self.eps_list)
        return out


@dataclass(frozen=True)
class GridConfig:
    box: tuple
    nr: int
    nz: int
    n_theta: int

    @classmethod
    def parse(cls, d):
        d = _take(d, "grid", {"box", "nr", "nz", "n_theta"}, required=("box", "nr", "nz", "n_theta"))
        box = tuple(float(v) for v in d["box"])
        _require(len(box) == 4, "grid.box must be [rmin, rmax, zmin, zmax]")
        _require(0 <= box[0] < box[1] and box[2] < box[3], "grid.box must be a valid meridional box")
        nr, nz, nth = int(d["nr"]), int(d["nz"]), int(d["n_theta"])
        _require(nr >= 1 and nz >= 1, "grid.nr and grid.nz must be >= 1")
        _require(nth >= 4 and nth % 2 == 0, "grid.n_theta must be even and >= 4")
        return cls(box=box, nr=nr, nz=nz, n_theta=nth)

    def as_dict(self):
        return {"box": list(self.box), "nr": self.nr, "nz": self.nz, "n_theta": self.n_theta}


@dataclass(frozen=True)
class PicardConfig:
    tol: float = 1e-8
    max_iter: int = 30
    nodes_per_window: int = 8

    @classmethod
    def parse(cls, d):
        d = _take(d, "evolve.picard", {"tol", "max_iter", "nodes_per_window"})
        out = cls(
            tol=float(d.get("tol", 1e-8)),
            max_iter=int(d.get("max_iter", 30)),
            nodes_per_window=int(d.get("nodes_per_window", 8)),
        )
        _require(out.tol > 0, "picard.tol > 0 required")
        _require(out.max_iter >= 1, "picard.max_iter >= 1 required")
        _require(out.nodes_per_window >= 1, "picard.nodes_per_window >= 1 required")
        return out

    def as_dict(self):
        return {"tol": self.tol, "max_iter": self.max_iter, "nodes_per_window": self.nodes_per_window}


@dataclass(frozen=True)
class EvolveConfig:
    evolver: str = "rk4"
    dt: float = 0.05
    T: float = 1.0
    snapshot_every: int = 1
    picard: PicardConfig = field(default_factory=PicardConfig)

    @classmethod
    def parse(cls, d):
        d = _take(d, "evolve", {"evolver", "dt", "T", "snapshot_every", "picard"})
        out = cls(
            evolver=str(d.get("evolver", "rk4")),
            dt=float(d.get("dt", 0.05)),
            T=float(d.get("T", 1.0)),
            snapshot_every=int(d.get("snapshot_every", 1)),
            picard=PicardConfig.parse(d.get("picard")),
        )
        _require(out.evolver in ("rk4", "picard"), "evolve.evolver must be rk4 or picard")
        _require(out.dt > 0, "evolve.dt > 0 required")
        _require(out.T >= 0, "evolve.T >= 0 required")
        _require(out.snapshot_every >= 1, "evolve.snapshot_every >= 1 required")
        return out

    def as_dict(self):
        return {
            "evolver": self.evolver,
            "dt": self.dt,
            "T": self.T,
            "snapshot_every": self.snapshot_every,
            "picard": self.picard.as_dict(),
        }


@dataclass(frozen=True)
class VelocityConfig:
    cutoff: float = None
    pairwise: bool = False

    @classmethod
    def parse(cls, d):
        d = _take(d, "velocity", {"cutoff", "pairwise"})
        cutoff = d.get("cutoff")
        if cutoff is not None:
            cutoff = float(cutoff)
            _require(cutoff > 0, "velocity.cutoff > 0 required (or null)")
        return cls(cutoff=cutoff, pairwise=bool(d.get("pairwise", False)))

    def as_dict(self):
        return {"cutoff": self.cutoff, "pairwise": self.pairwise}


@dataclass(frozen=True)
class DiagnosticsConfig:
    verify_after: bool = True
    energy: bool = False

    @classmethod
    def parse(cls, d):
        d = _take(d, "diagnostics", {"verify_after", "energy"})
        return cls(
            verify_after=bool(d.get("verify_after", True)),
            energy=bool(d.get("energy", False)),
        )

    def as_dict(self):
        return {"verify_after": self.verify_after, "energy": self.energy}


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs/out"
    format: str = "csv"

    @classmethod
    def parse(cls, d):
        d = _take(d, "output", {"directory", "format"})
        out = cls(directory=str(d.get("directory", "runs/out")), format=str(d.get("format", "csv")))
        _require(out.format in ("csv", "jsonl"), "output.format must be csv or jsonl")
        return out

    def as_dict(self):
        return {"directory": self.directory, "format": self.format}


@dataclass(frozen=True)
class SweepConfig:
    probes: tuple = ()
    T: float = 0.1
    dt: float = 0.05

    @classmethod
    def parse(cls, d):
        d = _take(d, "sweep", {"probes", "T", "dt"})
        probes = tuple(tuple(float(v) for v in row) for row in d.get("probes", ()))
        for row in probes:
            _require(len(row) == 3, "sweep.probes entries must be 3D points")
        out = cls(probes=probes, T=float(d.get("T", 0.1)), dt=float(d.get("dt", 0.05)))
        _require(out.T >= 0 and out.dt > 0, "sweep.T >= 0 and sweep.dt > 0 required")
        return out

    def as_dict(self):
        return {"probes": [list(p) for p in self.probes], "T": self.T, "dt": self.dt}


@dataclass(frozen=True)
class SimulationConfig:
    alpha: float
    grid: GridConfig
    profile: ProfileConfig = None
    measure: MeasureConfig = None
    evolve: EvolveConfig = field(default_factory=EvolveConfig)
    velocity: VelocityConfig = field(default_factory=VelocityConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = None
    seed: int = 0
    schema_version: int = SCHEMA_VERSION


_TOP_KEYS = {
    "schema_version", "alpha", "profile", "measure", "grid", "evolve",
    "velocity", "diagnostics", "output", "sweep", "seed",
}


def parse_config(text: str) -> SimulationConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    _require(isinstance(raw, dict), "config must be a mapping")
    raw = _take(raw, "top level", _TOP_KEYS, required=("alpha", "grid"))

    version = int(raw.get("schema_version", SCHEMA_VERSION))
    _require(version == SCHEMA_VERSION, f"unsupported schema_version {version}")

    alpha = float(raw["alpha"])
    _require(alpha > 0, "alpha > 0 required")

    profile = ProfileConfig.parse(raw["profile"]) if raw.get("profile") is not None else None
    measure = MeasureConfig.parse(raw["measure"]) if raw.get("measure") is not None else None
    _require(
        (profile is None) != (measure is None),
        "exactly one of 'profile' or 'measure' must be given",
    )

    return SimulationConfig(
        alpha=alpha,
        grid=GridConfig.parse(raw["grid"]),
        profile=profile,
        measure=measure,
        evolve=EvolveConfig.parse(raw.get("evolve")),
        velocity=VelocityConfig.parse(raw.get("velocity")),
        diagnostics=DiagnosticsConfig.parse(raw.get("diagnostics")),
        output=OutputConfig.parse(raw.get("output")),
        sweep=SweepConfig.parse(raw["sweep"]) if raw.get("sweep") is not None else None,
        seed=int(raw.get("seed", 0)),
        schema_version=version,
    )


def load_config(path) -> SimulationConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def serialize_config(cfg: SimulationConfig) -> str:
    out = {
        "schema_version": cfg.schema_version,
        "alpha": cfg.alpha,
        "grid": cfg.grid.as_dict(),
        "evolve": cfg.evolve.as_dict(),
        "velocity": cfg.velocity.as_dict(),
        "diagnostics": cfg.diagnostics.as_dict(),
        "output": cfg.output.as_dict(),
        "seed": cfg.seed,
    }
    if cfg.profile is not None:
        out["profile"] = cfg.profile.as_dict()
    if cfg.measure is not None:
        out["measure"] = cfg.measure.as_dict()
    if cfg.sweep is not None:
        out["sweep"] = cfg.sweep.as_dict()
    return yaml.safe_dump(out, sort_keys=True, default_flow_style=None)


def build_initial_cloud(cfg: SimulationConfig):
    g = cfg.grid
    if cfg.profile is not None:
        profile = PROFILES[cfg.profile.name](**dict(cfg.profile.params))
        return init_from_profile(profile, g.box, g.nr, g.nz, g.n_theta, cfg.alpha)
    _require(cfg.measure.eps is not None, "measure.eps required to build a mollified cloud")
    data = MeasureData.from_atoms(cfg.measure.atoms)
    return mollify(data, cfg.measure.eps, (g.box, g.nr, g.nz), g.n_theta, cfg.alpha)


def evolve_controls(cfg: SimulationConfig) -> EvolveControls:
    return EvolveControls(
        evolver=cfg.evolve.evolver,
        dt=cfg.evolve.dt,
        snapshot_every=cfg.evolve.snapshot_every,
        picard_tol=cfg.evolve.picard.tol,
        picard_max_iter=cfg.evolve.picard.max_iter,
        picard_nodes=cfg.evolve.picard.nodes_per_window,
        cutoff=cfg.velocity.cutoff,
        pairwise=cfg.velocity.pairwise,
    )
