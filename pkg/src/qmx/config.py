"""Scenario configuration: sectioned TOML text with strict keys and key-path errors.

Every section is optional except ``[scenario] name``; missing values come from
the named preset, so a two-line file is a complete configuration.
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field, fields

import tomli
import tomli_w

from .grid import BOUNDARY_MODES, DEFAULT_CELL_CAP


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending key (e.g. ``solver.cfl``)."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class ScenarioSection:
    name: str = ""
    seed: int = 0


@dataclass
class LawSection:
    kind: str = "vacuum"  # vacuum | kerr | constant
    vartheta: float = 0.0
    conductivity_scale: float = 0.0
    conductivity_quadratic: float = 0.0
    eta: float = 1.0
    domain_radius: float = 0.0  # 0 means the whole state space
    chi: list[float] = field(default_factory=list)  # 36 entries for kind = "constant"
    sigma: list[float] = field(default_factory=list)


@dataclass
class GridSection:
    cells: list[int] = field(default_factory=lambda: [16, 16, 16])
    extent: list[float] = field(default_factory=lambda: [1.0, 1.0, 1.0])
    origin: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    boundary: list[str] = field(default_factory=lambda: ["periodic", "periodic", "pec_bottom_open_top"])


@dataclass
class DataSection:
    preset: str = "pulse"  # pulse | planar_pulse | plane_wave | uniform | manufactured | zero
    amplitude: float = 1.0
    amplitude_h: float = 0.0
    radius: float = 0.3
    center: list[float] = field(default_factory=lambda: [0.5, 0.5, 0.5])
    power: int = 6
    wavenumber: int = 1
    e0: list[float] = field(default_factory=lambda: [1.0, 0.0, 0.0])
    h0: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])


@dataclass
class SolverSection:
    m: int = 3
    tau: float = 0.05
    horizon: float = 0.1
    cfl: float = 0.5
    penalty: float = 1.0
    dissipation: float = 0.02
    dt: float = 0.0  # 0 selects the CFL step
    fp_tolerance: float = 1e-9
    max_iterations: int = 50
    contraction_warn: float = 0.9
    lipschitz_threshold: float = 1e6
    kappa_guard: float = -1.0  # negative selects half the initial distance
    radius_R: float = 0.0  # 0 disables the advisory ball
    max_halvings: int = 6
    gamma: float = 0.0


@dataclass
class DiagnosticsSection:
    divergence: bool = False
    cone: bool = False
    continuity: bool = False
    energy: bool = True
    cone_radius: float = 0.35
    cone_speed: float = 0.0  # 0 selects 3 / eta
    cone_tolerance: float = 1e-6
    deltas: list[float] = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])


@dataclass
class OutputSection:
    dir: str = "qmx_out"
    dump_every: int = 0  # 0 disables field dumps


@dataclass
class ScenarioConfig:
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    law: LawSection = field(default_factory=LawSection)
    grid: GridSection = field(default_factory=GridSection)
    data: DataSection = field(default_factory=DataSection)
    solver: SolverSection = field(default_factory=SolverSection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def name(self) -> str:
        return self.scenario.name

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


LAW_KINDS = ("vacuum", "kerr", "constant")
DATA_PRESETS = ("pulse", "planar_pulse", "plane_wave", "uniform", "manufactured", "zero")


def _check_type(path: str, value, default):
    """Coerce ``value`` to the type of ``default`` or raise."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise TypeError(path)


def _check_list(path: str, value, elem_type):
    if not isinstance(value, list):
        raise ConfigError(path, f"expected a list, got {value!r}")
    return [_check_type(f"{path}[{i}]", v, elem_type) for i, v in enumerate(value)]


_LIST_TYPES = {
    ("law", "chi"): 0.0, ("law", "sigma"): 0.0,
    ("grid", "cells"): 0, ("grid", "extent"): 0.0, ("grid", "origin"): 0.0, ("grid", "boundary"): "",
    ("data", "center"): 0.0, ("data", "e0"): 0.0, ("data", "h0"): 0.0,
    ("diagnostics", "deltas"): 0.0,
}


def _merge(cfg: ScenarioConfig, doc: dict) -> ScenarioConfig:
    out = copy.deepcopy(cfg)
    sections = {f.name for f in fields(ScenarioConfig)}
    for sec, body in doc.items():
        if sec not in sections:
            raise ConfigError(sec, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(sec, "expected a table")
        target = getattr(out, sec)
        known = {f.name for f in fields(target)}
        for key, value in body.items():
            path = f"{sec}.{key}"
            if key not in known:
                raise ConfigError(path, "unknown key")
            default = getattr(target, key)
            if isinstance(default, list):
                value = _check_list(path, value, _LIST_TYPES[(sec, key)])
            else:
                value = _check_type(path, value, default)
            setattr(target, key, value)
    return out


def _require(ok: bool, path: str, message: str):
    if not ok:
        raise ConfigError(path, message)


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    s, law, g, d, sv, dg = cfg.scenario, cfg.law, cfg.grid, cfg.data, cfg.solver, cfg.diagnostics
    _require(bool(s.name), "scenario.name", "required")
    _require(law.kind in LAW_KINDS, "law.kind", f"must be one of {LAW_KINDS}")
    _require(law.vartheta >= 0, "law.vartheta", "must be >= 0")
    _require(law.eta > 0, "law.eta", "must be > 0")
    _require(law.domain_radius >= 0, "law.domain_radius", "must be >= 0")
    if law.kind == "constant":
        _require(len(law.chi) == 36, "law.chi", "needs 36 entries (row-major 6x6)")
        _require(len(law.sigma) in (0, 36), "law.sigma", "needs 0 or 36 entries")
    _require(len(g.cells) == 3 and all(c >= 1 for c in g.cells), "grid.cells", "three positive integers")
    _require(len(g.extent) == 3 and all(e > 0 for e in g.extent), "grid.extent", "three positive lengths")
    _require(len(g.origin) == 3, "grid.origin", "three coordinates")
    _require(len(g.boundary) == 3 and all(b in BOUNDARY_MODES for b in g.boundary), "grid.boundary",
             f"three entries from {BOUNDARY_MODES}")
    _require(all(b != "pec_bottom_open_top" for b in g.boundary[:2]), "grid.boundary",
             "the conducting face must be normal to the third axis")
    nodes = 1
    for c, b in zip(g.cells, g.boundary):
        nodes *= c if b == "periodic" else c + 1
    _require(nodes <= DEFAULT_CELL_CAP, "grid.cells", f"{nodes} nodes exceed the cap {DEFAULT_CELL_CAP}")
    _require(d.preset in DATA_PRESETS, "data.preset", f"must be one of {DATA_PRESETS}")
    _require(d.radius > 0, "data.radius", "must be > 0")
    _require(len(d.center) == 3, "data.center", "three coordinates")
    _require(d.power >= 4, "data.power", "must be >= 4 so the bump is C^3")
    _require(len(d.e0) == 3 and len(d.h0) == 3, "data.e0", "three components each for e0 and h0")
    _require(1 <= sv.m <= 3, "solver.m", "must lie in 1..3")
    _require(sv.tau > 0, "solver.tau", "must be > 0")
    _require(sv.horizon > 0, "solver.horizon", "must be > 0")
    _require(0 < sv.cfl <= 1, "solver.cfl", "must lie in (0, 1]")
    _require(sv.penalty >= 1, "solver.penalty", "must be >= 1")
    _require(sv.dissipation >= 0, "solver.dissipation", "must be >= 0")
    _require(sv.dt >= 0, "solver.dt", "must be >= 0 (0 selects the CFL step)")
    _require(sv.fp_tolerance > 0, "solver.fp_tolerance", "must be > 0")
    _require(sv.max_iterations >= 1, "solver.max_iterations", "must be >= 1")
    _require(sv.contraction_warn > 0, "solver.contraction_warn", "must be > 0")
    _require(sv.lipschitz_threshold > 0, "solver.lipschitz_threshold", "must be > 0")
    _require(sv.radius_R >= 0, "solver.radius_R", "must be >= 0")
    _require(sv.max_halvings >= 0, "solver.max_halvings", "must be >= 0")
    _require(sv.gamma >= 0, "solver.gamma", "must be >= 0")
    _require(dg.cone_radius > 0, "diagnostics.cone_radius", "must be > 0")
    _require(dg.cone_speed >= 0, "diagnostics.cone_speed", "must be >= 0")
    _require(dg.cone_tolerance > 0, "diagnostics.cone_tolerance", "must be > 0")
    _require(len(dg.deltas) >= 1 and all(x > 0 for x in dg.deltas), "diagnostics.deltas", "positive numbers")
    _require(cfg.output.dump_every >= 0, "output.dump_every", "must be >= 0")
    return cfg


def parse_config(text: str) -> ScenarioConfig:
    """Parse TOML text, fill defaults from the named preset and validate."""
    from .scenarios import preset_config, PRESETS

    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("", f"syntax error: {exc}") from None
    name = doc.get("scenario", {}).get("name") if isinstance(doc.get("scenario"), dict) else None
    if not isinstance(name, str) or not name:
        raise ConfigError("scenario.name", "required")
    if name not in PRESETS:
        raise ConfigError("scenario.name", f"unknown scenario {name!r}; see `qmx list`")
    return validate(_merge(preset_config(name), doc))


def emit_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def config_from_dict(base: ScenarioConfig, doc: dict) -> ScenarioConfig:
    return validate(_merge(base, doc))
