"""Built-in scenario presets and the builder turning a configuration into solver inputs.

Initial fields are written symbolically. Compactly supported pulses use the
polynomial bump ``q = (1 - r^2/a^2)^k`` inside the ball, so derivatives of
order below ``k`` are continuous and exact charge densities are available.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .config import ScenarioConfig, config_from_dict
from .diagnostics import ConeSpec, propagation_speed_bound
from .grid import FieldState, GridSpec, boundary_matrix
from .initial_data import DataBundle
from .linear import StepperConfig
from .materials import ConstantLaw, KerrLaw, MaterialLaw, StateDomain
from .quasilinear import PicardConfig
from .sources import T, X1, X2, X3, SympySource

XS = (X1, X2, X3)


def sym_curl(v):
    return [sp.diff(v[2], X2) - sp.diff(v[1], X3),
            sp.diff(v[0], X3) - sp.diff(v[2], X1),
            sp.diff(v[1], X1) - sp.diff(v[0], X2)]


def sym_div(v):
    return sum(sp.diff(c, x) for c, x in zip(v, XS))


def bump(center, radius: float, power: int):
    r2 = sum((x - c) ** 2 for x, c in zip(XS, center))
    return (1 - r2 / sp.Float(radius) ** 2) ** power


def evaluate(exprs, grid: GridSpec, t: float = 0.0, mask: np.ndarray | None = None) -> np.ndarray:
    """Evaluate expressions in ``t, x1, x2, x3`` on the grid, optionally zeroed outside ``mask``."""
    x = grid.coords()
    out = np.empty((len(exprs),) + grid.shape)
    for i, e in enumerate(exprs):
        fn = sp.lambdify((T, X1, X2, X3), e, "numpy")
        out[i] = np.broadcast_to(fn(t, *x), grid.shape)
    if mask is not None:
        out = out * mask
    return out


def ball_mask(grid: GridSpec, center, radius: float) -> np.ndarray:
    x1, x2, x3 = grid.coords()
    return ((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2 + (x3 - center[2]) ** 2) < radius**2


@dataclass
class Scenario:
    config: ScenarioConfig
    law: MaterialLaw
    bundle: DataBundle
    picard: PicardConfig
    exact: Callable[[float], np.ndarray] | None = None
    cone: ConeSpec | None = None
    perturbation: np.ndarray | None = None

    @property
    def name(self) -> str:
        return self.config.name

    @property
    def m(self) -> int:
        return self.config.solver.m

    @property
    def horizon(self) -> float:
        return self.config.solver.horizon

    @property
    def grid(self) -> GridSpec:
        return self.bundle.grid


# -- presets --------------------------------------------------------------

PRESETS: dict[str, tuple[str, dict]] = {
    "vacuum_pulse": (
        "divergence-free compact pulse in vacuum above the conducting face",
        {"law": {"kind": "vacuum"},
         "data": {"preset": "pulse", "amplitude": 1.0, "amplitude_h": 0.5, "radius": 0.3},
         "solver": {"tau": 0.05, "horizon": 0.2},
         "diagnostics": {"divergence": True, "cone": True, "cone_radius": 0.35}},
    ),
    "vacuum_plane_wave": (
        "sinusoidal plane wave in a periodic box with a known exact solution",
        {"law": {"kind": "vacuum"},
         "grid": {"boundary": ["periodic", "periodic", "periodic"]},
         "data": {"preset": "plane_wave", "amplitude": 1.0, "wavenumber": 1},
         "solver": {"tau": 0.125, "horizon": 0.25, "dissipation": 0.0}},
    ),
    "pec_bounce": (
        "planar vacuum pulse reflecting off the conducting face (energy test)",
        {"law": {"kind": "vacuum"},
         "grid": {"cells": [4, 4, 64], "extent": [0.0625, 0.0625, 1.0]},
         "data": {"preset": "planar_pulse", "amplitude": 1.0, "radius": 0.25, "power": 4,
                  "center": [0.0, 0.0, 0.5]},
         "solver": {"tau": 0.25, "horizon": 1.0, "dissipation": 0.0}},
    ),
    "kerr_pulse": (
        "small-amplitude compact pulse in a Kerr medium",
        {"law": {"kind": "kerr", "vartheta": 1.0},
         "data": {"preset": "pulse", "amplitude": 0.3, "amplitude_h": 0.15, "radius": 0.3},
         "solver": {"tau": 0.05, "horizon": 0.1},
         "diagnostics": {"divergence": True, "cone": True, "cone_radius": 0.35}},
    ),
    "kerr_ode_mode": (
        "spatially uniform Kerr fields with unit conductivity: a six-dimensional ODE",
        {"law": {"kind": "kerr", "vartheta": 0.5, "conductivity_scale": 1.0},
         "grid": {"cells": [4, 4, 4], "boundary": ["periodic", "periodic", "periodic"]},
         "data": {"preset": "uniform", "e0": [0.8, 0.3, 0.0], "h0": [0.0, 0.2, 0.1]},
         "solver": {"tau": 0.1, "horizon": 0.5, "dt": 0.005, "dissipation": 0.0}},
    ),
    "kerr_ode_blowup": (
        "uniform Kerr fields with anti-damping conductivity; the Lipschitz monitor fires",
        {"law": {"kind": "kerr", "vartheta": 0.1, "conductivity_scale": -10.0},
         "grid": {"cells": [4, 4, 4], "boundary": ["periodic", "periodic", "periodic"]},
         "data": {"preset": "uniform", "e0": [1.0, 0.0, 0.0], "h0": [0.0, 0.0, 0.0]},
         "solver": {"tau": 0.1, "horizon": 2.5, "dt": 0.005, "dissipation": 0.0,
                    "lipschitz_threshold": 10.0},
         "diagnostics": {"energy": False}},
    ),
    "manufactured": (
        "manufactured smooth solution with sources and boundary data (convergence test)",
        {"law": {"kind": "constant",
                 "chi": [2.0, 0.5, 0.0, 0.0, 0.0, 0.0,
                         0.5, 2.0, 0.0, 0.0, 0.0, 0.0,
                         0.0, 0.0, 1.5, 0.0, 0.0, 0.0,
                         0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
                         0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
                         0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                 "sigma": [0.5 if (i == j and i < 3) else 0.0 for i in range(6) for j in range(6)]},
         "data": {"preset": "manufactured", "amplitude": 1.0},
         "solver": {"tau": 0.1, "horizon": 0.1, "dissipation": 0.0}},
    ),
    "cone_check": (
        "compact vacuum pulse of radius 0.2 checked against the forward cone",
        {"law": {"kind": "vacuum"},
         "grid": {"cells": [32, 32, 32]},
         "data": {"preset": "pulse", "amplitude": 1.0, "amplitude_h": 0.5, "radius": 0.2},
         "solver": {"tau": 0.05, "horizon": 0.1},
         "diagnostics": {"cone": True, "cone_radius": 0.25, "energy": False}},
    ),
    "continuity_sweep": (
        "Kerr pulse perturbed along a direction touching the conducting face",
        {"law": {"kind": "kerr", "vartheta": 1.0},
         "data": {"preset": "pulse", "amplitude": 0.3, "amplitude_h": 0.15, "radius": 0.3},
         "solver": {"tau": 0.05, "horizon": 0.05},
         "diagnostics": {"continuity": True, "energy": False}},
    ),
}


def list_scenarios() -> list[tuple[str, str]]:
    return [(name, desc) for name, (desc, _) in PRESETS.items()]


def preset_config(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown scenario {name!r}")
    base = ScenarioConfig()
    base.scenario.name = name
    return config_from_dict(base, copy.deepcopy(PRESETS[name][1]))


# -- builders -------------------------------------------------------------

def build_law(cfg: ScenarioConfig) -> MaterialLaw:
    L = cfg.law
    domain = StateDomain.ball(L.domain_radius) if L.domain_radius > 0 else StateDomain()
    if L.kind == "constant":
        sigma = np.array(L.sigma).reshape(6, 6) if L.sigma else np.zeros((6, 6))
        return ConstantLaw(np.array(L.chi).reshape(6, 6), sigma, state_domain=domain)
    vt = L.vartheta if L.kind == "kerr" else 0.0
    return KerrLaw(vt, L.conductivity_scale, L.conductivity_quadratic, L.eta, domain)


def build_grid(cfg: ScenarioConfig) -> GridSpec:
    G = cfg.grid
    return GridSpec(G.cells, tuple(e / c for e, c in zip(G.extent, G.cells)), G.origin, G.boundary)


def build_stepper(cfg: ScenarioConfig) -> StepperConfig:
    S = cfg.solver
    return StepperConfig(S.cfl, S.penalty, 4, S.dissipation, S.dt if S.dt > 0 else None)


def build_picard(cfg: ScenarioConfig) -> PicardConfig:
    S = cfg.solver
    return PicardConfig(
        slab_width=S.tau, max_iterations=S.max_iterations, fp_tolerance=S.fp_tolerance,
        contraction_warn=S.contraction_warn, radius_R=S.radius_R if S.radius_R > 0 else None,
        kappa_guard=S.kappa_guard if S.kappa_guard >= 0 else None,
        lipschitz_threshold=S.lipschitz_threshold, max_halvings=S.max_halvings, gamma=S.gamma,
        stepper=build_stepper(cfg),
    )


def _theta_sym(law: MaterialLaw, E):
    """Electric displacement for symbolic E (Kerr or constant laws)."""
    if isinstance(law, ConstantLaw):
        return None
    vt = law.vartheta
    s = sum(e * e for e in E)
    return [e + vt * s * e for e in E]


def _manufactured_exprs(amp: float):
    """Smooth solution, periodic in x1 and x2, vanishing to fifth order at x3 = 1."""
    w = (1 - X3) ** 5
    two_pi = 2 * sp.pi
    return [
        amp * w * (1 + X3) * sp.sin(two_pi * X1 + T),
        amp * w * sp.cos(two_pi * X2 - T) * (1 + X3 / 2),
        amp * w * sp.sin(two_pi * (X1 + X2) + 2 * T),
        amp * w * sp.cos(two_pi * X1 - T) * (1 - X3 / 3),
        amp * w * sp.sin(two_pi * X2 + 3 * T),
        amp * w * sp.cos(two_pi * (X1 - X2) + T) * X3,
    ]


def build_data(cfg: ScenarioConfig, law: MaterialLaw, grid: GridSpec):
    """Initial state, sources, exact solution (when known) and perturbation direction."""
    D = cfg.data
    t0 = 0.0
    exact = None
    f = g = None
    rho0: np.ndarray | str = "derived"
    if D.preset == "zero":
        u0 = grid.zeros()
        rho0 = np.zeros(grid.shape)
    elif D.preset == "uniform":
        u0 = grid.zeros()
        for i, v in enumerate(list(D.e0) + list(D.h0)):
            u0[i] = v
        rho0 = np.zeros(grid.shape)
    elif D.preset == "pulse":
        q = bump(D.center, D.radius, D.power)
        E = [D.amplitude * c for c in sym_curl([0, 0, q])]
        H = [D.amplitude_h * c for c in sym_curl([q, 0, 0])]
        mask = ball_mask(grid, D.center, D.radius)
        u0 = evaluate(E + H, grid, mask=mask)
        theta = _theta_sym(law, E)
        rho = sym_div(theta) if theta is not None else sp.Integer(0)
        rho0 = evaluate([rho], grid, mask=mask)[0]
    elif D.preset == "planar_pulse":
        c3, r = D.center[2], D.radius
        z = X3 + T
        b = D.amplitude * (1 - ((z - c3) / r) ** 2) ** D.power
        exprs = [b, 0, 0, 0, -b, 0]

        def exact(t, exprs=exprs):
            zz = grid.coords()[2] + t
            return evaluate(exprs, grid, t, mask=np.abs(zz - c3) < r)

        u0 = exact(t0)
        rho0 = np.zeros(grid.shape)
    elif D.preset == "plane_wave":
        k = 2 * sp.pi * D.wavenumber / cfg.grid.extent[2]
        s = D.amplitude * sp.sin(k * (X3 - T))
        exprs = [s, 0, 0, 0, s, 0]

        def exact(t, exprs=exprs):
            return evaluate(exprs, grid, t)

        u0 = exact(t0)
        rho0 = np.zeros(grid.shape)
    elif D.preset == "manufactured":
        if not isinstance(law, ConstantLaw) and not law.state_independent:
            raise ValueError("the manufactured preset needs a linear law")
        U = _manufactured_exprs(D.amplitude)
        chi = law.chi_matrix if isinstance(law, ConstantLaw) else np.eye(6)
        sig = law.sigma_matrix if isinstance(law, ConstantLaw) else law.sigma(np.zeros((6, 1, 1, 1)))[..., 0, 0, 0]
        Hc = sym_curl(U[3:])
        Ec = sym_curl(U[:3])
        Au = [-c for c in Hc] + list(Ec)
        fexprs = []
        for i in range(6):
            fexprs.append(sum(sp.Float(chi[i, j]) * sp.diff(U[j], T) + sp.Float(sig[i, j]) * U[j]
                              for j in range(6)) + Au[i])
        f = SympySource(fexprs, grid)
        if grid.has_pec:
            B = boundary_matrix(grid.pec_normal)
            gexprs = [sum(sp.Float(B[r, j]) * U[j] for j in range(6)) for r in range(3)]
            g = SympySource(gexprs, grid, face=True)

        def exact(t, exprs=U):
            return evaluate(exprs, grid, t)

        u0 = exact(t0)
        Dsym = [sum(sp.Float(chi[i, j]) * U[j] for j in range(6)) for i in range(3)]
        rho0 = evaluate([sym_div(Dsym)], grid, t0)[0]
    else:
        raise ValueError(f"unknown data preset {D.preset!r}")
    bundle = DataBundle(t0, FieldState(grid, t0, u0), f, g, rho0)
    return bundle, exact


def perturbation_direction(grid: GridSpec) -> np.ndarray:
    """Smooth direction whose tangential E trace on the conducting face is nonzero."""
    exprs = [sp.cos(2 * sp.pi * X1) * (1 - X3) ** 4, 0, 0, 0, sp.sin(2 * sp.pi * X2) * (1 - X3) ** 4, 0]
    v = evaluate(exprs, grid)
    return v / np.max(np.abs(v))


def build_scenario(cfg: ScenarioConfig | str) -> Scenario:
    if isinstance(cfg, str):
        cfg = preset_config(cfg)
    law = build_law(cfg)
    grid = build_grid(cfg)
    bundle, exact = build_data(cfg, law, grid)
    cone = None
    if cfg.diagnostics.cone:
        speed = cfg.diagnostics.cone_speed or propagation_speed_bound(law)
        cone = ConeSpec(tuple(cfg.data.center), cfg.diagnostics.cone_radius, speed, "forward", bundle.t0)
    v = perturbation_direction(grid) if cfg.diagnostics.continuity else None
    return Scenario(cfg, law, bundle, build_picard(cfg), exact, cone, v)
