"""Case definitions, presets and the run driver.

A case document is INI-style text with sections ``[case]``, ``[scheme]``,
``[boundaries]`` and ``[output]``; every key is a :class:`CaseSpec` field
name (boundary keys are face names). Values are nondimensional: lengths in
units of ``L``, time in units of ``L^2/alpha_l`` and temperature as
``(T - T_f) / dT``.

Boundary values are written ``dirichlet:<theta>``, ``neumann``,
``bounceback`` or ``periodic``. ``dirichlet`` maps to the scheme's own
closure (on q for IREBM, equilibrium moment closure otherwise); ``neumann``
is the zero-gradient closure on q for IREBM and bounce-back otherwise.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from lbstefan.analytic import (
    AnalyticSolution,
    StefanCaseParams,
    exact_theta,
    initial_time_for_front,
    solve_lambda,
)
from lbstefan.boundary import (
    BounceBack,
    BoundaryPlan,
    BoundarySpec,
    DirichletEquilibrium,
    DirichletOnQ,
    NeumannOnQ,
    Periodic,
    face_names,
)
from lbstefan.diagnostics import (
    InterfaceTrace,
    linf_error,
    locate_interface_1d,
    locate_interface_liquid_fraction,
)
from lbstefan.enthalpy import liquid_fraction_from_H, phi_delta
from lbstefan.lattice import LATTICE_KINDS, make_lattice
from lbstefan.schemes import (
    Method,
    SchemeConfig,
    SchemeError,
    initialize_state,
    step,
    tau_from_timestep,
    timestep_from_tau,
    total_energy,
)

log = logging.getLogger(__name__)

__all__ = [
    "CaseSpec",
    "CaseError",
    "RunReport",
    "PRESETS",
    "preset",
    "parse_case",
    "serialize_case",
    "apply_overrides",
    "run_case",
    "build_boundaries",
    "initial_field",
]

SECTIONS = {
    "case": (
        "name", "dimension", "lattice", "N", "side", "Ste", "theta0", "theta_initial",
        "initial", "initial_table", "x_front0", "t_start", "t_end", "time_scale",
    ),
    "scheme": ("method", "tau", "dt", "delta", "newton_tol", "newton_max_iter", "inner_tol", "inner_max_iter"),
    "output": ("output_dir", "outputs", "sample_every", "snapshot_times", "isoline_levels", "front_metric"),
}
OUTPUT_KINDS = ("trace", "profile", "diagonal", "isolines", "field")
INITIAL_KINDS = ("stefan", "uniform", "table")


class CaseError(ValueError):
    """Invalid case document or parameters; the message names the key path."""


@dataclass
class CaseSpec:
    name: str = "case"
    dimension: int = 1
    lattice: str = "D1Q3"
    N: int = 101  # nodes per axis
    side: float = 1.0
    Ste: float = 1.0
    theta0: float = -0.5
    theta_initial: float = 1.0
    initial: str = "uniform"
    initial_table: str | None = None
    x_front0: float = 0.01
    t_start: float | None = None
    t_end: float = 0.01
    time_scale: float = 1.0  # seconds per unit nondimensional time
    method: str = "IREBM"
    tau: float | None = None
    dt: float | None = None
    delta: float = 0.005
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    inner_tol: float = 1e-8
    inner_max_iter: int = 100
    boundaries: dict = field(default_factory=dict)
    output_dir: str | None = None
    outputs: tuple = ()
    sample_every: int | None = None
    snapshot_times: tuple = ()
    isoline_levels: tuple = ()
    front_metric: str = "zero"

    # -- derived -------------------------------------------------------------

    @property
    def dx(self) -> float:
        return self.side / (self.N - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dimension

    @property
    def time_step(self) -> float:
        return self.dt if self.dt is not None else timestep_from_tau(self.tau, self.dx)

    @property
    def relaxation(self) -> float:
        return self.tau if self.tau is not None else tau_from_timestep(self.dt, self.dx)

    def oracle(self) -> AnalyticSolution | None:
        if self.initial != "stefan":
            return None
        return solve_lambda(StefanCaseParams(self.Ste, self.theta0))

    @property
    def start_time(self) -> float:
        if self.t_start is not None:
            return self.t_start
        if self.initial == "stefan":
            return initial_time_for_front(self.oracle(), self.x_front0)
        return 0.0

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.start_time) / self.time_step))

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(
            Method(self.method), self.relaxation, self.Ste, self.delta,
            newton_tol=self.newton_tol, newton_max_iter=self.newton_max_iter,
            inner_tol=self.inner_tol, inner_max_iter=self.inner_max_iter,
        )

    def digest(self) -> str:
        return hashlib.sha256(serialize_case(self).encode()).hexdigest()[:16]

    def validate(self) -> CaseSpec:
        def bad(path, msg):
            raise CaseError(f"{path}: {msg}")

        if self.dimension not in (1, 2):
            bad("case.dimension", f"must be 1 or 2, got {self.dimension}")
        if self.lattice.upper() not in LATTICE_KINDS:
            bad("case.lattice", f"unknown lattice {self.lattice!r}")
        self.lattice = self.lattice.upper()
        if make_lattice(self.lattice).d != self.dimension:
            bad("case.lattice", f"{self.lattice} does not match dimension {self.dimension}")
        if self.N < 8:
            bad("case.N", f"must be at least 8, got {self.N}")
        if not self.side > 0:
            bad("case.side", "must be positive")
        if not self.Ste > 0:
            bad("case.Ste", "must be positive")
        if self.initial not in INITIAL_KINDS:
            bad("case.initial", f"must be one of {INITIAL_KINDS}")
        if self.initial == "stefan":
            if self.dimension != 1:
                bad("case.initial", "the similarity profile is 1D only")
            if not self.theta0 < 0:
                bad("case.theta0", "must be negative")
            if not self.x_front0 > 0:
                bad("case.x_front0", "must be positive")
        if self.initial == "table" and not self.initial_table:
            bad("case.initial_table", "required when initial = table")
        try:
            Method(str(self.method).upper())
        except ValueError:
            bad("scheme.method", f"unknown method {self.method!r}")
        self.method = str(self.method).upper()
        if (self.tau is None) == (self.dt is None):
            bad("scheme.tau", "exactly one of tau and dt must be given")
        if self.tau is not None and not self.tau > 0.5:
            bad("scheme.tau", f"must exceed 1/2, got {self.tau}")
        if self.dt is not None:
            if not self.dt > 0:
                bad("scheme.dt", "must be positive")
            if not tau_from_timestep(self.dt, self.dx) > 0.5:
                bad("scheme.dt", "derived tau must exceed 1/2")
        if self.method == "IREBM" and not self.delta > 0:
            bad("scheme.delta", "must be positive for IREBM")
        if not self.t_end > self.start_time:
            bad("case.t_end", f"must exceed the start time {self.start_time:.6g}")
        faces = face_names(self.dimension)
        for face in faces:
            if face not in self.boundaries:
                bad(f"boundaries.{face}", "missing")
        for face in self.boundaries:
            if face not in faces:
                bad(f"boundaries.{face}", "unknown face")
        try:
            build_boundaries(self).validate(self.dimension, self.method)
        except ValueError as exc:
            bad("boundaries", str(exc))
        for kind in self.outputs:
            if kind not in OUTPUT_KINDS:
                bad("output.outputs", f"unknown output {kind!r}; expected {OUTPUT_KINDS}")
        if self.front_metric not in ("zero", "liquid_fraction"):
            bad("output.front_metric", "must be 'zero' or 'liquid_fraction'")
        if self.sample_every is not None and self.sample_every < 1:
            bad("output.sample_every", "must be >= 1")
        return self


# -- presets ----------------------------------------------------------------------


def _stefan1d() -> CaseSpec:
    # aluminium bar: rho 2500, c 1 kJ/kg/K, k 0.2 kW/m/K, h_sl 350 kJ/kg,
    # T_f 500, T_h 600, T_c 450 (deg C), L = 1 m
    alpha, L = 8e-5, 1.0
    T_f, T_h, T_c = 500.0, 600.0, 450.0
    c, h_sl = 1.0, 350.0
    dT = T_h - T_f
    time_scale = L**2 / alpha
    theta_c = (T_c - T_f) / dT
    return CaseSpec(
        name="stefan1d", dimension=1, lattice="D1Q3", N=801, side=1.0,
        Ste=c * dT / h_sl, theta0=theta_c, initial="stefan", x_front0=0.01,
        t_end=160.0 / time_scale, time_scale=time_scale,
        method="IREBM", tau=0.62, delta=0.005,
        boundaries={"x-": "dirichlet:1", "x+": f"dirichlet:{theta_c:g}"},
        outputs=("trace", "profile"),
    )


def _freeze2d() -> CaseSpec:
    # water in an 8 m cavity, lower-left quarter: rho 1000, c 1.762 kJ/kg/K,
    # alpha 1.26e-6 m^2/s, h_sl 338 kJ/kg, T_f 0, T_i 10, T_wall -20 (deg C)
    alpha, L = 1.26e-6, 1.0
    T_f, T_i, T_w = 0.0, 10.0, -20.0
    c, h_sl = 1.762, 338.0
    dT = T_i - T_f
    time_scale = L**2 / alpha
    theta_w = (T_w - T_f) / dT
    return CaseSpec(
        name="freeze2d", dimension=2, lattice="D2Q5", N=201, side=4.0,
        Ste=c * dT / h_sl, theta0=theta_w, theta_initial=(T_i - T_f) / dT, initial="uniform",
        t_end=20 * 3600.0 / time_scale, time_scale=time_scale,
        method="IREBM", tau=0.84, delta=2e-2,
        boundaries={"x-": f"dirichlet:{theta_w:g}", "y-": f"dirichlet:{theta_w:g}", "x+": "neumann", "y+": "neumann"},
        outputs=("diagonal", "isolines"),
        isoline_levels=(-0.5, 0.0, 0.5),
    )


PRESETS = {"stefan1d": _stefan1d, "freeze2d": _freeze2d}


def preset(name: str, **overrides) -> CaseSpec:
    if name not in PRESETS:
        raise CaseError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    spec = PRESETS[name]()
    if "tau" in overrides and "dt" not in overrides:
        overrides["dt"] = None
    if "dt" in overrides and "tau" not in overrides:
        overrides["tau"] = None
    spec = dataclasses.replace(spec, **overrides)
    return spec.validate()


# -- parsing ------------------------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(CaseSpec)}
_TUPLE_FLOAT = {"snapshot_times", "isoline_levels"}
_TUPLE_STR = {"outputs"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    f = _FIELDS[key]
    if raw.lower() in ("", "none", "null") and "None" in str(f.type):
        return None
    if key in _TUPLE_FLOAT:
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if key in _TUPLE_STR:
        return tuple(v for v in raw.replace(",", " ").split())
    t = str(f.type)
    if t.startswith("int"):
        return int(raw)
    if t.startswith("float"):
        return float(raw)
    return raw


def apply_overrides(spec: CaseSpec, overrides) -> CaseSpec:
    """Apply ``key=value`` strings (``section.key`` or bare key) to ``spec``."""
    changes = {}
    bcs = dict(spec.boundaries)
    for item in overrides:
        if "=" not in item:
            raise CaseError(f"override {item!r}: expected key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        section, _, bare = key.rpartition(".")
        if section == "boundaries" or bare in face_names(2):
            bcs[bare] = value
            continue
        if bare not in _FIELDS or bare == "boundaries":
            raise CaseError(f"override {key!r}: unknown key")
        try:
            changes[bare] = _convert(bare, value)
        except ValueError as exc:
            raise CaseError(f"override {key!r}: {exc}") from None
    if "tau" in changes and "dt" not in changes:
        changes["dt"] = None
    if "dt" in changes and "tau" not in changes:
        changes["tau"] = None
    changes["boundaries"] = bcs
    return dataclasses.replace(spec, **changes).validate()


def parse_case(text: str) -> CaseSpec:
    """Parse and validate a case document.

    ``[case] preset = <name>`` starts from a built-in preset; the remaining
    keys override it.
    """
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise CaseError(f"malformed case document: {exc}") from None
    for section in cp.sections():
        if section not in SECTIONS and section != "boundaries":
            raise CaseError(f"[{section}]: unknown section")
    base = None
    if cp.has_option("case", "preset"):
        base = preset(cp.get("case", "preset"))
    values = {}
    for section, keys in SECTIONS.items():
        if not cp.has_section(section):
            continue
        for key, raw in cp.items(section):
            if key == "preset" and section == "case":
                continue
            if key not in keys:
                raise CaseError(f"{section}.{key}: unknown key")
            try:
                values[key] = _convert(key, raw)
            except ValueError as exc:
                raise CaseError(f"{section}.{key}: {exc}") from None
    bcs = dict(cp.items("boundaries")) if cp.has_section("boundaries") else {}
    if base is not None:
        if "tau" in values and "dt" not in values:
            values["dt"] = None
        if "dt" in values and "tau" not in values:
            values["tau"] = None
        merged = dict(base.boundaries)
        merged.update(bcs)
        return dataclasses.replace(base, boundaries=merged, **values).validate()
    if base is None and not cp.has_section("case"):
        raise CaseError("case: missing section")
    for required in ("dimension", "lattice", "N", "Ste", "t_end"):
        if required not in values:
            section = next(s for s, keys in SECTIONS.items() if required in keys)
            raise CaseError(f"{section}.{required}: missing required key")
    return CaseSpec(boundaries=bcs, **values).validate()


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_case(spec: CaseSpec) -> str:
    """Inverse of :func:`parse_case`."""
    out = io.StringIO()
    for section, keys in SECTIONS.items():
        out.write(f"[{section}]\n")
        for key in keys:
            out.write(f"{key} = {_fmt(getattr(spec, key))}\n")
        out.write("\n")
        if section == "scheme":
            out.write("[boundaries]\n")
            for face in face_names(spec.dimension):
                if face in spec.boundaries:
                    out.write(f"{face} = {spec.boundaries[face]}\n")
            out.write("\n")
    return out.getvalue()


# -- construction ------------------------------------------------------------------


def _condition(text: str, method: str, where: str):
    kind, _, arg = text.strip().lower().partition(":")
    if kind == "periodic":
        return Periodic()
    if kind == "bounceback":
        return BounceBack()
    if kind == "neumann":
        return NeumannOnQ() if method == "IREBM" else BounceBack()
    if kind == "dirichlet":
        try:
            value = float(arg)
        except ValueError:
            raise CaseError(f"{where}: dirichlet needs a value, e.g. dirichlet:1.0") from None
        return DirichletOnQ(value) if method == "IREBM" else DirichletEquilibrium(value)
    raise CaseError(f"{where}: unknown boundary condition {text!r}")


def build_boundaries(spec: CaseSpec) -> BoundarySpec:
    method = str(spec.method).upper()
    return BoundarySpec(
        {face: _condition(text, method, f"boundaries.{face}") for face, text in spec.boundaries.items()}
    )


def _dirichlet_values(spec: CaseSpec) -> dict[str, float]:
    out = {}
    for face, text in spec.boundaries.items():
        kind, _, arg = text.strip().lower().partition(":")
        if kind == "dirichlet":
            out[face] = float(arg)
    return out


def initial_field(spec: CaseSpec) -> np.ndarray:
    """Initial nodal temperature, with Dirichlet wall nodes set to their values."""
    shape = spec.shape
    if spec.initial == "stefan":
        x = spec.dx * np.arange(spec.N)
        theta = np.asarray(exact_theta(spec.oracle(), x, spec.start_time), dtype=np.float64)
    elif spec.initial == "uniform":
        theta = np.full(shape, float(spec.theta_initial))
    else:
        table = np.loadtxt(spec.initial_table, delimiter=",", comments="#", ndmin=2)
        if spec.dimension == 1:
            x = spec.dx * np.arange(spec.N)
            theta = np.interp(x, table[:, 0], table[:, 1])
        else:
            theta = table[:, -1].reshape(shape)
    theta = np.array(theta, dtype=np.float64)
    for face, value in _dirichlet_values(spec).items():
        axis = "xy".index(face[0])
        idx = [slice(None)] * spec.dimension
        idx[axis] = 0 if face[1] == "-" else -1
        theta[tuple(idx)] = value
    return theta


# -- running -------------------------------------------------------------------------


@dataclass
class RunReport:
    spec: CaseSpec
    wall_seconds: float
    steps: int
    dt: float
    t_final: float
    theta: np.ndarray
    trace: InterfaceTrace | None = None
    snapshots: dict = field(default_factory=dict)  # time -> theta
    newton_mean: float | None = None  # mean iterations per node per step
    newton_max: int | None = None
    inner_mean: float | None = None
    inner_max: int | None = None
    linf: float | None = None
    energy_start: float | None = None
    energy_end: float | None = None
    failure: str | None = None

    @property
    def method(self) -> str:
        return self.spec.method

    @property
    def seconds_per_step(self) -> float:
        return self.wall_seconds / max(self.steps, 1)


def _front(spec: CaseSpec, state):
    cfg = state.config
    if spec.front_metric == "zero":
        return locate_interface_1d(state.theta, spec.dx)
    if cfg.method is Method.EEBM:
        ell = liquid_fraction_from_H(state.f.sum(axis=0), cfg.Ste)
    elif cfg.method is Method.ILFBM:
        ell = state.ell
    else:
        ell = phi_delta(state.theta, cfg.delta)
    return locate_interface_liquid_fraction(ell, spec.dx)


def run_case(spec: CaseSpec, callback=None, max_steps: int | None = None, write: bool = True) -> RunReport:
    """Initialise, step to ``t_end`` and collect diagnostics.

    ``callback(state, t)`` is called after every step. ``max_steps`` truncates
    the run (timing mode). Outputs listed in ``spec.outputs`` are written to
    ``spec.output_dir`` when ``write`` is true.
    """
    spec.validate()
    lat = make_lattice(spec.lattice)
    cfg = spec.scheme_config()
    dt = spec.time_step
    t0 = spec.start_time
    n_steps = spec.n_steps if max_steps is None else min(spec.n_steps, max_steps)
    state = initialize_state(lat, initial_field(spec), cfg)
    plan = BoundaryPlan.build(build_boundaries(spec), lat, spec.shape, cfg.method)
    oracle = spec.oracle()
    track = spec.dimension == 1 and oracle is not None
    every = spec.sample_every or max(1, n_steps // 500)
    snap_steps = {}
    for ts in spec.snapshot_times:
        k = int(round((ts - t0) / dt))
        if 0 <= k <= n_steps:
            snap_steps[k] = ts

    times, fronts = [], []
    snapshots = {}
    newton_sum, newton_max, inner_sum, inner_max = 0.0, 0, 0, 0
    energy_start = total_energy(state)
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = state.theta.copy()
    log.info("%s %s N=%d: %d steps, dt=%.4g, tau=%.4g", spec.name, cfg.method, spec.N, n_steps, dt, cfg.tau)

    start = time.perf_counter()
    for n in range(1, n_steps + 1):
        try:
            step(state, plan)
        except SchemeError as exc:
            exc.step = n
            raise
        t = t0 + n * dt
        stats = state.stats
        if "newton_mean" in stats:
            newton_sum += stats["newton_mean"]
            newton_max = max(newton_max, stats["newton_max"])
        if "inner_iterations" in stats:
            inner_sum += stats["inner_iterations"]
            inner_max = max(inner_max, stats["inner_iterations"])
        if callback is not None:
            callback(state, t)
        if track and (n % every == 0 or n == n_steps):
            xf = _front(spec, state)
            if xf is not None:
                times.append(t)
                fronts.append(xf)
        if n in snap_steps:
            snapshots[snap_steps[n]] = state.theta.copy()
    wall = time.perf_counter() - start
    t_final = t0 + n_steps * dt

    report = RunReport(
        spec=spec, wall_seconds=wall, steps=n_steps, dt=dt, t_final=t_final, theta=state.theta.copy(),
        snapshots=snapshots, energy_start=energy_start, energy_end=total_energy(state),
    )
    if cfg.method is Method.IREBM and n_steps:
        report.newton_mean = newton_sum / n_steps
        report.newton_max = newton_max
    if cfg.method is Method.ILFBM and n_steps:
        report.inner_mean = inner_sum / n_steps
        report.inner_max = inner_max
    if track:
        report.trace = InterfaceTrace.from_samples(times, fronts, oracle)
        report.linf = linf_error(state.theta, oracle, t_final, spec.dx)
    if write and spec.output_dir and spec.outputs:
        from lbstefan.output import write_outputs

        write_outputs(report)
    return report
