"""Time-stepping kernels: EEBM, ILFBM and IREBM.

All three share BGK collision with ``f_eq = w_i * theta`` (EEBM puts the
latent heat into the rest population) and differ in how the phase change
enters:

* EEBM streams total enthalpy and recovers theta explicitly;
* ILFBM iterates a liquid-fraction source term through collide+stream;
* IREBM regularises the liquid fraction and solves one scalar Newton
  problem per node after streaming.

Steps update the state in place and return it. Two population buffers are
swapped each step; nothing is streamed in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numba
import numpy as np

from lbstefan.boundary import BoundaryPlan, BoundarySpec, dirichlet_on_q_target
from lbstefan.enthalpy import (
    enthalpy_regularized,
    enthalpy_sharp,
    liquid_fraction_from_H,
    phi_delta,
    phi_delta_prime,
    sharp_liquid_fraction,
    temperature_from_H,
)
from lbstefan.lattice import DistributionField, LatticeDescriptor, stream

__all__ = [
    "Method",
    "SchemeConfig",
    "SolverState",
    "SchemeError",
    "NewtonDivergence",
    "InnerLoopDivergence",
    "liquid_fraction_from_H",
    "temperature_from_H",
    "phi_delta",
    "phi_delta_prime",
    "newton_update",
    "regularized_residual",
    "solve_regularized",
    "tau_from_timestep",
    "timestep_from_tau",
    "initialize_state",
    "step",
    "step_eebm",
    "step_ilfbm",
    "step_irebm",
]


class Method(str, Enum):
    EEBM = "EEBM"
    ILFBM = "ILFBM"
    IREBM = "IREBM"

    def __str__(self):
        return self.value


class SchemeError(RuntimeError):
    """A step could not produce a valid state."""


class NewtonDivergence(SchemeError):
    def __init__(self, message, node=None, residual=None, step=None):
        super().__init__(message)
        self.node = node
        self.residual = residual
        self.step = step


class InnerLoopDivergence(SchemeError):
    def __init__(self, message, iterations=None, change=None, step=None):
        super().__init__(message)
        self.iterations = iterations
        self.change = change
        self.step = step


@dataclass
class SchemeConfig:
    method: Method
    tau: float
    Ste: float
    delta: float = 0.005
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    newton_fallback: bool = True
    inner_tol: float = 1e-8
    inner_max_iter: int = 100

    def __post_init__(self):
        self.method = Method(str(self.method).upper())
        if not self.tau > 0.5:
            raise ValueError(f"tau must exceed 1/2, got {self.tau}")
        if not self.Ste > 0:
            raise ValueError(f"Ste must be positive, got {self.Ste}")
        if self.method is Method.IREBM and not self.delta > 0:
            raise ValueError(f"delta must be positive for IREBM, got {self.delta}")
        if not self.newton_tol > 0 or self.newton_max_iter < 1:
            raise ValueError("newton_tol must be > 0 and newton_max_iter >= 1")
        if not self.inner_tol > 0 or self.inner_max_iter < 1:
            raise ValueError("inner_tol must be > 0 and inner_max_iter >= 1")


@dataclass
class SolverState:
    lattice: LatticeDescriptor
    f: np.ndarray  # (q, *shape)
    theta: np.ndarray
    config: SchemeConfig
    ell: np.ndarray | None = None
    step: int = 0
    stats: dict = field(default_factory=dict)
    _buf: np.ndarray | None = field(default=None, repr=False)
    _omega: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.f.shape[1:]

    @property
    def dist(self) -> DistributionField:
        return DistributionField(self.lattice, self.f)

    def buffers(self):
        if self._buf is None:
            self._buf = np.empty_like(self.f)
            self._omega = np.empty_like(self.f)
        return self._omega, self._buf

    def swap(self):
        self.f, self._buf = self._buf, self.f

    def copy(self) -> SolverState:
        return SolverState(
            self.lattice,
            self.f.copy(),
            self.theta.copy(),
            self.config,
            None if self.ell is None else self.ell.copy(),
            self.step,
            dict(self.stats),
        )


# -- scalar pieces ----------------------------------------------------------


def tau_from_timestep(dt: float, dx: float) -> float:
    """Relaxation parameter giving unit diffusivity: tau - 1/2 = 3 dt / dx^2."""
    if not (dt > 0 and dx > 0):
        raise ValueError("dt and dx must be positive")
    return 0.5 + 3.0 * dt / dx**2


def timestep_from_tau(tau: float, dx: float) -> float:
    if not tau > 0.5:
        raise ValueError(f"tau must exceed 1/2, got {tau}")
    if not dx > 0:
        raise ValueError("dx must be positive")
    return (tau - 0.5) * dx**2 / 3.0


def newton_update(theta_k, m0, theta_old, Ste, delta):
    """One Newton step for ``theta + phi_delta(theta)/Ste = m0 + phi_delta(theta_old)/Ste``."""
    dphi = phi_delta_prime(theta_k, delta)
    num = m0 + phi_delta(theta_old, delta) / Ste + dphi * theta_k / Ste - phi_delta(theta_k, delta) / Ste
    return num / (1.0 + dphi / Ste)


def regularized_residual(theta_new, m0, theta_old, Ste, delta):
    return (
        theta_new
        + phi_delta(theta_new, delta) / Ste
        - m0
        - phi_delta(theta_old, delta) / Ste
    )


# beyond |theta/delta| = 20, tanh is +-1 in double precision; skipping the
# transcendental there makes single-phase nodes cheap. The root of the
# balance depends only on phi, so zeroing the tiny slope does not move it.
_SATURATED = 20.0


@numba.njit(cache=True, inline="always")
def _phi(x, delta):
    u = x / delta
    if u > _SATURATED:
        return 1.0
    if u < -_SATURATED:
        return 0.0
    return 0.5 * (1.0 + math.tanh(u))


@numba.njit(cache=True, inline="always")
def _dphi(x, delta):
    u = abs(x / delta)
    if u > _SATURATED:
        return 0.0
    e = math.exp(-2.0 * u)
    return 2.0 * e / (delta * (1.0 + e) * (1.0 + e))


@numba.njit(cache=True)
def _solve_node(rhs, th, inv, delta, tol, max_iter, fallback):
    # Newton on th + phi(th)/ste = rhs; returns (theta, iterations, converged)
    k = 0
    while k < max_iter:
        dp = _dphi(th, delta)
        nxt = (rhs + (dp * th - _phi(th, delta)) * inv) / (1.0 + dp * inv)
        k += 1
        if abs(nxt - th) < tol:
            return nxt, k, True
        th = nxt
    if not fallback:
        return th, k, False
    # F is increasing and phi in [0, 1], so the root lies in [rhs - 1/ste, rhs]
    lo = rhs - inv - 1.0
    hi = rhs + 1.0
    while hi - lo > tol and k <= max_iter + 400:
        mid = 0.5 * (lo + hi)
        if mid + _phi(mid, delta) * inv - rhs > 0.0:
            hi = mid
        else:
            lo = mid
        k += 1
    # the steep part of phi amplifies the bracket width, so polish with Newton
    th = 0.5 * (lo + hi)
    for _ in range(3):
        dp = _dphi(th, delta)
        nxt = (rhs + (dp * th - _phi(th, delta)) * inv) / (1.0 + dp * inv)
        k += 1
        if not lo <= nxt <= hi or nxt == th:
            break
        th = nxt
    return th, k, True


@numba.njit(cache=True)
def _newton_kernel(m0, theta_old, ste, delta, tol, max_iter, fallback, out, iters, source):
    # returns index of the first node that failed (fallback disabled), else -1;
    # source receives (phi(theta_old) - phi(theta_new)) / ste
    inv = 1.0 / ste
    failed = -1
    for j in range(m0.size):
        phi_old = _phi(theta_old[j], delta)
        th, k, ok = _solve_node(m0[j] + phi_old * inv, theta_old[j], inv, delta, tol, max_iter, fallback)
        if not ok and failed < 0:
            failed = j
        out[j] = th
        iters[j] = k
        source[j] = (phi_old - _phi(th, delta)) * inv
    return failed


@numba.njit(cache=True)
def _irebm_kernel(q, w, theta_old, ste, delta, tol, max_iter, fallback, m0, out, iters):
    # one pass over post-stream q (Q, n): moment, Newton, then q_i += w_i * source
    inv = 1.0 / ste
    nq, n = q.shape
    failed = -1
    for j in range(n):
        s = 0.0
        for i in range(nq):
            s += q[i, j]
        m0[j] = s
        phi_old = _phi(theta_old[j], delta)
        th, k, ok = _solve_node(s + phi_old * inv, theta_old[j], inv, delta, tol, max_iter, fallback)
        if not ok and failed < 0:
            failed = j
        out[j] = th
        iters[j] = k
        g = (phi_old - _phi(th, delta)) * inv
        for i in range(nq):
            q[i, j] += w[i] * g
    return failed


@numba.njit(cache=True)
def _bgk_collide(f, w, a, b, omega, theta):
    # omega_i = a f_i + b w_i theta with theta = sum_i f_i, one pass over (Q, n)
    nq, n = f.shape
    for j in range(n):
        s = 0.0
        for i in range(nq):
            s += f[i, j]
        theta[j] = s
        for i in range(nq):
            omega[i, j] = a * f[i, j] + b * w[i] * s


@numba.njit(cache=True)
def _eebm_collide(f, w, a, b, ste, omega):
    # as _bgk_collide on enthalpy populations; the rest equilibrium is H - (1 - w0) theta
    nq, n = f.shape
    inv = 1.0 / ste
    for j in range(n):
        h = 0.0
        for i in range(nq):
            h += f[i, j]
        th = min(h, 0.0) + max(h - inv, 0.0)
        omega[0, j] = a * f[0, j] + b * (h - (1.0 - w[0]) * th)
        for i in range(1, nq):
            omega[i, j] = a * f[i, j] + b * w[i] * th


def _divergence(failed, m0, theta_old, theta_new, Ste, delta, max_iter):
    node = tuple(int(i) for i in np.unravel_index(failed, m0.shape))
    res = float(regularized_residual(theta_new.flat[failed], m0.flat[failed], theta_old.flat[failed], Ste, delta))
    return NewtonDivergence(
        f"Newton did not converge in {max_iter} iterations at node {node} (residual {res:.3e})",
        node=node,
        residual=res,
    )


def solve_regularized(m0, theta_old, Ste, delta, tol=1e-12, max_iter=50, fallback=True, source=None):
    """Per-node solve of the regularised enthalpy balance.

    Newton from ``theta_old``, stopping when successive iterates differ by less
    than ``tol``. Nodes that hit ``max_iter`` fall back to bisection, or raise
    :class:`NewtonDivergence` when ``fallback`` is off.

    Returns ``(theta_new, iterations)`` with the arrays shaped like ``m0``.
    If ``source`` is given it is filled with ``(phi(theta_old) - phi(theta_new)) / Ste``.
    """
    m0 = np.ascontiguousarray(m0, dtype=np.float64)
    theta_old = np.ascontiguousarray(theta_old, dtype=np.float64)
    out = np.empty_like(m0)
    iters = np.empty(m0.shape, dtype=np.int64)
    if source is None:
        source = np.empty_like(m0)
    failed = _newton_kernel(
        m0.reshape(-1), theta_old.reshape(-1), float(Ste), float(delta), float(tol),
        int(max_iter), bool(fallback), out.reshape(-1), iters.reshape(-1), source.reshape(-1),
    )
    if failed >= 0:
        raise _divergence(failed, m0, theta_old, out, Ste, delta, max_iter)
    return out, iters


# -- state construction -------------------------------------------------------


def _wshape(lattice, ndim):
    return lattice.weights.reshape((-1,) + (1,) * ndim)


def initialize_state(lattice: LatticeDescriptor, theta, config: SchemeConfig) -> SolverState:
    """Equilibrium populations for the initial temperature field.

    EEBM puts the latent heat of liquid nodes into the rest population so
    that the zeroth moment is the (sharp) enthalpy.
    """
    theta = np.array(theta, dtype=np.float64)
    if theta.ndim != lattice.d:
        raise ValueError(f"theta has {theta.ndim} dims, lattice {lattice.name} needs {lattice.d}")
    w = _wshape(lattice, theta.ndim)
    f = w * theta[None]
    ell = None
    if config.method is Method.EEBM:
        H = enthalpy_sharp(theta, config.Ste)
        f[0] = H - (1.0 - lattice.weights[0]) * theta
    elif config.method is Method.ILFBM:
        ell = sharp_liquid_fraction(theta).astype(np.float64)
    f = np.ascontiguousarray(f)
    return SolverState(lattice, f, theta, config, ell)


# -- steps ----------------------------------------------------------------------


def _plan(state: SolverState, boundaries) -> BoundaryPlan:
    if isinstance(boundaries, BoundaryPlan):
        return boundaries
    if boundaries is None:
        boundaries = BoundarySpec.periodic(state.lattice.d)
    return BoundaryPlan.build(boundaries, state.lattice, state.shape, state.config.method)


def step_eebm(state: SolverState, boundaries) -> SolverState:
    """Explicit enthalpy step: BGK on enthalpy populations, then stream."""
    cfg, lat = state.config, state.lattice
    plan = _plan(state, boundaries)
    omega, q = state.buffers()
    f = state.f
    a, b = 1.0 - 1.0 / cfg.tau, 1.0 / cfg.tau
    _eebm_collide(f.reshape(lat.q, -1), lat.weights, a, b, float(cfg.Ste), omega.reshape(lat.q, -1))
    stream(omega, lat, plan.periodic, out=q)
    if len(plan.dir_nodes):
        plan.fill(q, omega, enthalpy_sharp(plan.dir_value_next, cfg.Ste))
    else:
        plan.fill(q, omega)
    state.swap()
    state.theta = temperature_from_H(state.f.sum(axis=0), cfg.Ste)
    state.step += 1
    state.stats = {}
    return state


def step_ilfbm(state: SolverState, boundaries) -> SolverState:
    """Implicit liquid-fraction step with the inner collide/stream fixed point."""
    cfg, lat = state.config, state.lattice
    if state.ell is None:
        raise SchemeError("ILFBM state has no liquid fraction field")
    plan = _plan(state, boundaries)
    omega, q = state.buffers()
    f = state.f
    theta = f.sum(axis=0)
    w = _wshape(lat, theta.ndim)
    a, b = 1.0 - 1.0 / cfg.tau, 1.0 / cfg.tau
    base = a * f + (b * w) * theta
    ell = state.ell
    ell_prev = ell
    target = plan.dir_value_next if len(plan.dir_nodes) else None
    change = np.inf
    for k in range(1, cfg.inner_max_iter + 1):
        np.add(base, (w / cfg.Ste) * (ell - ell_prev), out=omega)
        stream(omega, lat, plan.periodic, out=q)
        plan.fill(q, omega, target)
        H = q.sum(axis=0) + ell_prev / cfg.Ste
        ell_new = liquid_fraction_from_H(H, cfg.Ste)
        change = float(np.max(np.abs(ell_new - ell_prev)))
        ell_prev = ell_new
        if change < cfg.inner_tol:
            break
    else:
        raise InnerLoopDivergence(
            f"ILFBM inner loop did not converge at step {state.step}: "
            f"max liquid-fraction change {change:.3e} after {cfg.inner_max_iter} iterations",
            iterations=cfg.inner_max_iter,
            change=change,
            step=state.step,
        )
    state.swap()
    state.ell = ell_new
    state.theta = state.f.sum(axis=0)
    state.step += 1
    state.stats = {"inner_iterations": k}
    return state


def step_irebm(state: SolverState, boundaries) -> SolverState:
    """Implicit regularised enthalpy step (collide, stream, boundary on q, Newton, source)."""
    cfg, lat = state.config, state.lattice
    plan = _plan(state, boundaries)
    omega, q = state.buffers()
    f = state.f
    theta = np.empty(state.shape)
    a, b = 1.0 - 1.0 / cfg.tau, 1.0 / cfg.tau
    _bgk_collide(f.reshape(lat.q, -1), lat.weights, a, b, omega.reshape(lat.q, -1), theta.reshape(-1))
    stream(omega, lat, plan.periodic, out=q)
    if len(plan.dir_nodes):
        plan.fill(q, omega, dirichlet_on_q_target(plan.dir_value, plan.dir_value_next, cfg.Ste, cfg.delta))
    else:
        plan.fill(q, omega)
    m0 = np.empty_like(theta)
    theta_new = np.empty_like(theta)
    iters = np.empty(theta.shape, dtype=np.int64)
    failed = _irebm_kernel(
        q.reshape(lat.q, -1), lat.weights, theta.reshape(-1), float(cfg.Ste), float(cfg.delta),
        float(cfg.newton_tol), int(cfg.newton_max_iter), bool(cfg.newton_fallback),
        m0.reshape(-1), theta_new.reshape(-1), iters.reshape(-1),
    )
    if failed >= 0:
        exc = _divergence(failed, m0, theta, theta_new, cfg.Ste, cfg.delta, cfg.newton_max_iter)
        exc.step = state.step
        raise exc
    state.swap()
    state.theta = theta_new
    state.step += 1
    state.stats = {
        "newton_mean": float(iters.mean()),
        "newton_max": int(iters.max()),
        "_m0": m0,
        "_theta_old": theta,
    }
    return state


_STEPS = {Method.EEBM: step_eebm, Method.ILFBM: step_ilfbm, Method.IREBM: step_irebm}


def step(state: SolverState, boundaries) -> SolverState:
    return _STEPS[state.config.method](state, boundaries)


def total_energy(state: SolverState) -> float:
    """Conserved total (regularised) enthalpy of the state, per method."""
    cfg = state.config
    if cfg.method is Method.EEBM:
        return float(state.f.sum())
    if cfg.method is Method.ILFBM:
        return float(np.sum(state.f.sum(axis=0) + state.ell / cfg.Ste))
    return float(np.sum(enthalpy_regularized(state.theta, cfg.Ste, cfg.delta)))
