"""Boundary handling on post-stream populations.

Streaming leaves NaN in every population whose source node lies outside the
lattice. A :class:`BoundaryPlan` precomputes, once per run, which node and
population each rule fills, so a step only does a handful of fancy-indexed
assignments. Rules run in a fixed order: bounce-back, then Neumann-on-q,
then the Dirichlet moment closures (which may read bounced values at
corners).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from lbstefan.enthalpy import enthalpy_sharp, phi_delta
from lbstefan.lattice import LatticeDescriptor

__all__ = [
    "Periodic",
    "BounceBack",
    "NeumannOnQ",
    "DirichletOnQ",
    "DirichletEquilibrium",
    "BoundarySpec",
    "BoundaryPlan",
    "BoundaryError",
    "face_names",
    "apply_bounceback",
    "apply_neumann_on_q",
    "apply_moment_closure",
    "apply_dirichlet_on_q",
    "apply_dirichlet_equilibrium",
    "dirichlet_on_q_target",
]


class BoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class BounceBack:
    """Zero-flux wall: a missing population takes the value the opposite
    population had at the same node before streaming."""


@dataclass(frozen=True)
class NeumannOnQ:
    """Zero-gradient closure on q (IREBM, D1Q3/D2Q5, one missing population)."""


@dataclass(frozen=True)
class DirichletOnQ:
    """Prescribed temperature for IREBM, imposed through the zeroth moment of q."""

    value: float
    next_value: float | None = None

    @property
    def value_next(self) -> float:
        return self.value if self.next_value is None else self.next_value


@dataclass(frozen=True)
class DirichletEquilibrium:
    """Prescribed temperature for EEBM/ILFBM by moment closure of f."""

    value: float


Condition = Union[Periodic, BounceBack, NeumannOnQ, DirichletOnQ, DirichletEquilibrium]
_DIRICHLET = (DirichletOnQ, DirichletEquilibrium)
_AXES = "xy"


def face_names(d: int) -> list[str]:
    return [f"{_AXES[a]}{s}" for a in range(d) for s in "-+"]


@dataclass
class BoundarySpec:
    """One condition per face; faces are named ``x-``, ``x+``, ``y-``, ``y+``."""

    faces: dict[str, Condition]

    @classmethod
    def periodic(cls, d: int) -> BoundarySpec:
        return cls({name: Periodic() for name in face_names(d)})

    @classmethod
    def uniform(cls, d: int, condition: Condition) -> BoundarySpec:
        return cls({name: condition for name in face_names(d)})

    def validate(self, d: int, method: str | None = None) -> None:
        names = face_names(d)
        missing = [n for n in names if n not in self.faces]
        extra = [n for n in self.faces if n not in names]
        if missing or extra:
            raise BoundaryError(f"faces missing {missing}, unknown {extra} for d={d}")
        for a in range(d):
            lo, hi = self.faces[f"{_AXES[a]}-"], self.faces[f"{_AXES[a]}+"]
            if isinstance(lo, Periodic) != isinstance(hi, Periodic):
                raise BoundaryError(f"axis {_AXES[a]}: periodic must be set on both faces")
        if method is None:
            return
        method = str(method).upper()
        for name, cond in self.faces.items():
            if isinstance(cond, (DirichletOnQ, NeumannOnQ)) and method != "IREBM":
                raise BoundaryError(f"face {name}: {type(cond).__name__} is only valid with IREBM")
            if isinstance(cond, DirichletEquilibrium) and method == "IREBM":
                raise BoundaryError(
                    f"face {name}: DirichletEquilibrium is only valid with EEBM/ILFBM"
                )

    def periodic_axes(self, d: int) -> tuple[bool, ...]:
        return tuple(isinstance(self.faces[f"{_AXES[a]}-"], Periodic) for a in range(d))


# -- elementary fills -------------------------------------------------------
# All take flat (q, n_nodes) views and arrays of node indices.


def apply_bounceback(q, omega, nodes, pops, opposite):
    """``q[i_x](x) = omega[opp(i_x)](x)``: the population leaving through the
    wall comes back reversed at the same node."""
    q[pops, nodes] = omega[opposite[pops], nodes]


def apply_neumann_on_q(q, nodes, pops, neighbors):
    """Set the missing population so that the zeroth moment of q at the wall
    node equals the one at its inward neighbour."""
    q[pops, nodes] = 0.0
    q[pops, nodes] = q[:, neighbors].sum(axis=0) - q[:, nodes].sum(axis=0)


def apply_moment_closure(q, nodes, missing, fractions, target):
    """Distribute ``target - sum(known)`` over the missing populations.

    ``missing`` is a (q, M) boolean mask and ``fractions`` the per-population
    share (w_i normalised over the missing set).
    """
    block = q[:, nodes]
    known = np.where(missing, 0.0, block).sum(axis=0)
    deficit = target - known
    q[:, nodes] = np.where(missing, fractions * deficit, block)


def dirichlet_on_q_target(theta_dir, theta_dir_next, Ste, delta):
    return theta_dir_next + (phi_delta(theta_dir, delta) - phi_delta(theta_dir_next, delta)) / Ste


def apply_dirichlet_on_q(q, nodes, missing, fractions, theta_dir, theta_dir_next, Ste, delta):
    """Fill so that the Newton solve at the node returns ``theta_dir_next``."""
    target = dirichlet_on_q_target(theta_dir, theta_dir_next, Ste, delta)
    apply_moment_closure(q, nodes, missing, fractions, target)


def apply_dirichlet_equilibrium(q, nodes, missing, fractions, theta_dir, scheme, Ste=None):
    """Fill so the zeroth moment is ``theta_dir`` (ILFBM) or its enthalpy (EEBM)."""
    scheme = str(scheme).upper()
    if scheme == "EEBM":
        target = enthalpy_sharp(theta_dir, Ste)
    elif scheme == "ILFBM":
        target = np.asarray(theta_dir, dtype=np.float64)
    else:
        raise BoundaryError(f"equilibrium Dirichlet is not defined for {scheme}")
    apply_moment_closure(q, nodes, missing, fractions, target)


# -- plan ---------------------------------------------------------------------


@dataclass
class BoundaryPlan:
    lattice: LatticeDescriptor
    shape: tuple[int, ...]
    periodic: tuple[bool, ...]
    bb_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, np.intp))
    bb_pops: np.ndarray = field(default_factory=lambda: np.zeros(0, np.intp))
    neu_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, np.intp))
    neu_pops: np.ndarray = field(default_factory=lambda: np.zeros(0, np.intp))
    neu_neighbors: np.ndarray = field(default_factory=lambda: np.zeros(0, np.intp))
    dir_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, np.intp))
    dir_missing: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), bool))
    dir_fractions: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    dir_value: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dir_value_next: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dir_on_q: bool = False

    @classmethod
    def build(cls, spec: BoundarySpec, lattice: LatticeDescriptor, shape, method=None):
        d = lattice.d
        shape = tuple(int(n) for n in np.atleast_1d(shape))
        spec.validate(d, method)
        periodic = spec.periodic_axes(d)
        plan = cls(lattice, shape, periodic)
        if all(periodic):
            return plan

        vel = lattice.velocities
        bb_n, bb_p, nn, np_, nnb = [], [], [], [], []
        dn, dmask, dval, dnext = [], [], [], []
        dir_kinds = set()

        for idx in itertools.product(*(range(n) for n in shape)):
            touching = []
            for a in range(d):
                if periodic[a]:
                    continue
                if idx[a] == 0:
                    touching.append(f"{_AXES[a]}-")
                if idx[a] == shape[a] - 1:
                    touching.append(f"{_AXES[a]}+")
            if not touching:
                continue
            causes = {}
            for i, e in enumerate(vel):
                hit = []
                for a in range(d):
                    if periodic[a]:
                        continue
                    src = idx[a] - e[a]
                    if src < 0:
                        hit.append(f"{_AXES[a]}-")
                    elif src >= shape[a]:
                        hit.append(f"{_AXES[a]}+")
                if hit:
                    causes[i] = hit
            if not causes:
                continue
            flat = int(np.ravel_multi_index(idx, shape))
            conds = {name: spec.faces[name] for name in touching}
            dir_pops = [i for i, hit in causes.items() if any(isinstance(conds[h], _DIRICHLET) for h in hit)]
            neu_pops = [i for i in causes if i not in dir_pops]
            corner = len(touching) > 1

            for i in neu_pops:
                face = causes[i][0]
                use_eq15 = (
                    isinstance(conds[face], NeumannOnQ)
                    and not corner
                    and len(causes) == 1
                    and lattice.name in ("D1Q3", "D2Q5")
                )
                if use_eq15:
                    nb = tuple(int(c) for c in np.asarray(idx) + vel[i])
                    if any(not (0 <= nb[a] < shape[a]) for a in range(d)):
                        raise BoundaryError(f"Neumann neighbour of node {idx} is outside the lattice")
                    nn.append(flat)
                    np_.append(i)
                    nnb.append(int(np.ravel_multi_index(nb, shape)))
                else:
                    bb_n.append(flat)
                    bb_p.append(i)

            if dir_pops:
                dconds = [c for c in conds.values() if isinstance(c, _DIRICHLET)]
                dir_kinds.update(type(c) for c in dconds)
                mask = np.zeros(lattice.q, bool)
                mask[dir_pops] = True
                dn.append(flat)
                dmask.append(mask)
                dval.append(np.mean([c.value for c in dconds]))
                dnext.append(
                    np.mean([c.value_next if isinstance(c, DirichletOnQ) else c.value for c in dconds])
                )

        if len(dir_kinds) > 1:
            raise BoundaryError("cannot mix DirichletOnQ and DirichletEquilibrium faces")
        plan.bb_nodes = np.array(bb_n, np.intp)
        plan.bb_pops = np.array(bb_p, np.intp)
        plan.neu_nodes = np.array(nn, np.intp)
        plan.neu_pops = np.array(np_, np.intp)
        plan.neu_neighbors = np.array(nnb, np.intp)
        plan.dir_on_q = DirichletOnQ in dir_kinds
        if dn:
            missing = np.array(dmask).T  # (q, M)
            w = lattice.weights[:, None] * missing
            plan.dir_nodes = np.array(dn, np.intp)
            plan.dir_missing = missing
            plan.dir_fractions = w / w.sum(axis=0, keepdims=True)
            plan.dir_value = np.array(dval)
            plan.dir_value_next = np.array(dnext)

        # neighbours read by the Neumann rule must be fully defined after streaming
        filled = set(plan.bb_nodes.tolist()) | set(plan.neu_nodes.tolist()) | set(plan.dir_nodes.tolist())
        bad = filled.intersection(plan.neu_neighbors.tolist())
        if bad:
            raise BoundaryError(f"Neumann neighbours {sorted(bad)[:4]} are themselves boundary nodes")
        return plan

    @property
    def is_trivial(self) -> bool:
        return len(self.bb_nodes) + len(self.neu_nodes) + len(self.dir_nodes) == 0

    def fill(self, q: np.ndarray, omega: np.ndarray, dirichlet_target=None) -> None:
        """Fill all missing populations of ``q`` in place.

        ``omega`` is the pre-stream (post-collision) field; ``dirichlet_target``
        gives the zeroth moment required at each Dirichlet node.
        """
        if self.is_trivial:
            return
        qf = q.reshape(q.shape[0], -1)
        of = omega.reshape(omega.shape[0], -1)
        if len(self.bb_nodes):
            apply_bounceback(qf, of, self.bb_nodes, self.bb_pops, self.lattice.opposite)
        if len(self.neu_nodes):
            apply_neumann_on_q(qf, self.neu_nodes, self.neu_pops, self.neu_neighbors)
        if len(self.dir_nodes):
            if dirichlet_target is None:
                raise BoundaryError("Dirichlet nodes present but no target supplied")
            apply_moment_closure(qf, self.dir_nodes, self.dir_missing, self.dir_fractions, dirichlet_target)

    def node_coords(self, flat_nodes) -> np.ndarray:
        return np.array(np.unravel_index(np.asarray(flat_nodes), self.shape)).T
