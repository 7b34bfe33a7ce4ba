"""DdQq stencils, distribution storage and moments.

Populations are stored structure-of-arrays: ``data[i]`` is the contiguous
plane of velocity ``i`` over all nodes, so streaming is a shifted copy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "LatticeDescriptor",
    "DistributionField",
    "make_lattice",
    "moment",
    "stream",
    "LATTICE_KINDS",
]


@dataclass(frozen=True)
class LatticeDescriptor:
    name: str
    d: int
    velocities: np.ndarray  # (q, d) int
    weights: np.ndarray  # (q,)
    opposite: np.ndarray  # (q,) int

    @property
    def q(self) -> int:
        return len(self.weights)

    def index_of(self, e) -> int:
        e = np.asarray(e)
        hits = np.flatnonzero((self.velocities == e).all(axis=1))
        if len(hits) != 1:
            raise KeyError(f"velocity {tuple(e)} not in {self.name}")
        return int(hits[0])


def _descriptor(name, velocities, weights) -> LatticeDescriptor:
    vel = np.array(velocities, dtype=np.int64)
    w = np.array([float(Fraction(x)) for x in weights])
    opp = np.array([int(np.flatnonzero((vel == -e).all(axis=1))[0]) for e in vel])
    vel.setflags(write=False)
    w.setflags(write=False)
    opp.setflags(write=False)
    return LatticeDescriptor(name, vel.shape[1], vel, w, opp)


_STENCILS = {
    "D1Q3": (
        [[0], [1], [-1]],
        ["2/3", "1/6", "1/6"],
    ),
    "D2Q5": (
        [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1]],
        ["1/3", "1/6", "1/6", "1/6", "1/6"],
    ),
    "D2Q9": (
        [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]],
        ["4/9"] + ["1/9"] * 4 + ["1/36"] * 4,
    ),
}

LATTICE_KINDS = tuple(_STENCILS)


def make_lattice(kind: str) -> LatticeDescriptor:
    """Return the descriptor for ``kind`` (``"D1Q3"``, ``"D2Q5"`` or ``"D2Q9"``).

    Weights are the isotropic ones: they sum to one, have zero first moment
    and second moment ``I/3``.
    """
    key = kind.upper()
    if key not in _STENCILS:
        raise ValueError(f"unknown lattice {kind!r}; expected one of {LATTICE_KINDS}")
    return _descriptor(key, *_STENCILS[key])


@dataclass
class DistributionField:
    """``q`` populations per node, stored as one plane per velocity."""

    lattice: LatticeDescriptor
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape[0] != self.lattice.q or self.data.ndim != self.lattice.d + 1:
            raise ValueError(
                f"data shape {self.data.shape} incompatible with {self.lattice.name}"
            )

    @classmethod
    def zeros(cls, lattice: LatticeDescriptor, shape) -> DistributionField:
        shape = tuple(np.atleast_1d(shape))
        return cls(lattice, np.zeros((lattice.q, *shape)))

    @classmethod
    def equilibrium(cls, lattice: LatticeDescriptor, theta) -> DistributionField:
        """Populations ``w_i * theta`` at every node."""
        theta = np.asarray(theta, dtype=np.float64)
        w = lattice.weights.reshape((-1,) + (1,) * theta.ndim)
        return cls(lattice, w * theta[None])

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    def copy(self) -> DistributionField:
        return DistributionField(self.lattice, self.data.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())


def moment(dist: DistributionField | np.ndarray, k: int, lattice: LatticeDescriptor | None = None):
    """Per-node moment of order ``k`` (0, 1 or 2) of a distribution.

    Returns an array of shape ``shape`` for k=0, ``(d, *shape)`` for k=1 and
    ``(d, d, *shape)`` for k=2.
    """
    if isinstance(dist, DistributionField):
        lattice, data = dist.lattice, dist.data
    else:
        if lattice is None:
            raise TypeError("lattice is required when passing a raw array")
        data = np.asarray(dist)
    if k == 0:
        return data.sum(axis=0)
    e = lattice.velocities.astype(np.float64)
    if k == 1:
        return np.tensordot(e.T, data, axes=(1, 0))
    if k == 2:
        ee = np.einsum("ia,ib->abi", e, e)
        return np.tensordot(ee, data, axes=(2, 0))
    raise ValueError(f"unsupported moment order {k}; expected 0, 1 or 2")


def _shift_slices(c: int):
    # destination/source slices for a shift by c in {-1, 0, 1}
    if c == 1:
        return slice(1, None), slice(None, -1), 0
    if c == -1:
        return slice(None, -1), slice(1, None), -1
    return slice(None), slice(None), None


def stream(
    src: np.ndarray,
    lattice: LatticeDescriptor,
    periodic=None,
    out: np.ndarray | None = None,
    reverse: bool = False,
) -> np.ndarray:
    """Shift every population one node along its velocity.

    ``out[i](x) = src[i](x - e_i)``. Along non-periodic axes the entries whose
    source lies outside the lattice are set to NaN; boundary handlers must
    fill them. ``reverse=True`` shifts by ``-e_i`` instead.
    """
    d = lattice.d
    periodic = (False,) * d if periodic is None else tuple(periodic)
    if out is None:
        out = np.empty_like(src)
    sign = -1 if reverse else 1
    for i, e in enumerate(lattice.velocities):
        e = [sign * int(c) for c in e]
        if any(c != 0 and periodic[a] for a, c in enumerate(e)):
            out[i] = np.roll(src[i], shift=e, axis=tuple(range(d)))
            for a, c in enumerate(e):
                if c != 0 and not periodic[a]:
                    idx = [slice(None)] * d
                    idx[a] = 0 if c == 1 else -1
                    out[i][tuple(idx)] = np.nan
            continue
        dst_idx, src_idx, holes = [], [], []
        for a, c in enumerate(e):
            ds, ss, hole = _shift_slices(c)
            dst_idx.append(ds)
            src_idx.append(ss)
            holes.append(hole)
        out[i][tuple(dst_idx)] = src[i][tuple(src_idx)]
        for a, hole in enumerate(holes):
            if hole is not None:
                idx = [slice(None)] * d
                idx[a] = hole
                out[i][tuple(idx)] = np.nan
    return out
