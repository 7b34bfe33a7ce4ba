"""Measurements on solver output: fronts, isolines, profiles, errors, energy sums."""

from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from lbstefan.analytic import AnalyticSolution, exact_theta, interface_position

__all__ = [
    "InterfaceTrace",
    "IsolineSet",
    "MultipleInterfacesWarning",
    "locate_interface_1d",
    "locate_interface_liquid_fraction",
    "extract_isolines_2d",
    "sample_diagonal",
    "linf_error",
    "total_enthalpy",
    "oscillation_amplitude",
]


class MultipleInterfacesWarning(UserWarning):
    pass


@dataclass
class InterfaceTrace:
    times: np.ndarray
    positions: np.ndarray
    exact_positions: np.ndarray
    errors: np.ndarray = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.exact_positions = np.asarray(self.exact_positions, dtype=np.float64)
        if self.errors is None:
            self.errors = np.abs(self.positions - self.exact_positions)
        n = len(self.times)
        if not (len(self.positions) == len(self.exact_positions) == len(self.errors) == n):
            raise ValueError("trace columns must have equal lengths")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")

    @classmethod
    def from_samples(cls, times, positions, oracle: AnalyticSolution) -> InterfaceTrace:
        times = np.asarray(times, dtype=np.float64)
        return cls(times, positions, interface_position(oracle, times))

    @property
    def relative_errors(self) -> np.ndarray:
        return self.errors / self.exact_positions

    def after(self, fraction: float) -> InterfaceTrace:
        """The part of the trace past the first ``fraction`` of samples."""
        k = int(np.floor(fraction * len(self.times)))
        return InterfaceTrace(self.times[k:], self.positions[k:], self.exact_positions[k:], self.errors[k:])


def locate_interface_1d(theta, dx: float, x0: float = 0.0):
    """Position of the first liquid-to-solid crossing (theta > 0 then theta <= 0).

    Linear interpolation between the two bracketing nodes. Returns ``None``
    when the field never changes sign; warns when it changes sign more than once.
    """
    theta = np.asarray(theta, dtype=np.float64)
    pos = theta > 0.0
    hits = np.flatnonzero(pos[:-1] & ~pos[1:])
    if len(hits) == 0:
        return None
    if len(hits) > 1 or np.any(~pos[:-1] & pos[1:]):
        warnings.warn(
            f"{len(hits)} liquid-to-solid crossings; reporting the first",
            MultipleInterfacesWarning,
            stacklevel=2,
        )
    j = int(hits[0])
    a, b = theta[j], theta[j + 1]
    return x0 + dx * (j + a / (a - b))


def locate_interface_liquid_fraction(ell, dx: float, x0: float = 0.0, level: float = 0.5):
    """Front as the first downward crossing of ``ell = level``."""
    return locate_interface_1d(np.asarray(ell) - level, dx, x0)


@dataclass
class IsolineSet:
    levels: list[float]
    polylines: dict[float, list[np.ndarray]] = field(default_factory=dict)

    def vertices(self, level: float) -> np.ndarray:
        lines = self.polylines.get(level, [])
        if not lines:
            return np.zeros((0, 2))
        return np.vstack(lines)


# For each marching-squares case, the pairs of cell edges joined by a segment.
# Edges: 0 bottom, 1 right, 2 top, 3 left. Bit k of the case is set when
# corner k is above the level; corners ordered (0,0), (1,0), (1,1), (0,1).
_SEGMENTS = {
    0: (), 15: (),
    1: ((3, 0),), 14: ((3, 0),),
    2: ((0, 1),), 13: ((0, 1),),
    3: ((3, 1),), 12: ((3, 1),),
    4: ((1, 2),), 11: ((1, 2),),
    6: ((0, 2),), 9: ((0, 2),),
    7: ((3, 2),), 8: ((3, 2),),
}


def _edge_key(i, j, edge):
    # global id of a cell edge shared by neighbouring cells
    if edge == 0:
        return ("h", i, j)
    if edge == 2:
        return ("h", i, j + 1)
    if edge == 3:
        return ("v", i, j)
    return ("v", i + 1, j)


def extract_isolines_2d(theta, levels, dx: float, origin=(0.0, 0.0)) -> IsolineSet:
    """Marching-squares level sets of a nodal field ``theta[ix, iy]``.

    Crossings are placed by linear interpolation along cell edges; ambiguous
    (saddle) cells are resolved by comparing the cell average to the level.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2:
        raise ValueError("extract_isolines_2d needs a 2D field")
    levels = [float(v) for v in np.atleast_1d(levels)]
    out = IsolineSet(levels)
    x0, y0 = origin
    for level in levels:
        above = theta > level
        c = (
            above[:-1, :-1].astype(np.int8)
            | (above[1:, :-1] << 1)
            | (above[1:, 1:] << 2)
            | (above[:-1, 1:] << 3)
        )
        points = {}
        adjacency = defaultdict(list)
        for i, j in zip(*np.nonzero((c != 0) & (c != 15))):
            case = int(c[i, j])
            v = (theta[i, j], theta[i + 1, j], theta[i + 1, j + 1], theta[i, j + 1])
            if case in (5, 10):
                centre_above = 0.25 * sum(v) > level
                if case == 5:
                    pairs = ((3, 2), (0, 1)) if centre_above else ((3, 0), (1, 2))
                else:
                    pairs = ((3, 0), (1, 2)) if centre_above else ((3, 2), (0, 1))
            else:
                pairs = _SEGMENTS[case]
            for e1, e2 in pairs:
                k1, k2 = _edge_key(i, j, e1), _edge_key(i, j, e2)
                for key in (k1, k2):
                    if key not in points:
                        points[key] = _edge_point(theta, key, level, dx, x0, y0)
                adjacency[k1].append(k2)
                adjacency[k2].append(k1)
        out.polylines[level] = _chain(adjacency, points)
    return out


def _edge_point(theta, key, level, dx, x0, y0):
    kind, i, j = key
    a = theta[i, j]
    if kind == "h":
        b = theta[i + 1, j]
        t = (level - a) / (b - a)
        return np.array([x0 + (i + t) * dx, y0 + j * dx])
    b = theta[i, j + 1]
    t = (level - a) / (b - a)
    return np.array([x0 + i * dx, y0 + (j + t) * dx])


def _chain(adjacency, points):
    seen = set()
    lines = []
    # open chains start at edges touched by one segment
    starts = [k for k, nb in adjacency.items() if len(nb) == 1]
    starts += [k for k in adjacency if k not in starts]
    for start in starts:
        if start in seen:
            continue
        path = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [k for k in adjacency[cur] if k != prev and k not in seen]
            if not nxt:
                if len(path) > 2 and start in adjacency[cur] and prev is not None:
                    path.append(start)  # closed loop
                break
            prev, cur = cur, nxt[0]
            path.append(cur)
            seen.add(cur)
        lines.append(np.array([points[k] for k in path]))
    return lines


def sample_diagonal(theta, dx: float = 1.0):
    """Values ``theta[i, i]`` and their arclength ``i * dx * sqrt(2)``."""
    theta = np.asarray(theta)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ValueError(f"sample_diagonal needs a square field, got shape {theta.shape}")
    n = theta.shape[0]
    return np.arange(n) * dx * np.sqrt(2.0), np.diagonal(theta).copy()


def linf_error(theta, oracle: AnalyticSolution, t: float, dx: float, x0: float = 0.0) -> float:
    """Max nodal deviation of a 1D field from the similarity solution at time ``t``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    theta = np.asarray(theta, dtype=np.float64)
    x = x0 + dx * np.arange(theta.size)
    return float(np.max(np.abs(theta - exact_theta(oracle, x, t))))


def total_enthalpy(state) -> float:
    """Conserved energy sum of a solver state (definition depends on the scheme)."""
    from lbstefan.schemes import total_energy

    return total_energy(state)


def oscillation_amplitude(values) -> float:
    """Peak-to-trough spread of a series."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0
    return float(values.max() - values.min())
