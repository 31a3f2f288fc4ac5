"""Cell-centred lattice discretisation of planar domains.

Cells are addressed as ``values[i, j]`` with ``i`` along the first axis (x)
and ``j`` along the second (y).  Cell ``(i, j)`` has its centre at
``origin + h * (i, j)``.  A :class:`DomainMask` labels every cell as
exterior, boundary (non-exterior with an exterior 4-neighbour, where cells
off the lattice count as exterior) or interior.

Ball membership uses open balls on cell centres with a relative tie
tolerance of ``TIE_RTOL`` so that radii that are exact multiples of ``h``
behave like the continuum half-open conventions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist

N_DIM = 2
EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    h: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs nx, ny >= 4 (got {self.nx}, {self.ny})")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"grid spacing must be positive (got {self.h})")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def centers(self) -> tuple:
        """Return ``(X, Y)`` arrays of cell-centre coordinates, shape ``(nx, ny)``."""
        x = self.origin[0] + self.h * np.arange(self.nx)
        y = self.origin[1] + self.h * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def x_coords(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    def center_of(self, i: int, j: int) -> np.ndarray:
        return np.array([self.origin[0] + self.h * i, self.origin[1] + self.h * j])

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "h": self.h, "origin": list(self.origin)}

    @classmethod
    def unit_square(cls, n: int) -> "Grid2D":
        """``n x n`` cells tiling ``[0, 1]^2`` exactly."""
        h = 1.0 / n
        return cls(n, n, h, (0.5 * h, 0.5 * h))

    @classmethod
    def centered_square(cls, n: int, half_width: float = 1.0) -> "Grid2D":
        """``n x n`` cells tiling ``[-L, L]^2``; an odd ``n`` puts a centre at 0."""
        h = 2.0 * half_width / n
        o = -half_width + 0.5 * h
        return cls(n, n, h, (o, o))


@dataclass(frozen=True)
class LipschitzSpec:
    kappa: float
    r0: float
    profile: np.ndarray  # graph height at each column centre, length nx

    def __post_init__(self):
        prof = np.asarray(self.profile, dtype=float).copy()
        prof.setflags(write=False)
        object.__setattr__(self, "profile", prof)
        if not 0.0 <= self.kappa <= 1.0 / (2 * N_DIM):
            raise ValueError(f"kappa must lie in [0, 1/{2 * N_DIM}] (got {self.kappa})")
        if self.r0 <= 0:
            raise ValueError(f"r0 must be positive (got {self.r0})")
        if prof.ndim != 1 or not np.all(np.isfinite(prof)):
            raise ValueError("profile must be a finite 1-D array")

    def max_slope(self, h: float) -> float:
        if self.profile.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.profile))) / h)

    @classmethod
    def from_function(cls, grid: Grid2D, fn: Callable, kappa: float, r0: float) -> "LipschitzSpec":
        return cls(kappa, r0, np.asarray(fn(grid.x_coords()), dtype=float))


@dataclass(frozen=True)
class DomainMask:
    grid: Grid2D
    labels: np.ndarray
    diameter: float
    lipschitz: Optional[LipschitzSpec] = field(default=None, compare=False)

    @property
    def nonexterior(self) -> np.ndarray:
        return self.labels != EXTERIOR

    @property
    def interior(self) -> np.ndarray:
        return self.labels == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.labels == BOUNDARY

    def counts(self) -> dict:
        return {
            "interior": int(np.sum(self.labels == INTERIOR)),
            "boundary": int(np.sum(self.labels == BOUNDARY)),
            "exterior": int(np.sum(self.labels == EXTERIOR)),
        }

    @property
    def area(self) -> float:
        return float(np.count_nonzero(self.nonexterior)) * self.grid.cell_area

    @classmethod
    def from_inside(cls, grid: Grid2D, inside: np.ndarray,
                    lipschitz: Optional[LipschitzSpec] = None) -> "DomainMask":
        inside = np.asarray(inside, dtype=bool)
        if inside.shape != grid.shape:
            raise ValueError(f"mask shape {inside.shape} does not match grid {grid.shape}")
        if not inside.any():
            raise ValueError("domain is empty")
        labels = classify(inside)
        diam = _diameter(grid, labels)
        if not diam > 0:
            raise ValueError("domain diameter must be positive")
        labels.setflags(write=False)
        return cls(grid, labels, diam, lipschitz)

    def to_dict(self) -> dict:
        d = {"grid": self.grid.to_dict(), "diameter": self.diameter, **self.counts()}
        if self.lipschitz is not None:
            d["kappa"] = self.lipschitz.kappa
            d["r0"] = self.lipschitz.r0
        return d


def classify(inside: np.ndarray) -> np.ndarray:
    """Label cells from a boolean membership array (off-lattice = exterior)."""
    padded = np.pad(inside, 1, constant_values=False)
    all_nbrs = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    labels = np.full(inside.shape, EXTERIOR, dtype=np.int8)
    labels[inside] = BOUNDARY
    labels[inside & all_nbrs] = INTERIOR
    return labels


def _diameter(grid: Grid2D, labels: np.ndarray) -> float:
    # extreme points of a lattice set always have an exterior neighbour
    ii, jj = np.nonzero(labels == BOUNDARY)
    if ii.size < 2:
        return 0.0
    pts = np.column_stack([ii, jj]).astype(float) * grid.h
    return float(pdist(pts).max())


def make_rect_domain(nx: int, ny: int, h: float, origin=(0.0, 0.0)) -> DomainMask:
    if nx <= 0 or ny <= 0 or h <= 0:
        raise ValueError(f"non-positive dimensions ({nx}, {ny}, {h})")
    grid = Grid2D(nx, ny, h, origin)
    return DomainMask.from_inside(grid, np.ones(grid.shape, dtype=bool))


def make_lipschitz_domain(grid: Grid2D, spec: LipschitzSpec) -> DomainMask:
    """Cells whose centre lies strictly above the graph of ``spec.profile``."""
    if spec.profile.shape != (grid.nx,):
        raise ValueError(f"profile needs {grid.nx} samples (got {spec.profile.shape})")
    slope = spec.max_slope(grid.h)
    if slope > spec.kappa * (1 + 1e-12):
        raise ValueError(f"profile slope {slope:.6g} exceeds kappa = {spec.kappa}")
    _, Y = grid.centers()
    inside = Y > spec.profile[:, None]
    if not inside.any():
        raise ValueError("domain is empty")
    return DomainMask.from_inside(grid, inside, spec)


def domain_from_dict(doc: dict) -> DomainMask:
    kind = doc.get("type")
    nx, ny, h = int(doc["nx"]), int(doc["ny"]), float(doc["h"])
    origin = tuple(doc.get("origin", (0.0, 0.0)))
    if kind == "rect":
        return make_rect_domain(nx, ny, h, origin)
    if kind == "lipschitz":
        grid = Grid2D(nx, ny, h, origin)
        spec = LipschitzSpec(float(doc["kappa"]), float(doc.get("r0", 1.0)),
                             np.asarray(doc["profile"], dtype=float))
        return make_lipschitz_domain(grid, spec)
    raise ValueError(f"unknown domain type {kind!r}")


def load_domain(path) -> DomainMask:
    return domain_from_dict(json.loads(Path(path).read_text()))


# -- cell sets ---------------------------------------------------------------

def _sqdist(grid: Grid2D, center) -> np.ndarray:
    X, Y = grid.centers()
    return (X - center[0]) ** 2 + (Y - center[1]) ** 2


def ball_cells(mask: DomainMask, center, radius: float) -> np.ndarray:
    """Non-exterior cells whose centre satisfies ``|x - center| < radius``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    d2 = _sqdist(mask.grid, center)
    return (d2 < radius * radius * (1 - TIE_RTOL)) & mask.nonexterior


def annulus_cells(mask: DomainMask, y, rho: float, j: int) -> np.ndarray:
    """Non-exterior cells with ``2^j rho <= |x - y| < 2^(j+1) rho``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if int(j) != j or j < 1:
        raise ValueError("annulus index j must be an integer >= 1")
    d2 = _sqdist(mask.grid, y)
    lo, hi = (2.0 ** j * rho) ** 2, (2.0 ** (j + 1) * rho) ** 2
    return (d2 >= lo * (1 - TIE_RTOL)) & (d2 < hi * (1 - TIE_RTOL)) & mask.nonexterior


def _vals(f) -> np.ndarray:
    return np.asarray(getattr(f, "values", f), dtype=float)


def integrate(field, cells: np.ndarray, h: float, weight=None) -> float:
    v = _vals(field)
    cells = np.asarray(cells, dtype=bool)
    if not cells.any():
        return 0.0
    w = v[cells] if weight is None else v[cells] * _vals(weight)[cells]
    return float(h * h * np.sum(w))


def average(field, cells: np.ndarray, h: float) -> float:
    cells = np.asarray(cells, dtype=bool)
    n = np.count_nonzero(cells)
    if n == 0:
        raise ValueError("average over an empty cell set")
    return integrate(field, cells, h) / (h * h * n)


# -- fields ------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid2D, fn: Callable, mask: Optional[DomainMask] = None):
        X, Y = grid.centers()
        v = np.asarray(fn(X, Y), dtype=float) * np.ones(grid.shape)
        if mask is not None:
            v = np.where(mask.nonexterior, v, 0.0)
        return cls(grid, v)

    @classmethod
    def zeros(cls, grid: Grid2D):
        return cls(grid, np.zeros(grid.shape))


@dataclass(frozen=True)
class VectorField:
    grid: Grid2D
    values: np.ndarray  # shape (nx, ny, 2)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape + (2,):
            raise ValueError(f"vector field shape {v.shape} does not match grid {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid2D):
        return cls(grid, np.zeros(grid.shape + (2,)))

    @classmethod
    def from_function(cls, grid: Grid2D, fn: Callable, mask: Optional[DomainMask] = None):
        X, Y = grid.centers()
        fx, fy = fn(X, Y)
        v = np.stack([np.broadcast_to(fx, grid.shape), np.broadcast_to(fy, grid.shape)], axis=-1)
        if mask is not None:
            v = np.where(mask.nonexterior[..., None], v, 0.0)
        return cls(grid, v)


def geometric_ladder(start: float, stop: float, steps_per_octave: int = 4) -> np.ndarray:
    """Radii ``start * 2**(k / steps_per_octave)`` for k = 0, 1, ... up to ``stop``.

    Powers of two are evaluated directly so every doubling of ``start``
    lands on the ladder bit-for-bit.
    """
    if start <= 0 or stop < start:
        raise ValueError(f"invalid ladder bounds ({start}, {stop})")
    kmax = int(np.floor(steps_per_octave * np.log2(stop / start) + 1e-9))
    return start * 2.0 ** (np.arange(kmax + 1) / steps_per_octave)
