"""Discrete fractional maximal operator and weighted distribution functions.

Functions are zero-extended outside the domain (and off the lattice), so a
ball average is the sum of ``|f|`` over the lattice cells in the disc
divided by the number of *all* lattice offsets in the disc, wherever the
disc lies.  The supremum over radii is taken on a finite ladder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .grid import N_DIM, DomainMask, ScalarField, geometric_ladder


@dataclass(frozen=True)
class MaximalConfig:
    alpha: float = 0.0
    radius_ladder: np.ndarray = field(default_factory=lambda: np.array([]))
    rho_cut: Optional[float] = None
    method: str = "disc"  # disc | direct | square

    def __post_init__(self):
        lad = np.asarray(self.radius_ladder, dtype=float)
        if not 0 <= self.alpha < N_DIM:
            raise ValueError(f"alpha must lie in [0, {N_DIM}) (got {self.alpha})")
        if lad.size == 0 or np.any(lad <= 0) or np.any(np.diff(lad) <= 0):
            raise ValueError("radius ladder must be non-empty, positive and ascending")
        if self.rho_cut is not None and not self.rho_cut > 0:
            raise ValueError("rho_cut must be positive")
        if self.method not in ("disc", "direct", "square"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "square" and self.alpha != 0:
            raise ValueError("the square approximant path is only defined for alpha = 0")
        lad = lad.copy()
        lad.setflags(write=False)
        object.__setattr__(self, "radius_ladder", lad)

    def radii(self) -> np.ndarray:
        lad = self.radius_ladder
        if self.rho_cut is not None:
            lad = lad[lad < self.rho_cut]
            if lad.size == 0:
                raise ValueError("rho_cut removes every ladder radius")
        return lad

    @classmethod
    def default(cls, mask: DomainMask, alpha: float = 0.0, **kw) -> "MaximalConfig":
        """Ladder ``h * 2**(k/4)`` from ``h`` up to twice the domain diameter."""
        return cls(alpha, geometric_ladder(mask.grid.h, 2.0 * mask.diameter), **kw)


@dataclass(frozen=True)
class DistributionCurve:
    lambdas: np.ndarray
    masses: np.ndarray
    weight_id: str = "mu"

    def to_rows(self):
        return [(float(a), float(b)) for a, b in zip(self.lambdas, self.masses)]


def _abs_vals(f, mask: Optional[DomainMask]) -> np.ndarray:
    v = np.abs(np.asarray(getattr(f, "values", f), dtype=float))
    if mask is not None:
        v = np.where(mask.nonexterior, v, 0.0)
    return v


def maximal_scan(f, cfg: MaximalConfig, h: float, ci, cj, mask: Optional[DomainMask] = None,
                 return_argmax: bool = False):
    """M_alpha f at the cells ``(ci, cj)``; optionally the maximising radius."""
    vals = _abs_vals(f, mask)
    radii = cfg.radii()
    r_cells = radii / h
    if cfg.method == "square":
        half = np.unique(np.maximum(np.floor(r_cells).astype(int), 0))
        sums = _kernels.square_sums(vals, ci, cj, half)
        areas = (2 * half + 1.0) ** 2
        weights = np.ones(half.size)
        radii = (half + 0.5) * h
    else:
        sums = _kernels.disc_sums(vals, ci, cj, r_cells,
                                  method="prefix" if cfg.method == "disc" else "direct")
        areas = np.array([_kernels.disc_pixel_count(r) for r in r_cells], dtype=float)
        weights = radii ** cfg.alpha
    scaled = sums * (weights / areas)[:, None]
    best = np.max(scaled, axis=0)
    if return_argmax:
        return best, radii[np.argmax(scaled, axis=0)]
    return best


def fractional_maximal(f, cfg: MaximalConfig, mask: DomainMask, cells: Optional[np.ndarray] = None
                       ) -> ScalarField:
    """M_alpha |f| evaluated at every non-exterior cell (or at ``cells``).

    Cells outside the evaluation set are reported as zero.
    """
    where = mask.nonexterior if cells is None else np.asarray(cells, dtype=bool)
    ci, cj = np.nonzero(where)
    out = np.zeros(mask.grid.shape)
    if ci.size:
        out[ci, cj] = maximal_scan(f, cfg, mask.grid.h, ci, cj, mask)
    return ScalarField(mask.grid, out)


def distribution(f, mu, lambdas, mask: DomainMask, weight_id: str = "mu") -> DistributionCurve:
    """d(lambda) = h^2 * sum of mu over non-exterior cells with |f| > lambda."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValueError("lambdas must be ascending and positive")
    inside = mask.nonexterior
    v = np.abs(np.asarray(getattr(f, "values", f), dtype=float))[inside]
    w = np.asarray(getattr(mu, "values", mu), dtype=float)
    w = np.broadcast_to(w, mask.grid.shape)[inside] if w.ndim else np.full(v.shape, float(w))
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    idx = np.searchsorted(v, lam, side="right")
    masses = mask.grid.cell_area * tail[idx]
    return DistributionCurve(lam, masses, weight_id)


def fractional_distribution(f, mu, cfg: MaximalConfig, lambdas, mask: DomainMask,
                            weight_id: str = "mu") -> DistributionCurve:
    return distribution(fractional_maximal(f, cfg, mask), mu, lambdas, mask, weight_id)


def weak_type_constant(f, cfg: MaximalConfig, mask: DomainMask, q: float = 1.0,
                       lambdas=None) -> dict:
    """Empirical constant in lambda^q |{M_alpha f > lambda}|^(1 - alpha q / n) <= C ||f||_q^q."""
    if not (q >= 1 and cfg.alpha < N_DIM / q):
        raise ValueError("weak-type bound needs q >= 1 and alpha < n/q")
    Mf = fractional_maximal(f, cfg, mask)
    top = float(Mf.values.max())
    if top == 0:
        return {"C": 0.0, "lambda": None}
    lam = top * np.logspace(-4, 0, 200) * (1 - 1e-12) if lambdas is None else np.asarray(lambdas)
    curve = distribution(Mf, 1.0, lam, mask)
    lhs = lam ** q * curve.masses ** (1 - cfg.alpha * q / N_DIM)
    rhs = mask.grid.cell_area * float(np.sum(_abs_vals(f, mask) ** q))
    k = int(np.argmax(lhs))
    return {"C": float(lhs[k] / rhs), "lambda": float(lam[k])}
