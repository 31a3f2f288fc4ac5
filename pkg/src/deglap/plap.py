"""Discrete weighted p-Laplace Dirichlet problem solved by energy minimisation.

Discretisation
--------------
Unknowns live at cell centres.  A *gradient cell* is a non-exterior cell
``(i, j)`` whose forward neighbours ``(i+1, j)`` and ``(i, j+1)`` are also
non-exterior; it carries the forward-difference gradient

    G(i, j) = ((w[i+1, j] - w[i, j]) / h, (w[i, j+1] - w[i, j]) / h)

and the matrix weight and data sampled at ``(i, j)``.  The discrete energy

    F(w) = h^2 sum_c |P G|^p - p h^2 sum_c |P F|^(p-2) P F . P G

is a sum over gradient cells, so its derivative with respect to an interior
value is exactly ``p`` times the weak form tested with the hat function of
that cell.  Boundary cells are pinned to the datum ``g``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import INTERIOR, DomainMask, ScalarField, VectorField
from .weights import MatrixWeightField, spectral_norm

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
ARMIJO = 1e-4


@dataclass(frozen=True)
class ProblemSpec:
    mask: DomainMask
    P: MatrixWeightField
    p: float
    F: VectorField
    g: ScalarField
    delta: float = 0.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"exponent p must exceed 1 (got {self.p})")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        shape = self.mask.grid.shape
        if self.P.values.shape[:2] != shape or self.F.values.shape[:2] != shape \
                or self.g.values.shape != shape:
            raise ValueError("P, F and g must live on the mask's grid")
        inside = self.mask.nonexterior
        if not np.all(np.isfinite(self.g.values[inside])):
            raise ValueError("g must be finite on the domain")
        if not np.all(np.isfinite(self.F.values[inside])):
            raise ValueError("F must be finite on the domain")


@dataclass
class SolveReport:
    u: ScalarField
    energy: float
    weak_residual: float
    iterations: int
    converged: bool
    raw_residual: float = 0.0
    trace: list = field(default_factory=list)
    delta_path: list = field(default_factory=list)
    fallbacks: int = 0

    def metadata(self) -> dict:
        return {"energy": self.energy, "weak_residual": self.weak_residual,
                "raw_residual": self.raw_residual, "iterations": self.iterations,
                "converged": self.converged, "delta_path": self.delta_path,
                "gradient_fallbacks": self.fallbacks}


# -- discrete operators -----------------------------------------------------------

def gradient_cells(mask: DomainMask) -> np.ndarray:
    ne = mask.nonexterior
    gc = np.zeros_like(ne)
    gc[:-1, :-1] = ne[:-1, :-1] & ne[1:, :-1] & ne[:-1, 1:]
    return gc


def free_cells(mask: DomainMask) -> np.ndarray:
    """Interior cells whose three adjacent difference stencils all exist.

    Every other non-exterior cell is pinned to the boundary data.  Without
    this, cells next to a curved rim lose a stencil and affine data stop
    being discrete solutions.
    """
    gc = gradient_cells(mask)
    left = np.zeros_like(gc)
    left[1:] = gc[:-1]
    below = np.zeros_like(gc)
    below[:, 1:] = gc[:, :-1]
    return (mask.labels == INTERIOR) & gc & left & below


def discrete_gradient(w, mask: DomainMask) -> VectorField:
    """Forward-difference gradient on gradient cells, zero elsewhere."""
    v = np.asarray(getattr(w, "values", w), dtype=float)
    h = mask.grid.h
    gc = gradient_cells(mask)
    out = np.zeros(mask.grid.shape + (2,))
    gx = np.zeros(mask.grid.shape)
    gy = np.zeros(mask.grid.shape)
    gx[:-1, :] = (v[1:, :] - v[:-1, :]) / h
    gy[:, :-1] = (v[:, 1:] - v[:, :-1]) / h
    out[..., 0] = np.where(gc, gx, 0.0)
    out[..., 1] = np.where(gc, gy, 0.0)
    return VectorField(mask.grid, out)


class _Discretisation:
    """Sparse difference operators split into free (interior) and pinned columns."""

    def __init__(self, spec: ProblemSpec):
        mask = spec.mask
        self.spec = spec
        self.h = mask.grid.h
        nx, ny = mask.grid.shape
        self.gc = gradient_cells(mask)
        ci, cj = np.nonzero(self.gc)
        self.cells = (ci, cj)
        nc = ci.size
        lin = lambda i, j: i * ny + j  # noqa: E731
        rows = np.arange(nc)
        ones = np.ones(nc) / self.h
        N = nx * ny
        self.Dx = sp.csr_matrix((np.concatenate([-ones, ones]),
                                 (np.concatenate([rows, rows]),
                                  np.concatenate([lin(ci, cj), lin(ci + 1, cj)]))), shape=(nc, N))
        self.Dy = sp.csr_matrix((np.concatenate([-ones, ones]),
                                 (np.concatenate([rows, rows]),
                                  np.concatenate([lin(ci, cj), lin(ci, cj + 1)]))), shape=(nc, N))
        self.free_mask = free_cells(mask)
        self.free = np.flatnonzero(self.free_mask.ravel())
        self.Dxf = self.Dx[:, self.free].tocsc()
        self.Dyf = self.Dy[:, self.free].tocsc()
        self.P = spec.P.values[ci, cj]          # (nc, 2, 2)
        PF = np.einsum("cab,cb->ca", self.P, spec.F.values[ci, cj])
        nPF = np.linalg.norm(PF, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(nPF > 0, nPF ** (spec.p - 2), 0.0)
        self.b = fac[:, None] * PF               # |PF|^(p-2) PF
        self.PF = PF
        self.omega = spectral_norm(self.P)

    def full(self, w_free: np.ndarray, base: np.ndarray) -> np.ndarray:
        w = base.ravel().copy()
        w[self.free] = w_free
        return w

    def z(self, w_flat: np.ndarray) -> np.ndarray:
        G = np.stack([self.Dx @ w_flat, self.Dy @ w_flat], axis=1)
        return np.einsum("cab,cb->ca", self.P, G)


def _energy_terms(d: _Discretisation, z: np.ndarray, delta: float):
    p = d.spec.p
    s = np.sum(z * z, axis=1) + delta * delta
    return d.h ** 2 * (np.sum(s ** (p / 2)) - p * np.sum(d.b * z))


def _flux(d: _Discretisation, z: np.ndarray, delta: float) -> np.ndarray:
    """P (s^((p-2)/2) z - b): derivative of energy/p with respect to G."""
    p = d.spec.p
    s = np.sum(z * z, axis=1) + delta * delta
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(s > 0, s ** ((p - 2) / 2), 0.0)
    v = a[:, None] * z - d.b
    return np.einsum("cab,cb->ca", d.P, v)


def _grad_free(d: _Discretisation, flux: np.ndarray) -> np.ndarray:
    return d.h ** 2 * (d.Dxf.T @ flux[:, 0] + d.Dyf.T @ flux[:, 1])


def _hessian(d: _Discretisation, z: np.ndarray, delta: float):
    p = d.spec.p
    s = np.sum(z * z, axis=1) + delta * delta
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(s > 0, s ** ((p - 2) / 2), 1.0 if p == 2 else 0.0)
        c = np.where(s > 0, (p - 2) * s ** ((p - 4) / 2), 0.0)
    K = a[:, None, None] * np.eye(2) + c[:, None, None] * np.einsum("ca,cb->cab", z, z)
    H = np.einsum("cab,cbd,cde->cae", d.P, K, d.P)
    Hxx, Hxy, Hyy = (sp.diags(H[:, 0, 0]), sp.diags(H[:, 0, 1]), sp.diags(H[:, 1, 1]))
    A = (d.Dxf.T @ Hxx @ d.Dxf + d.Dxf.T @ Hxy @ d.Dyf + d.Dyf.T @ Hxy @ d.Dxf
         + d.Dyf.T @ Hyy @ d.Dyf)
    return (d.h ** 2 * A).tocsc()


def _scales(d: _Discretisation) -> tuple:
    """(gradient scale, residual normaliser) from the data."""
    zg = d.z(d.spec.g.values.ravel())
    gscale = max(float(np.max(np.linalg.norm(zg, axis=1), initial=0.0)),
                 float(np.max(np.linalg.norm(d.PF, axis=1), initial=0.0)))
    if not gscale > 0:
        gscale = 1.0
    om = float(np.max(d.omega, initial=1.0))
    return gscale, d.h * om * gscale ** (d.spec.p - 1)


def _check_boundary(spec: ProblemSpec, w: np.ndarray):
    bd = spec.mask.nonexterior & ~free_cells(spec.mask)
    gv = spec.g.values[bd]
    tol = 1e-12 * max(1.0, float(np.max(np.abs(gv), initial=0.0)))
    if np.any(np.abs(w[bd] - gv) > tol):
        raise ValueError("trial function does not match g on pinned boundary cells")


def energy(spec: ProblemSpec, w, delta: Optional[float] = None) -> float:
    """Discrete energy of ``w`` (regularised with ``delta``, default ``spec.delta``)."""
    wv = np.asarray(getattr(w, "values", w), dtype=float)
    _check_boundary(spec, wv)
    d = _Discretisation(spec)
    return float(_energy_terms(d, d.z(wv.ravel()), spec.delta if delta is None else delta))


def energy_gradient(spec: ProblemSpec, w, delta: Optional[float] = None) -> np.ndarray:
    """Gradient of the (regularised) energy with respect to the interior values.

    Returned as a full-lattice array, zero outside the interior cells.
    """
    wv = np.asarray(getattr(w, "values", w), dtype=float)
    d = _Discretisation(spec)
    dl = spec.delta if delta is None else delta
    g = spec.p * _grad_free(d, _flux(d, d.z(wv.ravel()), dl))
    out = np.zeros(wv.size)
    out[d.free] = g
    return out.reshape(wv.shape)


def weak_form(spec: ProblemSpec, w, phi) -> float:
    """Unregularised weak-form imbalance of ``w`` tested against ``phi``."""
    wv = np.asarray(getattr(w, "values", w), dtype=float)
    pv = np.asarray(getattr(phi, "values", phi), dtype=float)
    d = _Discretisation(spec)
    flux = _flux(d, d.z(wv.ravel()), 0.0)
    G = np.stack([d.Dx @ pv.ravel(), d.Dy @ pv.ravel()], axis=1)
    return float(d.h ** 2 * np.sum(flux * G))


def weak_residual(spec: ProblemSpec, w) -> np.ndarray:
    """Weak-form imbalance for every interior hat test, as a full-lattice array."""
    wv = np.asarray(getattr(w, "values", w), dtype=float)
    d = _Discretisation(spec)
    r = _grad_free(d, _flux(d, d.z(wv.ravel()), 0.0))
    out = np.zeros(wv.size)
    out[d.free] = r
    return out.reshape(wv.shape)


def solve(spec: ProblemSpec, tol: float = DEFAULT_TOL, max_iter: int = 500,
          initial: Optional[np.ndarray] = None, delta0: Optional[float] = None) -> SolveReport:
    """Minimise the discrete energy with damped Newton and delta-continuation.

    Stages use delta_k = delta0 / 4**k down to 1e-8 times the data scale,
    followed by an unregularised stage; the run stops as soon as the
    unregularised weak residual (normalised by ``h |P|_max scale^(p-1)``)
    drops below ``tol``.  ``max_iter`` caps the Newton steps per stage.
    """
    d = _Discretisation(spec)
    base = np.where(spec.mask.nonexterior, spec.g.values, 0.0)
    if initial is None:
        w0 = np.where(d.free_mask, 0.0, base)
    else:
        w0 = np.where(d.free_mask, np.asarray(initial, float), base)
    x = w0.ravel()[d.free].copy()
    gscale, rnorm = _scales(d)

    def unreg_residual(xf):
        z = d.z(d.full(xf, base))
        return float(np.max(np.abs(_grad_free(d, _flux(d, z, 0.0))), initial=0.0))

    if math.isclose(spec.p, 2.0):
        deltas = [0.0]
    else:
        start = delta0 if delta0 is not None else (spec.delta if spec.delta > 0 else 0.1 * gscale)
        deltas = []
        dl = start
        while dl > 1e-8 * gscale:
            deltas.append(dl)
            dl /= 4.0
        deltas.append(0.0)

    trace, path = [], []
    total_iter = 0
    fallbacks = 0
    res = unreg_residual(x)
    converged = res <= tol * rnorm
    for stage, dl in enumerate(deltas):
        if converged:
            break
        path.append(dl)
        for it in range(max_iter):
            z = d.z(d.full(x, base))
            E = _energy_terms(d, z, dl) / spec.p
            g = _grad_free(d, _flux(d, z, dl))
            if x.size == 0 or np.max(np.abs(g)) <= 1e-14 * rnorm:
                break
            step = None
            try:
                H = _hessian(d, z, dl)
                with np.errstate(all="raise"):
                    step = spla.spsolve(H, -g)
                if not np.all(np.isfinite(step)) or g @ step >= 0:
                    step = None
            except (RuntimeError, FloatingPointError, ValueError, np.linalg.LinAlgError):
                step = None
            if step is None:
                fallbacks += 1
                log.info("Newton system unusable at stage %d, iteration %d; taking a gradient step",
                         stage, it)
                step = -g / max(float(np.max(np.abs(g))), 1e-300) * gscale * d.h
            slope = float(g @ step)
            gnorm = float(np.linalg.norm(g))
            noise = 64 * np.finfo(float).eps * max(1.0, abs(E))
            t = 1.0
            accepted = False
            while t > 1e-12:
                xn = x + t * step
                zn = d.z(d.full(xn, base))
                En = _energy_terms(d, zn, dl) / spec.p
                if En <= E + ARMIJO * t * slope:
                    accepted = True
                    break
                # energy differences below roundoff: fall back on the gradient norm
                if -t * slope <= noise and En <= E + noise and \
                        np.linalg.norm(_grad_free(d, _flux(d, zn, dl))) < gnorm:
                    accepted = True
                    break
                t *= 0.5
            total_iter += 1
            if not accepted:
                # no representable decrease left at this delta
                break
            x = xn
            trace.append({"stage": stage, "delta": dl, "iteration": it,
                          "energy": En * spec.p, "step": t,
                          "decrement": -slope})
            if np.max(np.abs(t * step)) <= 1e-15 * max(1.0, float(np.max(np.abs(x)))):
                break
        res = unreg_residual(x)
        converged = res <= tol * rnorm
        if converged:
            break

    u = d.full(x, base).reshape(spec.mask.grid.shape)
    u = np.where(spec.mask.nonexterior, u, 0.0)
    E_final = float(_energy_terms(d, d.z(u.ravel()), 0.0))
    return SolveReport(ScalarField(spec.mask.grid, u), E_final, res / rnorm, total_iter,
                       bool(converged), res, trace, path, fallbacks)


def solve_homogeneous(spec: ProblemSpec, region_cells: np.ndarray, boundary_values,
                      tol: float = DEFAULT_TOL, max_iter: int = 500) -> SolveReport:
    """Zero-data problem on a sub-region with values pinned on the region's rim."""
    region = np.asarray(region_cells, dtype=bool) & spec.mask.nonexterior
    sub = DomainMask.from_inside(spec.mask.grid, region)
    bv = np.asarray(getattr(boundary_values, "values", boundary_values), dtype=float)
    sub_spec = replace(spec, mask=sub, F=VectorField.zeros(spec.mask.grid),
                       g=ScalarField(spec.mask.grid, np.where(region, bv, 0.0)))
    return solve(sub_spec, tol=tol, max_iter=max_iter)


# -- cellwise quantities ---------------------------------------------------------------

def weighted_gradient_power(P: MatrixWeightField, vec, mask: DomainMask, p: float) -> ScalarField:
    """|P V|^p on gradient cells (zero elsewhere) for a cellwise vector field V."""
    V = np.asarray(getattr(vec, "values", vec), dtype=float)
    PV = np.einsum("...ab,...b->...a", P.values, V)
    out = np.where(gradient_cells(mask), np.linalg.norm(PV, axis=-1) ** p, 0.0)
    return ScalarField(mask.grid, out)


def v_p_map(zeta, p: float) -> np.ndarray:
    """|zeta|^((p-2)/2) zeta, continuous at zero."""
    z = np.asarray(zeta, dtype=float)
    if not p > 1:
        raise ValueError("p must exceed 1")
    n = np.linalg.norm(z, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(n > 0, n ** ((p - 2) / 2), 0.0)
    return fac * z


def shifted_N(a, t, p: float):
    """Shifted N-function of t**p/p with shift a, in closed form.

    int_0^t s max(a, s)**(p-2) ds = a**(p-2) t**2 / 2 for t <= a, and
    a**p / 2 + (t**p - a**p) / p beyond.
    """
    a = np.asarray(a, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        low = np.where(a > 0, a ** (p - 2) * t * t / 2, 0.0)
    high = a ** p / 2 + (t ** p - a ** p) / p
    out = np.where(t <= a, low, high)
    return out[()] if out.ndim == 0 else out
