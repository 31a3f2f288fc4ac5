"""Matrix weights: symmetric log/exp, log-averages, log-BMO, Muckenhoupt constants.

Matrix fields have shape ``(nx, ny, 2, 2)``.  All 2x2 spectral work is done
in closed form through the rotation angle of the eigenbasis, which stays
accurate for nearly isotropic matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .grid import DomainMask, Grid2D, geometric_ladder

SYM_ATOL = 1e-12


@dataclass(frozen=True)
class MatrixWeightField:
    grid: Grid2D
    values: np.ndarray
    lam: Optional[float] = None  # declared ellipticity bound, checked when given

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape + (2, 2):
            raise ValueError(f"matrix field shape {v.shape} does not match grid {self.grid.shape}")
        _check_spd(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.lam is not None:
            lam = ellipticity_lambda(self)
            if lam > self.lam * (1 + 1e-12):
                raise ValueError(f"condition number {lam:.6g} exceeds declared Lambda {self.lam}")

    @classmethod
    def constant(cls, grid: Grid2D, P0) -> "MatrixWeightField":
        return cls(grid, np.broadcast_to(np.asarray(P0, dtype=float), grid.shape + (2, 2)))

    @classmethod
    def identity(cls, grid: Grid2D) -> "MatrixWeightField":
        return cls.constant(grid, np.eye(2))


@dataclass(frozen=True)
class ScalarWeight:
    grid: Grid2D
    values: np.ndarray
    role: str = "mu"  # one of omega, mu, nu-free

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"weight shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("weights must be finite and non-negative")
        if self.role not in ("omega", "mu", "nu-free"):
            raise ValueError(f"unknown weight role {self.role!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def ones(cls, grid: Grid2D, role: str = "mu") -> "ScalarWeight":
        return cls(grid, np.ones(grid.shape), role)


@dataclass(frozen=True)
class AInftyParams:
    c1: float
    c2: float
    nu1: float
    nu2: float

    def to_dict(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "nu1": self.nu1, "nu2": self.nu2}


# -- 2x2 symmetric spectral calculus ------------------------------------------

def _arr(A) -> np.ndarray:
    return np.asarray(getattr(A, "values", A), dtype=float)


def _check_symmetric(A: np.ndarray):
    bad = np.abs(A[..., 0, 1] - A[..., 1, 0]) > SYM_ATOL * np.maximum(1.0, np.abs(A[..., 0, 1]))
    if np.any(bad):
        idx = tuple(int(k) for k in np.argwhere(bad)[0])
        raise ValueError(f"matrix at cell {idx} is not symmetric")


def _check_spd(A: np.ndarray):
    _check_symmetric(A)
    if not np.all(np.isfinite(A)):
        idx = tuple(int(k) for k in np.argwhere(~np.isfinite(A).all(axis=(-2, -1)))[0])
        raise ValueError(f"matrix at cell {idx} is not finite")
    lo, _, _ = eig2(A)
    if np.any(lo <= 0):
        idx = tuple(int(k) for k in np.argwhere(lo <= 0)[0])
        raise ValueError(f"matrix at cell {idx} is not positive definite")


def eig2(A):
    """Eigen-decomposition of symmetric 2x2 matrices.

    Returns ``(lmin, lmax, theta)`` where ``(cos theta, sin theta)`` is the
    unit eigenvector of ``lmax``.
    """
    A = _arr(A)
    a = A[..., 0, 0]
    b = 0.5 * (A[..., 0, 1] + A[..., 1, 0])
    c = A[..., 1, 1]
    m = 0.5 * (a + c)
    r = np.hypot(0.5 * (a - c), b)
    theta = 0.5 * np.arctan2(2.0 * b, a - c)
    return m - r, m + r, theta


def _assemble(fmin, fmax, theta) -> np.ndarray:
    cs, sn = np.cos(theta), np.sin(theta)
    out = np.empty(np.shape(theta) + (2, 2))
    out[..., 0, 0] = fmax * cs * cs + fmin * sn * sn
    out[..., 1, 1] = fmax * sn * sn + fmin * cs * cs
    off = (fmax - fmin) * cs * sn
    out[..., 0, 1] = off
    out[..., 1, 0] = off
    return out


def sym_log(A) -> np.ndarray:
    """Matrix logarithm of symmetric positive definite 2x2 matrices."""
    A = _arr(A)
    _check_spd(A)
    lo, hi, th = eig2(A)
    return _assemble(np.log(lo), np.log(hi), th)


def sym_exp(S) -> np.ndarray:
    """Matrix exponential of symmetric 2x2 matrices."""
    S = _arr(S)
    _check_symmetric(S)
    lo, hi, th = eig2(S)
    return _assemble(np.exp(lo), np.exp(hi), th)


def spectral_norm(A) -> np.ndarray:
    lo, hi, _ = eig2(A)
    return np.maximum(np.abs(lo), np.abs(hi))


def log_average(field, cells: np.ndarray) -> np.ndarray:
    """exp of the cellwise mean of log P over ``cells``."""
    cells = np.asarray(cells, dtype=bool)
    if not cells.any():
        raise ValueError("log-average over an empty cell set")
    L = sym_log(_arr(field)[cells])
    return sym_exp(L.mean(axis=0))


def scalar_weight_of(field) -> ScalarWeight:
    """omega(x) = |P(x)| (largest eigenvalue)."""
    _, hi, _ = eig2(field)
    return ScalarWeight(field.grid, hi, role="omega")


def ellipticity_lambda(field, mask: Optional[DomainMask] = None) -> float:
    lo, hi, _ = eig2(field)
    cond = hi / lo
    if mask is not None:
        cond = cond[mask.nonexterior]
    return float(np.max(cond))


# -- oscillation and Muckenhoupt scans -----------------------------------------

def default_ladder(mask: DomainMask, R: Optional[float] = None) -> np.ndarray:
    top = mask.diameter if R is None else R
    return geometric_ladder(mask.grid.h, max(top, mask.grid.h))


def _centers(mask: DomainMask, centers=None):
    if centers is None:
        return np.nonzero(mask.nonexterior)
    ci, cj = centers
    return np.asarray(ci), np.asarray(cj)


def log_bmo_seminorm(field, mask: DomainMask, R: float, centers=None,
                     return_witness: bool = False):
    """Largest mean spectral-norm oscillation of log P over balls in B(z, r) n Omega.

    Centres range over the non-exterior cells (or ``centers``), radii over
    the ladder ``h * 2**(k/4) <= R``.  The oscillation is measured around
    the mean of log P, i.e. the logarithm of the log-average.
    """
    ladder = geometric_ladder(mask.grid.h, max(R, mask.grid.h))
    ci, cj = _centers(mask, centers)
    L = sym_log(_arr(field))
    dev = _kernels.mean_spectral_deviation(L, mask.nonexterior, ci, cj, ladder / mask.grid.h)
    k, c = np.unravel_index(int(np.argmax(dev)), dev.shape)
    val = float(dev[k, c])
    if return_witness:
        return val, {"center": [int(ci[c]), int(cj[c])], "radius": float(ladder[k])}
    return val


def _ball_averages(values: np.ndarray, mask: DomainMask, ci, cj, radii) -> np.ndarray:
    valid = mask.nonexterior.astype(float)
    r_cells = np.asarray(radii, dtype=float) / mask.grid.h
    sums = _kernels.disc_sums(np.where(mask.nonexterior, values, 0.0), ci, cj, r_cells)
    counts = _kernels.disc_sums(valid, ci, cj, r_cells)
    return sums / counts


def muckenhoupt_Aq(weight, mask: DomainMask, q: float, radius_ladder: Optional[Sequence] = None,
                   centers=None, return_witness: bool = False):
    """Ladder lower bound of the A_q constant over balls B(z, r) n Omega."""
    if not q > 1:
        raise ValueError("muckenhoupt_Aq needs q > 1; use a_infty_params for A_1/A_inf questions")
    mu = _arr(weight)
    if np.any(mu[mask.nonexterior] <= 0):
        raise ValueError("weight must be positive on the domain")
    radii = default_ladder(mask) if radius_ladder is None else np.asarray(radius_ladder, float)
    ci, cj = _centers(mask, centers)
    safe = np.where(mask.nonexterior, mu, 1.0)
    avg_mu = _ball_averages(safe, mask, ci, cj, radii)
    avg_dual = _ball_averages(safe ** (-1.0 / (q - 1.0)), mask, ci, cj, radii)
    A = avg_dual ** (q - 1.0) * avg_mu
    k, c = np.unravel_index(int(np.argmax(A)), A.shape)
    val = float(A[k, c])
    if return_witness:
        return val, {"center": [int(ci[c]), int(cj[c])], "radius": float(radii[k])}
    return val


def subset_family(mask: DomainMask, rng: np.random.Generator, n_balls: int = 40,
                  n_sub: int = 6, radii: Optional[Sequence] = None) -> list:
    """Random pairs ``(O, B)`` of cell sets with ``O`` contained in ``B n Omega``.

    Each ball contributes itself, nested sub-balls sharing its centre,
    off-centre sub-balls and random cell subsets.
    """
    from .grid import ball_cells

    radii = default_ladder(mask) if radii is None else np.asarray(radii, float)
    radii = radii[radii >= 2 * mask.grid.h] if np.any(radii >= 2 * mask.grid.h) else radii
    X, Y = mask.grid.centers()
    ci, cj = np.nonzero(mask.nonexterior)
    pairs = []
    for _ in range(n_balls):
        c = rng.integers(ci.size)
        z = np.array([X[ci[c], cj[c]], Y[ci[c], cj[c]]])
        r = float(radii[rng.integers(radii.size)])
        B = ball_cells(mask, z, r)
        pairs.append((B, B))
        for _ in range(n_sub):
            kind = rng.integers(3)
            if kind == 0:
                O = ball_cells(mask, z, r * rng.uniform(0.1, 0.9))
            elif kind == 1:
                ang = rng.uniform(0, 2 * np.pi)
                off = r * rng.uniform(0, 0.5)
                O = ball_cells(mask, z + off * np.array([np.cos(ang), np.sin(ang)]),
                               r * rng.uniform(0.1, 0.45)) & B
            else:
                O = B & (rng.random(B.shape) < rng.uniform(0.05, 0.9))
            if O.any():
                pairs.append((O, B))
    return pairs


def a_infty_params(weight, mask: DomainMask, subset_family: Sequence) -> AInftyParams:
    """Empirical sandwich constants for mu(O)/mu(B) against |O|/|B|.

    The prefactors are first pinned at 1 and the exponents pushed as far as
    the tested pairs allow (nu2 as large as possible, nu1 as small as
    possible); the prefactors are then re-fitted as the smallest/largest
    values keeping every pair feasible.
    """
    mu = _arr(weight)
    s_list, rho_list = [], []
    for O, B in subset_family:
        O = np.asarray(O, bool) & mask.nonexterior
        B = np.asarray(B, bool) & mask.nonexterior
        nB = np.count_nonzero(B)
        if nB == 0 or not O.any():
            continue
        muB = float(np.sum(mu[B]))
        s_list.append(np.count_nonzero(O) / nB)
        rho_list.append(float(np.sum(mu[O])) / muB if muB > 0 else 1.0)
    s = np.asarray(s_list)
    rho = np.asarray(rho_list)
    proper = s < 1.0
    if np.any(proper):
        ls = np.log(s[proper])
        lr = np.log(np.maximum(rho[proper], np.finfo(float).tiny))
        nu2 = max(float(np.min(lr / ls)), 0.0)
        nu1 = float(np.max(lr / ls))
    else:
        nu1 = nu2 = 1.0
    c2 = max(1.0, float(np.max(rho / s ** nu2)))
    c1 = min(1.0, float(np.min(rho / s ** nu1)))
    return AInftyParams(c1, c2, nu1, nu2)


# -- synthetic generators --------------------------------------------------------

def _angle_field(X, Y, spec) -> np.ndarray:
    if isinstance(spec, (int, float)):
        return np.full(X.shape, float(spec))
    kind = spec.get("kind", "linear")
    if kind == "linear":
        return spec.get("theta0", 0.0) + spec.get("gx", 0.0) * X + spec.get("gy", 0.0) * Y
    if kind == "radial":
        return spec.get("theta0", 0.0) + spec.get("freq", 1.0) * np.hypot(X, Y)
    if kind == "polar":
        return np.arctan2(Y, X)
    if kind == "fourier":
        out = np.full(X.shape, spec.get("theta0", 0.0))
        for amp, kx, ky, ph in spec.get("modes", []):
            out = out + amp * np.sin(kx * X + ky * Y + ph)
        return out
    raise ValueError(f"unknown angle field kind {kind!r}")


def make_weight(grid: Grid2D, spec: dict) -> MatrixWeightField:
    """Build a synthetic matrix weight from a JSON-style description.

    Supported ``type`` values: ``identity``, ``constant`` (``matrix``),
    ``diag`` (``d``), ``rotated_anisotropy`` (``a``, ``theta``, optional
    ``log_scale``), ``checkerboard`` (``M``, ``block``), ``two_phase``
    (``kappa``, left/right split in log P) and ``power`` (``beta``,
    ``|x - center|**beta * Id``).
    """
    X, Y = grid.centers()
    kind = spec.get("type", "identity")
    if kind == "identity":
        return MatrixWeightField.identity(grid)
    if kind == "constant":
        return MatrixWeightField.constant(grid, spec["matrix"])
    if kind == "diag":
        return MatrixWeightField.constant(grid, np.diag(spec["d"]))
    if kind == "rotated_anisotropy":
        a = float(spec["a"])
        th = _angle_field(X, Y, spec.get("theta", 0.0))
        L = _assemble(np.full(X.shape, -a), np.full(X.shape, a), th)
        ls = spec.get("log_scale")
        if ls is not None:
            b = ls.get("amp", 0.0) * np.sin(ls.get("kx", 1.0) * X + ls.get("ky", 0.0) * Y
                                               + ls.get("phase", 0.0))
            L = L + b[..., None, None] * np.eye(2)
        return MatrixWeightField(grid, sym_exp(L))
    if kind == "checkerboard":
        M = float(spec["M"])
        block = int(spec.get("block", 1))
        i, j = np.meshgrid(np.arange(grid.nx), np.arange(grid.ny), indexing="ij")
        s = np.where(((i // block) + (j // block)) % 2 == 0, 1.0, M)
        return MatrixWeightField(grid, s[..., None, None] * np.eye(2))
    if kind == "two_phase":
        k = float(spec["kappa"])
        xc = spec.get("x_split", float(np.mean(grid.x_coords())))
        sgn = np.where(X < xc, 1.0, -1.0)
        L = np.zeros(grid.shape + (2, 2))
        L[..., 0, 0] = 0.5 * k * sgn
        return MatrixWeightField(grid, sym_exp(L))
    if kind == "power":
        beta = float(spec["beta"])
        c = spec.get("center", (0.0, 0.0))
        r = np.hypot(X - c[0], Y - c[1])
        return MatrixWeightField(grid, (r ** beta)[..., None, None] * np.eye(2))
    raise ValueError(f"unknown weight type {kind!r}")
