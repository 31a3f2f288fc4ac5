"""Seeded synthetic problem instances built from analytic data.

All data are closed-form functions of position on the unit square, so the
same seed sampled at two resolutions gives the same continuum problem.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .grid import DomainMask, Grid2D, ScalarField, VectorField
from .plap import ProblemSpec, discrete_gradient
from .weights import ellipticity_lambda, log_bmo_seminorm, make_weight

DATA_MODES = ("random", "grad_g", "zero", "affine")


@dataclass(frozen=True)
class InstanceConfig:
    n: int = 32
    p: float = 2.0
    seed: int = 0
    anisotropy: float = 0.04     # eigenvalues of log P are +-anisotropy
    log_scale: float = 0.0       # amplitude of an isotropic log-scale wave
    data: str = "random"
    weight: str = "rotated"      # rotated | identity | diag21
    n_modes: int = 3
    bmo_stride: int = 2          # centre subsampling for the measured log-BMO

    def __post_init__(self):
        if self.data not in DATA_MODES:
            raise ValueError(f"data must be one of {DATA_MODES}")
        if self.weight not in ("rotated", "identity", "diag21"):
            raise ValueError(f"unknown weight family {self.weight!r}")


@dataclass(frozen=True)
class Instance:
    config: InstanceConfig
    spec: ProblemSpec
    kappa_measured: float
    Lambda: float

    def meta(self) -> dict:
        g = self.spec.mask.grid
        return {"kappa_measured": self.kappa_measured, "Lambda": self.Lambda,
                "p": self.spec.p, "h": g.h, "nx": g.nx, "ny": g.ny,
                "seed": self.config.seed, "instance": asdict(self.config)}


def unit_square_domain(n: int) -> DomainMask:
    grid = Grid2D.unit_square(n)
    return DomainMask.from_inside(grid, np.ones(grid.shape, dtype=bool))


def _modes(rng: np.random.Generator, count: int, amp: float = 1.0):
    k = rng.integers(1, 4, size=(count, 2))
    ph = rng.uniform(0, 2 * np.pi, size=count)
    a = amp * rng.normal(size=count) / np.sqrt(count)
    return [(float(a[m]), int(k[m, 0]), int(k[m, 1]), float(ph[m])) for m in range(count)]


def _eval_modes(modes, X, Y) -> np.ndarray:
    out = np.zeros(X.shape)
    for a, kx, ky, ph in modes:
        out += a * np.sin(np.pi * (kx * X + ky * Y) + ph)
    return out


def _weight_spec(cfg: InstanceConfig, rng: np.random.Generator) -> dict:
    if cfg.weight == "identity":
        return {"type": "identity"}
    if cfg.weight == "diag21":
        return {"type": "diag", "d": [2.0, 1.0]}
    theta = {"kind": "fourier", "theta0": float(rng.uniform(0, np.pi)),
             "modes": [[m[0], np.pi * m[1], np.pi * m[2], m[3]] for m in _modes(rng, 2, 1.0)]}
    spec = {"type": "rotated_anisotropy", "a": cfg.anisotropy, "theta": theta}
    if cfg.log_scale > 0:
        spec["log_scale"] = {"amp": cfg.log_scale, "kx": float(np.pi * rng.integers(1, 3)),
                             "ky": float(np.pi * rng.integers(1, 3)),
                             "phase": float(rng.uniform(0, 2 * np.pi))}
    return spec


def make_instance(cfg: InstanceConfig) -> Instance:
    rng = np.random.default_rng(cfg.seed)
    mask = unit_square_domain(cfg.n)
    grid = mask.grid
    X, Y = grid.centers()
    P = make_weight(grid, _weight_spec(cfg, rng))

    slope = rng.normal(size=2)
    offset = float(rng.normal())
    g_modes = _modes(rng, cfg.n_modes, 0.3)
    F_modes = (_modes(rng, cfg.n_modes), _modes(rng, cfg.n_modes))
    affine = offset + slope[0] * X + slope[1] * Y
    if cfg.data == "zero":
        g = np.zeros(grid.shape)
        F = np.zeros(grid.shape + (2,))
    elif cfg.data == "affine":
        g = affine
        F = np.zeros(grid.shape + (2,))
    else:
        g = affine + _eval_modes(g_modes, X, Y)
        if cfg.data == "grad_g":
            F = discrete_gradient(g, mask).values
        else:
            F = np.stack([_eval_modes(F_modes[0], X, Y), _eval_modes(F_modes[1], X, Y)], axis=-1)
    spec = ProblemSpec(mask, P, float(cfg.p), VectorField(grid, F), ScalarField(grid, g))

    ci, cj = np.nonzero(mask.nonexterior)
    sel = (ci % cfg.bmo_stride == 0) & (cj % cfg.bmo_stride == 0)
    kappa = log_bmo_seminorm(P, mask, mask.diameter, centers=(ci[sel], cj[sel]))
    return Instance(cfg, spec, float(kappa), float(ellipticity_lambda(P, mask)))


def instance_family(count: int = 20, n: int = 32, seed: int = 0, ps=(1.5, 2.0, 3.0),
                    **kw) -> list:
    """``count`` configurations cycling through ``ps`` with seeds ``seed, seed+1, ...``."""
    return [InstanceConfig(n=n, p=float(ps[k % len(ps)]), seed=seed + k, **kw)
            for k in range(count)]
