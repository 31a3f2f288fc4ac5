"""Weighted Lebesgue, Lorentz, two-weight Lorentz and psi-Morrey norms.

Distribution functions of grid fields are step functions, so the Lorentz
integrals are evaluated exactly between consecutive jump points
(``method="jump"``).  A log-spaced trapezoid rule in lambda is kept as
``method="grid"`` for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from . import _kernels
from .grid import N_DIM, DomainMask, Grid2D
from .maximal import distribution
from .report import CheckReport

N_LAMBDA = 400


@dataclass(frozen=True)
class LorentzIndices:
    q: float
    s: float = math.inf

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError(f"Lorentz index q must be positive (got {self.q})")
        if not self.s > 0:
            raise ValueError(f"Lorentz index s must be positive or inf (got {self.s})")


def _vals(f) -> np.ndarray:
    return np.asarray(getattr(f, "values", f), dtype=float)


def _weight(mu, shape) -> np.ndarray:
    if mu is None:
        return np.ones(shape)
    return np.broadcast_to(_vals(mu), shape)


def weighted_Lq_norm(f, omega, q: float, mask: DomainMask) -> float:
    """(h^2 * sum |f|^q omega^q)^(1/q) over non-exterior cells."""
    if not q > 0:
        raise ValueError("q must be positive")
    inside = mask.nonexterior
    a = np.abs(_vals(f)[inside])
    w = _weight(omega, mask.grid.shape)[inside]
    return float((mask.grid.cell_area * np.sum(a ** q * w ** q)) ** (1.0 / q))


# -- two-weight machinery ----------------------------------------------------------

@dataclass(frozen=True)
class SigmaFunction:
    """Sigma(tau) = integral of nu over [0, tau], stored as a table.

    ``func`` optionally carries a closed form used for evaluation instead
    of linear interpolation (this is what makes the identity exact).
    """

    taus: np.ndarray
    nu: np.ndarray
    Sigma: np.ndarray
    doubling: tuple
    func: Optional[Callable] = field(default=None, compare=False)
    name: str = "table"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.func is not None:
            return self.func(t)
        if np.any(t > self.taus[-1] * (1 + 1e-12)):
            raise ValueError(f"Sigma table only covers [0, {self.taus[-1]}]")
        return np.interp(t, self.taus, self.Sigma)

    @property
    def c1(self) -> float:
        return self.doubling[0]

    @property
    def c2(self) -> float:
        return self.doubling[1]

    @property
    def t_max(self) -> float:
        return math.inf if self.func is not None else float(self.taus[-1])

    def validate(self):
        if np.any(self.nu < 0) or np.any(np.diff(self.Sigma) < 0):
            raise ValueError("Sigma must come from a non-negative density")
        c1, c2 = self.doubling
        if not (c1 > 1 and c2 >= c1):
            raise ValueError(f"Sigma fails the doubling condition (c1={c1}, c2={c2})")

    @classmethod
    def from_density(cls, taus, nu, name: str = "table") -> "SigmaFunction":
        taus = np.asarray(taus, dtype=float)
        nu = np.asarray(nu, dtype=float)
        if taus[0] != 0 or np.any(np.diff(taus) <= 0):
            raise ValueError("tau grid must start at 0 and increase")
        S = cumulative_trapezoid(nu, taus, initial=0.0)
        return cls(taus, nu, S, _table_doubling(taus, S), None, name)

    @classmethod
    def power(cls, a: float, t_max: float = 1.0, n: int = 257) -> "SigmaFunction":
        """Sigma(t) = t**a, nu(t) = a t**(a-1); doubling constants 2**a exactly."""
        taus = np.linspace(0.0, t_max, n)
        if a == 1.0:
            fn = _identity
        else:
            def fn(t, a=a):
                return np.asarray(t, dtype=float) ** a
        nu = a * np.where(taus > 0, taus, 1.0) ** (a - 1) if a != 1.0 else np.ones(n)
        return cls(taus, nu, fn(taus), (2.0 ** a, 2.0 ** a), fn, f"t^{a:g}")

    @classmethod
    def identity(cls) -> "SigmaFunction":
        return cls.power(1.0)

    @classmethod
    def random_doubling(cls, rng: np.random.Generator, t_max: float, a_range=(1.0, 2.5),
                        n: int = 2001) -> "SigmaFunction":
        """Table-sampled Sigma with density t**(a-1) times a bounded random factor."""
        a = rng.uniform(*a_range)
        taus = np.concatenate([[0.0], np.geomspace(t_max * 1e-8, t_max, n - 1)])
        k = rng.uniform(0.5, 3.0, size=3)
        ph = rng.uniform(0, 2 * np.pi, size=3)
        amp = rng.uniform(0.0, 0.3, size=3)
        lt = np.log(np.where(taus > 0, taus, 1.0) / t_max)
        mod = np.exp(sum(amp[i] * np.sin(k[i] * lt + ph[i]) for i in range(3)))
        nu = np.where(taus > 0, taus, 0.0) ** (a - 1.0) * mod
        if a == 1.0:
            nu[0] = mod[0]
        return cls.from_density(taus, nu, name=f"random(a={a:.3f})")


def _identity(t):
    return np.asarray(t, dtype=float)


def _table_doubling(taus: np.ndarray, S: np.ndarray) -> tuple:
    # for piecewise-linear Sigma the ratio Sigma(2t)/Sigma(t) is monotone
    # between the breakpoints taus and taus/2, so these give exact extremes
    half = taus[-1] / 2
    t = np.unique(np.concatenate([taus[taus <= half], taus / 2]))
    t = t[(t > 0) & (t <= half)]
    St = np.interp(t, taus, S)
    S2t = np.interp(2 * t, taus, S)
    ok = St > 0
    r = S2t[ok] / St[ok]
    if r.size == 0:
        return (1.0, 1.0)
    return (float(r.min()), float(r.max()))


# -- Lorentz norms -------------------------------------------------------------------

def _level_data(f, mu, mask: DomainMask):
    """Distinct positive levels u_1 < ... < u_m and tail masses mu(|f| >= u_k)."""
    inside = mask.nonexterior
    v = np.abs(_vals(f)[inside])
    w = _weight(mu, mask.grid.shape)[inside]
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    tail = mask.grid.cell_area * np.cumsum(w[::-1])[::-1]
    levels, first = np.unique(v, return_index=True)
    masses = tail[first]
    pos = levels > 0
    return levels[pos], masses[pos]


def _lorentz(f, mu, idx: LorentzIndices, mask: DomainMask, sigma, method: str,
             n_lambda: int) -> float:
    levels, masses = _level_data(f, mu, mask)
    if levels.size == 0:
        return 0.0
    D = masses if sigma is None else np.asarray(sigma(masses), dtype=float)
    q, s = idx.q, idx.s
    if math.isinf(s):
        return float(np.max(levels * D ** (1.0 / q)))
    if method == "jump":
        prev = np.concatenate([[0.0], levels[:-1]])
        total = np.sum((q / s) * D ** (s / q) * (levels ** s - prev ** s))
        return float(total ** (1.0 / s))
    if method == "grid":
        top = levels[-1]
        lam = np.geomspace(top * 1e-6, top * (1 + 1e-9), n_lambda)
        d = distribution(f, _weight(mu, mask.grid.shape), lam, mask).masses
        if sigma is not None:
            d = np.asarray(sigma(d), dtype=float)
        integrand = q * (lam ** q * d) ** (s / q)
        total = trapezoid(integrand, np.log(lam))
        # below the grid d is constant, so the head integral is exact
        head = (q / s) * d[0] ** (s / q) * lam[0] ** s
        return float((total + head) ** (1.0 / s))
    raise ValueError(f"unknown quadrature method {method!r}")


def lorentz_norm(f, mu, idx: LorentzIndices, mask: DomainMask, method: str = "jump",
                 n_lambda: int = N_LAMBDA) -> float:
    """Weighted Lorentz quasi-norm of ``f`` with weight ``mu`` (``None`` for Lebesgue)."""
    return _lorentz(f, mu, idx, mask, None, method, n_lambda)


def generalized_lorentz_norm(f, mu, sigma: SigmaFunction, idx: LorentzIndices, mask: DomainMask,
                             method: str = "jump", n_lambda: int = N_LAMBDA) -> float:
    """Two-weight Lorentz quasi-norm: the distribution passes through Sigma first."""
    sigma.validate()
    if sigma.func is _identity:
        return _lorentz(f, mu, idx, mask, None, method, n_lambda)
    return _lorentz(f, mu, idx, mask, sigma, method, n_lambda)


def sigma_doubling_checks(sigma: SigmaFunction, samples: int = 10_000, seed: int = 0,
                       rtol: float = 1e-12) -> CheckReport:
    """Sub-additivity and small-scale decay of a doubling Sigma on random samples.

    Checks Sigma(a + b) <= c2 (Sigma(a) + Sigma(b)) and
    Sigma(eps t) <= c1 eps**log2(c1) Sigma(t) for eps in (0, 1/2).  The
    reported constant is the worst left/right ratio (<= 1 means the
    inequality held with the certified doubling constants).
    """
    sigma.validate()
    c1, c2 = sigma.doubling
    rng = np.random.default_rng(seed)
    T = sigma.t_max if math.isfinite(sigma.t_max) else 1.0
    pow10 = rng.uniform(-6, 0, size=(2, samples))
    s1 = (T / 2) * 10.0 ** pow10[0] * (rng.random(samples) > 0.02)
    s2 = (T / 2) * 10.0 ** pow10[1]
    lhs1 = sigma(s1 + s2)
    rhs1 = c2 * (sigma(s1) + sigma(s2))
    eps = 0.5 * 10.0 ** rng.uniform(-4, 0, size=samples)
    eps = np.where(eps >= 0.5, np.nextafter(0.5, 0), eps)
    t = T * 10.0 ** rng.uniform(-6, 0, size=samples)
    lhs2 = sigma(eps * t)
    rhs2 = c1 * eps ** math.log2(c1) * sigma(t)
    r1 = np.where(rhs1 > 0, lhs1 / np.where(rhs1 > 0, rhs1, 1.0), 0.0)
    r2 = np.where(rhs2 > 0, lhs2 / np.where(rhs2 > 0, rhs2, 1.0), 0.0)
    v1 = int(np.sum(lhs1 > rhs1 * (1 + rtol)))
    v2 = int(np.sum(lhs2 > rhs2 * (1 + rtol)))
    k1, k2 = int(np.argmax(r1)), int(np.argmax(r2))
    worst = max(float(r1[k1]), float(r2[k2]))
    return CheckReport(
        name="sigma_doubling",
        statement="doubling-sigma-subadditivity-and-decay",
        passed=(v1 == 0 and v2 == 0),
        empirical_C=worst,
        witness={"subadditive": {"sigma1": float(s1[k1]), "sigma2": float(s2[k1]),
                                 "ratio": float(r1[k1])},
                 "decay": {"eps": float(eps[k2]), "t": float(t[k2]), "ratio": float(r2[k2])}},
        sweep={"samples": samples, "eps_range": [float(eps.min()), float(eps.max())]},
        conventions=["ratio = lhs / rhs with the certified doubling constants",
                     "eps sampled log-uniformly in (0, 1/2), 1/2 excluded"],
        seed=seed,
        details={"sigma": sigma.name, "c1": c1, "c2": c2,
                 "violations_subadditive": v1, "violations_decay": v2},
    )


# -- Morrey -----------------------------------------------------------------------------

@dataclass(frozen=True)
class MorreyShape:
    psi: np.ndarray      # (nx, ny, len(radii))
    radii: np.ndarray
    upsilon: float
    validate: bool = True

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        radii = np.asarray(self.radii, dtype=float)
        if psi.ndim != 3 or psi.shape[2] != radii.size:
            raise ValueError("psi must be sampled on cells x radii")
        if np.any(psi <= 0):
            raise ValueError("psi must be positive")
        if self.validate:
            if not 0 < self.upsilon < N_DIM:
                raise ValueError(f"upsilon must lie in (0, {N_DIM})")
            ratio = self.doubling_ratio()
            if ratio > 2.0 ** self.upsilon * (1 + 1e-12):
                raise ValueError(f"psi(x, 2t)/psi(x, t) reaches {ratio:.6g} > 2^upsilon")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "radii", radii)

    def doubling_ratio(self) -> float:
        """Largest sampled psi(x, 2t) / psi(x, t) over ladder pairs."""
        r = np.asarray(self.radii, float)
        worst = 0.0
        for k, t in enumerate(r):
            k2 = np.nonzero(np.isclose(r, 2 * t, rtol=1e-12, atol=0))[0]
            if k2.size:
                worst = max(worst, float(np.max(self.psi[..., k2[0]] / self.psi[..., k])))
        return worst

    @classmethod
    def power(cls, grid: Grid2D, radii, upsilon: float) -> "MorreyShape":
        radii = np.asarray(radii, dtype=float)
        psi = np.broadcast_to(radii ** upsilon, grid.shape + (radii.size,))
        return cls(psi, radii, upsilon)

    @classmethod
    def ball_measure(cls, mask: DomainMask, radii) -> "MorreyShape":
        """psi(z, r) = |B(z, r) n Omega| in pixel measure (no doubling check)."""
        radii = np.asarray(radii, dtype=float)
        psi = np.ones(mask.grid.shape + (radii.size,))
        ci, cj = np.nonzero(mask.nonexterior)
        cnt = _kernels.disc_sums(mask.nonexterior.astype(float), ci, cj, radii / mask.grid.h)
        psi[ci, cj, :] = mask.grid.cell_area * cnt.T
        return cls(psi, radii, float(N_DIM), validate=False)


def morrey_norm(f, shape: MorreyShape, q: float, mask: DomainMask, return_witness: bool = False):
    """Ladder supremum of (int_{Omega(z,r)} |f|^q / psi(z, r))^(1/q), z in Omega, r < D0."""
    if not q > 0:
        raise ValueError("q must be positive")
    keep = shape.radii < mask.diameter
    radii = shape.radii[keep]
    if radii.size == 0:
        raise ValueError("no ladder radius below the domain diameter")
    ci, cj = np.nonzero(mask.nonexterior)
    a = np.where(mask.nonexterior, np.abs(_vals(f)), 0.0) ** q
    sums = mask.grid.cell_area * _kernels.disc_sums(a, ci, cj, radii / mask.grid.h)
    psi = shape.psi[ci, cj][:, keep].T
    vals = sums / psi
    k, c = np.unravel_index(int(np.argmax(vals)), vals.shape)
    out = float(vals[k, c] ** (1.0 / q))
    if return_witness:
        return out, {"center": [int(ci[c]), int(cj[c])], "radius": float(radii[k])}
    return out
