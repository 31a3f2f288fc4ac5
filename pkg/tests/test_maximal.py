import numpy as np
import pytest
from hypothesis import given, strategies as st

from deglap.grid import DomainMask, Grid2D, geometric_ladder, make_rect_domain
from deglap.maximal import (MaximalConfig, distribution, fractional_distribution,
                            fractional_maximal, maximal_scan, weak_type_constant)


def _full_mask(grid):
    return DomainMask.from_inside(grid, np.ones(grid.shape, bool))


def _brute_maximal(vals, i0, j0, radii_cells, h, alpha):
    """Loop oracle: zero extension, denominator counts every lattice offset in the disc."""
    nx, ny = vals.shape
    best = 0.0
    for r in radii_cells:
        R = int(np.ceil(r)) + 1
        s, cnt = 0.0, 0
        for di in range(-R, R + 1):
            for dj in range(-R, R + 1):
                if di * di + dj * dj < r * r * (1 - 1e-12):
                    cnt += 1
                    i, j = i0 + di, j0 + dj
                    if 0 <= i < nx and 0 <= j < ny:
                        s += abs(vals[i, j])
        best = max(best, (r * h) ** alpha * s / cnt)
    return best


def test_constant_field_far_from_boundary():
    g = Grid2D(41, 41, 0.1)
    m = _full_mask(g)
    cfg = MaximalConfig(0.0, geometric_ladder(0.1, 1.0))
    val = maximal_scan(np.full(g.shape, 2.5), cfg, g.h, np.array([20]), np.array([20]), m)
    assert val[0] == pytest.approx(2.5, rel=1e-14)


def test_indicator_of_unit_ball_at_origin():
    g = Grid2D(65, 65, 1 / 16, origin=(-2.0, -2.0))
    m = _full_mask(g)
    X, Y = g.centers()
    chi = (X ** 2 + Y ** 2 < 1).astype(float)
    assert g.center_of(32, 32) == pytest.approx((0.0, 0.0))
    cfg = MaximalConfig.default(m)
    assert maximal_scan(chi, cfg, g.h, np.array([32]), np.array([32]), m)[0] == pytest.approx(1.0)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 1.9))
def test_scan_matches_loop_oracle(seed, alpha):
    rng = np.random.default_rng(seed)
    m = make_rect_domain(11, 8, 0.1)
    f = rng.normal(size=(11, 8))
    lad = geometric_ladder(0.1, 1.5)
    ci = rng.integers(0, 11, size=3)
    cj = rng.integers(0, 8, size=3)
    for method in ("disc", "direct"):
        got = maximal_scan(f, MaximalConfig(alpha, lad, method=method), 0.1, ci, cj, m)
        for k in range(3):
            ref = _brute_maximal(f, ci[k], cj[k], lad / 0.1, 0.1, alpha)
            assert got[k] == pytest.approx(ref, rel=1e-12)


def test_zero_extension_at_corner():
    m = make_rect_domain(10, 10, 1.0)
    cfg = MaximalConfig(0.0, np.array([1.5, 30.0]))
    # at r = 1.5 the corner disc holds 9 offsets but only 4 lattice cells
    val = maximal_scan(np.ones((10, 10)), cfg, 1.0, np.array([0]), np.array([0]), m)
    assert val[0] == pytest.approx(4 / 9)


def test_argmax_radius():
    m = make_rect_domain(9, 9, 1.0)
    f = np.zeros((9, 9))
    f[4, 4] = 1.0
    lad = np.array([0.5, 1.5, 3.0])
    best, rad = maximal_scan(f, MaximalConfig(0.0, lad), 1.0, np.array([4]), np.array([4]), m,
                             return_argmax=True)
    assert best[0] == 1.0 and rad[0] == 0.5


def test_sublinear_and_homogeneous(rng):
    m = make_rect_domain(16, 16, 1 / 16)
    cfg = MaximalConfig.default(m, alpha=0.5)
    f, g = rng.normal(size=(2, 16, 16))
    Mf = fractional_maximal(f, cfg, m).values
    Mg = fractional_maximal(g, cfg, m).values
    assert np.all(fractional_maximal(f + g, cfg, m).values <= (Mf + Mg) * (1 + 1e-12))
    assert np.allclose(fractional_maximal(-3 * f, cfg, m).values, 3 * Mf, rtol=1e-13)


def test_monotone_in_alpha_when_radii_below_one(rng):
    m = make_rect_domain(12, 12, 1 / 12)
    lad = geometric_ladder(1 / 12, 1.0)
    f = rng.random((12, 12))
    vals = [fractional_maximal(f, MaximalConfig(a, lad), m).values for a in (0.0, 0.5, 1.0)]
    assert np.all(vals[0] >= vals[1]) and np.all(vals[1] >= vals[2])


def test_square_method_matches_loop(rng):
    m = make_rect_domain(12, 12, 1.0)
    f = rng.random((12, 12))
    lad = geometric_ladder(1.0, 12.0)
    sq = fractional_maximal(f, MaximalConfig(0.0, lad, method="square"), m).values
    for i0, j0 in [(0, 0), (5, 7), (11, 3)]:
        best = 0.0
        for k in np.unique(np.floor(lad).astype(int)):
            block = np.zeros((12 + 2 * k, 12 + 2 * k))
            block[k:k + 12, k:k + 12] = f
            best = max(best, block[i0:i0 + 2 * k + 1, j0:j0 + 2 * k + 1].sum() / (2 * k + 1) ** 2)
        assert sq[i0, j0] == pytest.approx(best, rel=1e-12)


def test_rho_cut_is_strict():
    lad = np.array([1.0, 2.0, 4.0])
    assert list(MaximalConfig(0.0, lad, rho_cut=2.0).radii()) == [1.0]
    with pytest.raises(ValueError):
        MaximalConfig(0.0, lad, rho_cut=1.0).radii()


@pytest.mark.parametrize("kw", [dict(alpha=2.0), dict(alpha=-0.1), dict(radius_ladder=[2.0, 1.0]),
                                dict(radius_ladder=[]), dict(rho_cut=0.0), dict(method="cube"),
                                dict(method="square", alpha=0.5)])
def test_config_errors(kw):
    base = dict(alpha=0.0, radius_ladder=[1.0, 2.0])
    with pytest.raises(ValueError):
        MaximalConfig(**{**base, **kw})


def test_distribution_of_step_function():
    m = make_rect_domain(10, 10, 0.1)
    f = np.zeros((10, 10))
    f[:5] = 2.0
    curve = distribution(f, 1.0, [1.0, 2.0, 3.0], m)
    # strict inequality: lambda = 2 excludes the value 2
    assert np.allclose(curve.masses, [0.5, 0.0, 0.0])


@given(st.integers(0, 2 ** 32 - 1))
def test_distribution_brute_force(seed):
    rng = np.random.default_rng(seed)
    m = make_rect_domain(9, 7, 0.2)
    f = rng.normal(size=(9, 7)).round(1)
    mu = rng.random((9, 7))
    lam = np.array([0.05, 0.1, 0.5, 1.0, 5.0])
    curve = distribution(f, mu, lam, m)
    for l, d in zip(lam, curve.masses):
        assert d == pytest.approx(0.04 * mu[np.abs(f) > l].sum(), abs=1e-14)
    assert distribution(f, mu, [np.abs(f).max() + 1], m).masses[0] == 0.0


def test_distribution_rejects_bad_lambdas():
    m = make_rect_domain(4, 4, 1.0)
    with pytest.raises(ValueError):
        distribution(np.ones((4, 4)), 1.0, [1.0, 0.5], m)


def test_maximal_dominates_function_at_alpha_zero(rng):
    m = make_rect_domain(14, 14, 1 / 14)
    f = rng.normal(size=(14, 14))
    cfg = MaximalConfig.default(m)
    lam = np.logspace(-2, 0.5, 30)
    dM = fractional_distribution(f, 1.0, cfg, lam, m).masses
    d = distribution(f, 1.0, lam, m).masses
    assert np.all(dM >= d)


def test_weak_type_finite(rng):
    m = make_rect_domain(24, 24, 1 / 24)
    f = rng.normal(size=(24, 24))
    for a in (0.0, 0.5, 1.0):
        out = weak_type_constant(f, MaximalConfig.default(m, alpha=a), m)
        assert np.isfinite(out["C"]) and out["C"] > 0
    assert weak_type_constant(np.zeros((24, 24)), MaximalConfig.default(m), m)["C"] == 0.0
    with pytest.raises(ValueError):
        weak_type_constant(f, MaximalConfig.default(m, alpha=1.5), m, q=2.0)
