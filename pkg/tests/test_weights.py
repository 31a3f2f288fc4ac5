import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from deglap.grid import DomainMask, Grid2D, ball_cells, make_rect_domain
from deglap.verify import check_muckenhoupt_trend
from deglap.weights import (MatrixWeightField, a_infty_params, eig2, ellipticity_lambda,
                            default_ladder, log_average, log_bmo_seminorm, make_weight,
                            muckenhoupt_Aq, scalar_weight_of, spectral_norm, subset_family,
                            sym_exp, sym_log)


def _random_spd(rng, size, max_log_cond=np.log(1e6)):
    ang = rng.uniform(0, np.pi, size)
    l1 = rng.uniform(-3, 3, size)
    l2 = l1 + rng.uniform(0, max_log_cond, size)
    c, s = np.cos(ang), np.sin(ang)
    Q = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    D = np.zeros(size + (2, 2))
    D[..., 0, 0] = np.exp(l1)
    D[..., 1, 1] = np.exp(l2)
    return Q @ D @ np.swapaxes(Q, -1, -2)


def test_log_identity_and_exp_diag():
    assert np.array_equal(sym_log(np.eye(2)), np.zeros((2, 2)))
    out = sym_exp(np.diag([0.3, -1.2]))
    assert np.allclose(out, np.diag(np.exp([0.3, -1.2])), rtol=1e-14, atol=0)


@pytest.mark.filterwarnings("ignore:logm result may be inaccurate")
def test_log_exp_against_scipy(rng):
    A = _random_spd(rng, (50,))
    L = sym_log(A)
    for k in range(50):
        ref = sla.logm(A[k]).real
        assert np.linalg.norm(L[k] - ref, 2) <= 1e-10 * max(1.0, np.linalg.norm(ref, 2))


@given(st.integers(0, 2 ** 32 - 1))
def test_round_trips(seed):
    rng = np.random.default_rng(seed)
    A = _random_spd(rng, (20,))
    back = sym_exp(sym_log(A))
    err = np.linalg.norm(back - A, 2, axis=(-2, -1)) / np.linalg.norm(A, 2, axis=(-2, -1))
    assert err.max() <= 1e-10
    S = sym_log(A)
    err2 = np.linalg.norm(sym_log(sym_exp(S)) - S, 2, axis=(-2, -1)) / \
        np.maximum(np.linalg.norm(S, 2, axis=(-2, -1)), 1e-300)
    assert err2.max() <= 1e-10


def test_rejects_non_spd_with_cell_index():
    g = Grid2D(4, 4, 1.0)
    vals = np.broadcast_to(np.eye(2), (4, 4, 2, 2)).copy()
    vals[2, 3] = [[1.0, 2.0], [2.0, 1.0]]
    with pytest.raises(ValueError, match=r"\(2, 3\)"):
        MatrixWeightField(g, vals)
    vals[2, 3] = [[1.0, 0.5], [0.0, 1.0]]
    with pytest.raises(ValueError, match=r"\(2, 3\)"):
        MatrixWeightField(g, vals)
    with pytest.raises(ValueError):
        sym_log(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_declared_lambda_checked():
    g = Grid2D(4, 4, 1.0)
    MatrixWeightField.constant(g, np.diag([2.0, 1.0]))
    with pytest.raises(ValueError):
        MatrixWeightField(g, MatrixWeightField.constant(g, np.diag([3.0, 1.0])).values, lam=2.0)


def test_log_average_examples():
    g = Grid2D(8, 8, 1.0)
    cells = np.ones((8, 8), bool)
    P0 = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert np.allclose(log_average(MatrixWeightField.constant(g, P0), cells), P0, rtol=1e-12)
    # alternating diag(e, 1) and diag(1/e, 1) on equal counts
    vals = np.zeros((8, 8, 2, 2))
    vals[..., 1, 1] = 1.0
    vals[..., 0, 0] = np.where((np.add.outer(np.arange(8), np.arange(8)) % 2) == 0, np.e, 1 / np.e)
    assert np.allclose(log_average(vals, cells), np.eye(2), atol=1e-14)


def test_log_average_scalar_inverse(rng):
    mu = rng.uniform(0.2, 5.0, (6, 6))
    cells = rng.random((6, 6)) < 0.6
    cells[0, 0] = True
    M = mu[..., None, None] * np.eye(2)
    a = log_average(M, cells)[0, 0]
    b = log_average((1 / mu)[..., None, None] * np.eye(2), cells)[0, 0]
    assert a * b == pytest.approx(1.0, rel=1e-13)


def test_log_average_rotation_congruence(rng):
    A = _random_spd(rng, (5, 5), np.log(100.0))
    th = 0.7
    Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    cells = np.ones((5, 5), bool)
    lhs = log_average(Q.T @ A @ Q, cells)
    rhs = Q.T @ log_average(A, cells) @ Q
    assert np.linalg.norm(lhs - rhs, 2) <= 1e-10 * np.linalg.norm(rhs, 2)


def test_bmo_constant_is_zero():
    m = make_rect_domain(12, 12, 0.1)
    P = MatrixWeightField.constant(m.grid, np.array([[3.0, 1.0], [1.0, 2.0]]))
    assert log_bmo_seminorm(P, m, m.diameter) == pytest.approx(0.0, abs=1e-14)


def test_bmo_two_phase():
    kappa = 0.3
    m = make_rect_domain(24, 24, 1.0)
    P = make_weight(m.grid, {"type": "two_phase", "kappa": kappa})
    val, wit = log_bmo_seminorm(P, m, m.diameter, return_witness=True)
    assert kappa / 4 <= val <= kappa / 2 + 1e-12
    assert val >= 0.45 * kappa
    # oracle: left fraction t of the ball gives mean deviation 2 t (1 - t) kappa
    B = ball_cells(m, m.grid.center_of(*wit["center"]), wit["radius"])
    X, _ = m.grid.centers()
    t = np.count_nonzero(B & (X < np.mean(m.grid.x_coords()))) / np.count_nonzero(B)
    assert val == pytest.approx(2 * t * (1 - t) * kappa, rel=1e-12)


@given(st.floats(-5, 5))
def test_bmo_scale_invariant(logt):
    m = make_rect_domain(10, 10, 0.1)
    P = make_weight(m.grid, {"type": "rotated_anisotropy", "a": 0.2,
                             "theta": {"kind": "linear", "gx": 3.0, "gy": 1.0}})
    base = log_bmo_seminorm(P, m, m.diameter)
    scaled = log_bmo_seminorm(np.exp(logt) * P.values, m, m.diameter)
    assert scaled == pytest.approx(base, rel=1e-9, abs=1e-12)


def test_omega_and_lambda():
    g = Grid2D(4, 4, 1.0)
    Id = MatrixWeightField.identity(g)
    assert np.all(scalar_weight_of(Id).values == 1.0) and ellipticity_lambda(Id) == 1.0
    D = MatrixWeightField.constant(g, np.diag([2.0, 1.0]))
    assert np.allclose(scalar_weight_of(D).values, 2.0) and ellipticity_lambda(D) == pytest.approx(2.0)


def test_lambda_matches_eigen_oracle(rng):
    g = Grid2D(7, 5, 1.0)
    A = _random_spd(rng, (7, 5), np.log(50.0))
    ev = np.linalg.eigvalsh(A)
    ref = np.max(ev[..., 1] / ev[..., 0])
    assert ellipticity_lambda(MatrixWeightField(g, A)) == pytest.approx(ref, rel=1e-10)
    assert np.allclose(spectral_norm(A), ev[..., 1], rtol=1e-12)
    lmin, lmax, _ = eig2(A)
    assert np.allclose(lmin, ev[..., 0], rtol=1e-10)


def test_aq_rejects_q_le_one():
    m = make_rect_domain(8, 8, 0.1)
    with pytest.raises(ValueError):
        muckenhoupt_Aq(np.ones((8, 8)), m, 1.0)


def test_aq_of_constant_weight():
    m = make_rect_domain(16, 16, 0.1)
    assert muckenhoupt_Aq(np.ones((16, 16)), m, 2.0) == 1.0
    assert muckenhoupt_Aq(np.full((16, 16), 3.7), m, 1.5) == pytest.approx(1.0, rel=1e-13)


def test_aq_checkerboard_balanced_closed_form():
    m = make_rect_domain(24, 24, 1.0)
    vals = [muckenhoupt_Aq(make_weight(m.grid, {"type": "checkerboard", "M": M}).values[..., 0, 0],
                           m, 2.0) for M in (2.0, 5.0, 20.0)]
    assert vals[0] < vals[1] < vals[2]
    for M, v in zip((2.0, 5.0, 20.0), vals):
        closed = (1 + M) / 2 * (1 + 1 / M) / 2
        assert 0.95 * closed <= v <= closed * (1 + 1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.floats(1.1, 4.0))
def test_aq_at_least_one(seed, q):
    rng = np.random.default_rng(seed)
    m = make_rect_domain(10, 10, 0.1)
    mu = np.exp(rng.normal(size=(10, 10)))
    assert muckenhoupt_Aq(mu, m, q) >= 1.0 - 1e-12


def _dense_aq_oracle(n, centers, ladder, refine=8):
    """Max over the same balls of continuum averages computed on a refined lattice."""
    hf = 2.0 / (n * refine)
    xf = -1 + hf * (np.arange(n * refine) + 0.5)
    XF, YF = np.meshgrid(xf, xf, indexing="ij")
    muf = np.hypot(XF, YF) ** 0.5
    best = 0.0
    for z in centers:
        d2 = (XF - z[0]) ** 2 + (YF - z[1]) ** 2
        for r in ladder:
            B = d2 < r * r
            if B.any():
                best = max(best, np.mean(muf[B]) * np.mean(1 / muf[B]))
    return best


def test_aq_power_weight_matches_quadrature():
    n = 40
    g = Grid2D.centered_square(n)
    m = DomainMask.from_inside(g, np.ones(g.shape, bool))
    X, Y = g.centers()
    mu = np.hypot(X, Y) ** 0.5
    ci, cj = np.nonzero(m.nonexterior)
    sel = (ci % 4 == 0) & (cj % 4 == 0)
    lad = default_ladder(m)
    val = muckenhoupt_Aq(mu, m, 2.0, lad, centers=(ci[sel], cj[sel]))
    ref = _dense_aq_oracle(n, list(zip(X[ci[sel], cj[sel]], Y[ci[sel], cj[sel]])), lad)
    assert abs(val - ref) <= 0.05 * ref


def test_a_infty_constant_weight(rng):
    m = make_rect_domain(16, 16, 0.1)
    fam = subset_family(m, rng, n_balls=10)
    p = a_infty_params(np.ones((16, 16)), m, fam)
    assert (p.c1, p.c2, p.nu1, p.nu2) == (1.0, 1.0, 1.0, 1.0)


def test_a_infty_power_weight(rng):
    n = 40
    g = Grid2D.centered_square(n)
    m = DomainMask.from_inside(g, np.ones(g.shape, bool))
    X, Y = g.centers()
    mu = np.hypot(X, Y) ** 0.5
    fam = subset_family(m, rng, n_balls=30)
    # nested balls about the origin: mu(B(0, s r)) / mu(B(0, r)) ~ (s^2)^(5/4)
    nested = [(ball_cells(m, (0, 0), 0.8 * t), ball_cells(m, (0, 0), 0.8)) for t in (0.25, 0.5)]
    p = a_infty_params(mu, m, fam + nested)
    assert p.nu2 < 1.0
    assert p.nu2 <= 1.25 <= p.nu1 * 1.05
    for O, B in fam + nested:
        s = np.count_nonzero(O) / np.count_nonzero(B)
        r = mu[O].sum() / mu[B].sum()
        assert p.c1 * s ** p.nu1 <= r * (1 + 1e-12)
        assert r <= p.c2 * s ** p.nu2 * (1 + 1e-12)


def test_a_infty_identical_pair():
    m = make_rect_domain(12, 12, 0.1)
    B = ball_cells(m, (0.5, 0.5), 0.4)
    p = a_infty_params(np.linspace(1, 2, 144).reshape(12, 12), m, [(B, B)])
    assert p.c1 <= 1.0 <= p.c2


def test_small_log_bmo_trend():
    rep = check_muckenhoupt_trend(n=24)
    assert rep.passed
    rows = sorted(rep.details["rows"], key=lambda r: r["kappa"])
    assert rows[0]["Aq"] < 1.05


@pytest.mark.parametrize("spec", [
    {"type": "identity"}, {"type": "constant", "matrix": [[2.0, 0.5], [0.5, 1.0]]},
    {"type": "diag", "d": [2.0, 1.0]},
    {"type": "rotated_anisotropy", "a": 0.3, "theta": {"kind": "polar"}},
    {"type": "rotated_anisotropy", "a": 0.1, "theta": {"kind": "radial", "freq": 2.0},
     "log_scale": {"amp": 0.5, "kx": 3.0}},
    {"type": "checkerboard", "M": 4.0, "block": 2}, {"type": "two_phase", "kappa": 1.0},
    {"type": "power", "beta": 0.5, "center": [0.013, 0.017]},
])
def test_generators_produce_valid_fields(spec):
    g = Grid2D.centered_square(10)
    P = make_weight(g, spec)
    assert P.values.shape == (10, 10, 2, 2)
    assert ellipticity_lambda(P) >= 1.0
