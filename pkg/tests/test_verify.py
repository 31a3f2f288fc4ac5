import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deglap.instances import InstanceConfig, instance_family, make_instance
from deglap.report import CheckReport, dumps, ratio
from deglap.verify import (check_comparison, check_energy_estimate, check_levelset,
                           check_maximal_indicator, check_norm_transfer, check_vphi,
                           check_weak_type, energy_ratio, levelset_constants, solved, vphi_ratios)


@given(st.floats(1.1, 5.0), st.floats(1e-3, 1e3), st.floats(0, 2 * math.pi))
def test_vphi_equal_arguments_ratio_zero(p, r, a):
    z = np.array([[r * math.cos(a), r * math.sin(a)]])
    assert vphi_ratios(z, z, p)[0] == 0.0


def test_vphi_quadratic_case_exact():
    rep = check_vphi(2.0, trials=2000, seed=3)
    assert rep.empirical_C == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("p", [3.0, 4.0])
def test_vphi_below_supremum(p):
    # for p >= 2 the supremum 2**(p-2)/p is approached at antipodal equal-length pairs
    rep = check_vphi(p, trials=20_000, seed=1)
    sup = 2.0 ** (p - 2) / p
    assert rep.empirical_C <= sup * (1 + 1e-9)
    assert rep.empirical_C >= 0.9 * sup


def test_vphi_antipodal_pair_attains_supremum():
    z = np.array([[1.0, 0.0]])
    assert vphi_ratios(z, -z, 3.0)[0] == pytest.approx(2.0 / 3.0, rel=1e-14)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_vphi_witness_reevaluates(p):
    rep = check_vphi(p, trials=5000, seed=2)
    if p >= 2:
        w = rep.witness
        val = vphi_ratios(np.array([w["z1"]]), np.array([w["z2"]]), p)[0]
        assert val == pytest.approx(rep.empirical_C, rel=1e-9)
    else:
        for key, w in rep.witness.items():
            val = vphi_ratios(np.array([w["z1"]]), np.array([w["z2"]]), p, w["eps"])[0]
            assert val == pytest.approx(rep.details["C_eps"][key], rel=1e-9)


def test_vphi_more_trials_never_lower():
    small = check_vphi(3.0, trials=1000, seed=0)
    big = check_vphi(3.0, trials=4000, seed=0)
    assert big.details["C_half_trials"] >= small.empirical_C   # prefixes of the same stream


def test_vphi_small_p_scaling():
    rep = check_vphi(1.5, trials=20_000, seed=0)
    assert rep.passed
    C = rep.details["C_eps"]
    assert C["0.01"] >= C["0.1"] >= C["0.5"]


def test_energy_zero_data_and_gradient_data():
    z = check_energy_estimate([InstanceConfig(n=16, p=3.0, data="zero")])
    assert z.empirical_C == 0.0 and z.passed
    for p in (1.5, 2.0, 3.0):
        inst, rep = solved(InstanceConfig(n=16, p=p, data="grad_g", seed=5))
        assert energy_ratio(inst, rep)["ratio"] == pytest.approx(0.5, rel=1e-8)


def test_energy_estimate_small_family():
    rep = check_energy_estimate(instance_family(3, n=16), resolutions=[16, 24])
    assert rep.passed
    assert 0 < rep.empirical_C < 10
    assert len(rep.details["instances"]) == 6


def test_comparison_zero_data():
    rep = check_comparison(InstanceConfig(n=16, p=2.0, data="zero"))
    assert rep.passed and rep.empirical_C == 0.0


def test_comparison_random_instance():
    rep = check_comparison(InstanceConfig(n=24, p=3.0, seed=1))
    assert rep.passed
    assert rep.details["v_converged"]


def test_levelset_constants_monotone_in_gamma(rng):
    from deglap.instances import unit_square_domain
    m = unit_square_domain(12)
    MA = rng.random((12, 12))
    MG = 0.1 * rng.random((12, 12))
    lam = np.geomspace(1e-3, 1, 50)
    c = levelset_constants(MA, MG, np.ones((12, 12)), m, 0.5, 0.5, (0.5, 1.0, 2.0), lam)
    # larger gamma shrinks the data threshold eps**gamma lam, so the data term grows
    assert c["0.5"]["C"] >= c["1.0"]["C"] >= c["2.0"]["C"]


def test_levelset_data_alone():
    rep = check_levelset(InstanceConfig(n=16, p=2.0, weight="identity"), alpha=0.5)
    assert rep.passed
    assert rep.details["data_term_alone_suffices"] == (rep.empirical_C == 0.0)


def test_norm_transfer_gradient_data():
    for p in (2.0, 3.0):
        cfg = InstanceConfig(n=16, p=p, data="grad_g", seed=2)
        rep = check_norm_transfer(cfg, expected=2.0 ** (-p))
        assert rep.passed, rep.details["max_relative_deviation"]


def test_norm_transfer_zero_data_is_vacuous():
    rep = check_norm_transfer(InstanceConfig(n=16, data="zero"))
    assert rep.passed and rep.empirical_C == 0.0


def test_maximal_indicator_small():
    rep = check_maximal_indicator(n=96, rho=8 / 96, j_max=2)
    assert rep.passed
    with pytest.raises(ValueError):
        check_maximal_indicator(n=64, rho=2 / 64)


def test_weak_type_check():
    assert check_weak_type(n=24).passed


def test_reports_deterministic():
    a = check_levelset(InstanceConfig(n=12, p=2.0, weight="identity"))
    solved.cache_clear()
    b = check_levelset(InstanceConfig(n=12, p=2.0, weight="identity"))
    assert a.to_json() == b.to_json()


def test_report_roundtrip():
    rep = check_vphi(2.0, trials=100)
    back = CheckReport.from_dict(json.loads(rep.to_json()))
    assert back.to_json() == rep.to_json()
    assert json.loads(dumps({"x": math.inf}))


def test_ratio_conventions():
    assert ratio(0.0, 0.0) == 0.0 and ratio(1.0, 0.0) == math.inf and ratio(1.0, 4.0) == 0.25


@settings(max_examples=10)
@given(st.integers(0, 1000), st.sampled_from([1.5, 2.0, 3.0]))
def test_instances_reproducible(seed, p):
    a = make_instance(InstanceConfig(n=8, p=p, seed=seed))
    b = make_instance(InstanceConfig(n=8, p=p, seed=seed))
    assert np.array_equal(a.spec.F.values, b.spec.F.values)
    assert np.array_equal(a.spec.P.values, b.spec.P.values)
    assert a.kappa_measured == b.kappa_measured and a.Lambda >= 1.0
