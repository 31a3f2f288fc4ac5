import json
import os
import subprocess
import sys

import numpy as np
import pytest

from deglap import io as dio
from deglap.cli import ConfigError, config_hash, main, report_summary, validate_config
from deglap.grid import Grid2D, make_rect_domain
from deglap.maximal import DistributionCurve
from deglap.weights import MatrixWeightField, make_weight


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_field_csv_roundtrip(tmp_path, rng):
    m = make_rect_domain(7, 5, 0.1)
    f = rng.normal(size=(7, 5))
    dio.write_field_csv(tmp_path / "f.csv", f, m, config_hash="abc")
    text = (tmp_path / "f.csv").read_text()
    assert text.startswith("# config_hash=abc\ni,j,value\n")
    assert np.array_equal(dio.read_field_csv(tmp_path / "f.csv", m.grid), f)


def test_matrix_csv_roundtrip(tmp_path):
    g = Grid2D(6, 6, 0.2)
    P = make_weight(g, {"type": "rotated_anisotropy", "a": 0.3, "theta": {"kind": "polar"}})
    dio.write_matrix_csv(tmp_path / "P.csv", P)
    back = dio.read_matrix_csv(tmp_path / "P.csv", g)
    assert np.array_equal(back.values, P.values)


def test_distribution_csv_roundtrip(tmp_path):
    c = DistributionCurve(np.array([0.1, 1.0, 10.0]), np.array([1.0, 0.5, 0.0]))
    dio.write_distribution_csv(tmp_path / "d.csv", c, "h")
    back = dio.read_distribution_csv(tmp_path / "d.csv")
    assert np.array_equal(back.lambdas, c.lambdas) and np.array_equal(back.masses, c.masses)


def test_config_hash_ignores_out_dir():
    a = {"command": "verify", "params": {"check": "vphi"}, "out_dir": "x"}
    b = {"params": {"check": "vphi"}, "command": "verify", "out_dir": "y"}
    assert config_hash(a) == config_hash(b) and len(config_hash(a)) == 16
    assert config_hash({**a, "seed": 1}) != config_hash(a)


@pytest.mark.parametrize("cfg,field", [
    ({"command": "verify", "params": {"check": "vphi", "trails": 10}}, "trails"),
    ({"command": "verify", "params": {"check": "vphi", "p": 0.5}}, "p"),
    ({"command": "solve", "params": {"domain": {"n": 8}}}, "p"),
    ({"command": "verify", "params": {"check": "nope"}}, "check"),
    ({"command": "sweep", "params": {"check": "vphi", "p": 2.0}}, "sweep"),
    ({"command": "solve", "params": {"p": 2.0}, "extra": 1}, "extra"),
])
def test_schema_errors_name_the_field(cfg, field):
    with pytest.raises(ConfigError, match=field):
        validate_config(cfg)


def test_missing_input_file(tmp_path):
    cfg = {"command": "solve", "params": {"p": 2.0}, "inputs": {"g": "missing.csv"}}
    with pytest.raises(ConfigError, match="missing.csv"):
        validate_config(cfg, tmp_path)


def test_cli_exit_codes(tmp_path, capsys):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text('{"command": "solve",\n "params": }')
    assert main(["solve", "--config", str(bad_json)]) == 2
    assert "line 2" in capsys.readouterr().err
    unknown = _write(tmp_path / "u.json", {"command": "verify", "params": {"check": "vphi", "x": 1}})
    assert main(["verify", "--config", unknown]) == 2
    mism = _write(tmp_path / "m.json", {"command": "verify", "params": {"check": "vphi"}})
    assert main(["solve", "--config", mism]) == 2
    # a matrix weight that is not positive definite is a numerical failure
    non_spd = _write(tmp_path / "n.json", {"command": "solve", "params": {
        "p": 2.0, "domain": {"n": 8}, "P": {"type": "constant", "matrix": [[1.0, 2.0], [2.0, 1.0]]}}})
    assert main(["solve", "--config", non_spd, "--out", str(tmp_path / "o")]) == 3
    assert "deglap.weights" in capsys.readouterr().err
    nonconv = _write(tmp_path / "c.json", {"command": "solve", "params": {
        "p": 3.0, "domain": {"n": 12}, "g": {"affine": [0, 1, 1]}, "F": {"constant": [3.0, -1.0]},
        "max_iter": 3, "tol": 1e-300}})
    assert main(["solve", "--config", nonconv, "--out", str(tmp_path / "c")]) == 3


def test_cli_solve_artifacts(tmp_path):
    cfg = _write(tmp_path / "s.json", {"command": "solve", "params": {
        "p": 3.0, "domain": {"n": 16}, "P": {"type": "diag", "d": [2.0, 1.0]}, "g": "affine",
        "F": "zero"}})
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    meta = json.loads((out / "solve.json").read_text())
    assert meta["converged"] and meta["max_abs_u_minus_g"] <= 1e-10
    assert (out / "solution.csv").read_text().startswith(f"# config_hash={meta['config_hash']}")
    assert not [p for p in out.iterdir() if p.name.endswith(".tmp")]


def test_cli_maxop_norms_weights(tmp_path):
    docs = {
        "maxop": {"domain": {"n": 16}, "field": {"indicator": {"center": [0.5, 0.5], "radius": 0.2}},
                  "alpha": 0.5},
        "norms": {"domain": {"n": 16}, "field": "random", "q": 2.0, "s": 1.0,
                  "sigma": {"power": 2.0}, "psi": {"upsilon": 1.0}},
        "weights": {"domain": {"n": 12}, "P": {"type": "checkerboard", "M": 4.0}, "n_balls": 5},
    }
    for cmd, params in docs.items():
        cfg = _write(tmp_path / f"{cmd}.json", {"command": cmd, "params": params})
        assert main([cmd, "--config", cfg, "--out", str(tmp_path / cmd)]) == 0
    norms = json.loads((tmp_path / "norms" / "norms.json").read_text())["norms"]
    assert set(norms) == {"lorentz", "lebesgue", "two_weight_lorentz", "morrey"}
    assert (tmp_path / "maxop" / "distribution.csv").exists()
    w = json.loads((tmp_path / "weights" / "weights.json").read_text())
    assert w["Aq"] >= 1.0


def test_seed_from_environment(tmp_path, monkeypatch):
    cfg = _write(tmp_path / "v.json", {"command": "verify", "params": {"check": "vphi", "trials": 50}})
    monkeypatch.setenv("DEGLAP_SEED", "7")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    rep = json.loads((tmp_path / "a" / "vphi_p2.json").read_text())
    assert rep["seed"] == 7 and rep["config"]["seed"] == 7
    monkeypatch.setenv("DEGLAP_SEED", "x")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "b")]) == 2


def test_sweep_and_summary(tmp_path):
    cfg = _write(tmp_path / "sw.json", {"command": "sweep", "params": {
        "check": "vphi", "p": [2.0, 3.0], "trials": 200}})
    out = tmp_path / "sw"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--parallel", "2"]) == 0
    rows = (out / "sweep_vphi.csv").read_text().splitlines()
    assert rows[1] == "p,check,empirical_C,passed" and len(rows) == 4
    assert main(["summary", "--out", str(out)]) == 0
    md = (out / "summary.md").read_text()
    assert md.count("| pass |") == 2 and "FAIL" not in md
    # a second config in the same directory needs --allow-mixed
    other = _write(tmp_path / "o.json", {"command": "verify", "params": {"check": "vphi", "trials": 10}})
    assert main(["verify", "--config", other, "--out", str(out)]) == 0
    assert main(["summary", "--out", str(out)]) == 2
    assert main(["summary", "--out", str(out), "--allow-mixed"]) == 0
    with pytest.raises(ConfigError):
        report_summary(tmp_path / "empty")


def test_summary_flags_failures(tmp_path):
    d = {"name": "x", "statement": "s", "passed": False, "empirical_C": 3.0, "grid": {},
         "config_hash": "h"}
    (tmp_path / "x.json").write_text(json.dumps(d))
    assert "**FAIL**" in report_summary(tmp_path)


def test_rerun_is_byte_identical(tmp_path):
    cfg = _write(tmp_path / "l.json", {"command": "verify", "params": {
        "check": "levelset", "instance": {"n": 12, "p": 2.0, "weight": "identity"}}})
    env = {**os.environ}
    env.pop("DEGLAP_SEED", None)
    outs = []
    for k in range(2):
        o = tmp_path / f"r{k}"
        subprocess.run([sys.executable, "-m", "deglap.cli", "verify", "--config", cfg, "--out",
                        str(o)], check=True, env=env)
        outs.append((o / "levelset_alpha0.json").read_bytes())
    assert outs[0] == outs[1]


def test_scalar_and_vector_docs(tmp_path):
    m = make_rect_domain(6, 6, 0.2)
    g = dio.load_scalar_doc("affine", m.grid)
    X, Y = m.grid.centers()
    assert np.allclose(g, 0.25 + X - 0.5 * Y)
    assert np.all(dio.load_scalar_doc({"constant": 2.0}, m.grid) == 2.0)
    F = dio.load_vector_doc("grad_g", m.grid, g, m)
    assert np.allclose(F[:-1, :-1], [1.0, -0.5])
    with pytest.raises(ValueError):
        dio.load_scalar_doc({"weird": 1}, m.grid)
    dio.write_field_csv(tmp_path / "v.csv", np.ones((6, 6, 2)))
    assert dio.load_vector_doc({"csv": "v.csv"}, m.grid, g, m, tmp_path).shape == (6, 6, 2)
