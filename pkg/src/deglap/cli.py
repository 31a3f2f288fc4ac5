"""Command-line experiment driver.

    deglap <command> --config <file> [--parallel N] [--out <dir>]
    deglap summary --out <dir> [--allow-mixed]

Exit codes: 0 success, 2 configuration/schema error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import io as dio
from . import verify
from .instances import InstanceConfig, instance_family, unit_square_domain
from .maximal import MaximalConfig, distribution, fractional_maximal
from .plap import solve
from .report import CheckReport, atomic_write, dumps
from .spaces import (LorentzIndices, generalized_lorentz_norm, lorentz_norm, morrey_norm,
                     sigma_doubling_checks, weighted_Lq_norm)
from .weights import (a_infty_params, ellipticity_lambda, log_bmo_seminorm, muckenhoupt_Aq,
                      scalar_weight_of, subset_family)

log = logging.getLogger("deglap")

COMMANDS = ("solve", "maxop", "norms", "weights", "verify", "sweep")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


# -- schemas -------------------------------------------------------------------------------

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 1}
_numlist = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_any_obj = {"type": "object"}
_strobj = {"type": ["string", "object"]}

_instance = {
    "type": "object", "additionalProperties": False,
    "properties": {"n": {"type": "integer", "minimum": 4}, "p": {"type": "number", "exclusiveMinimum": 1},
                   "seed": {"type": "integer"}, "anisotropy": _num, "log_scale": _num,
                   "data": {"enum": ["random", "grad_g", "zero", "affine"]},
                   "weight": {"enum": ["rotated", "identity", "diag21"]},
                   "n_modes": _int, "bmo_stride": _int},
}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props,
            "required": list(required)}


_problem_props = {"domain": _strobj, "p": {"type": "number", "exclusiveMinimum": 1},
                  "P": _strobj, "F": _strobj, "g": _strobj, "delta": {"type": "number", "minimum": 0},
                  "tol": _pos, "max_iter": _int}

_field_props = {"domain": _strobj, "field": _strobj}

CHECK_SCHEMAS = {
    "vphi": {"p": {"type": "number", "exclusiveMinimum": 1}, "trials": _int, "eps": _numlist},
    "energy_estimate": {"count": _int, "n": {"type": "integer", "minimum": 4},
                        "resolutions": {"type": "array", "items": {"type": "integer", "minimum": 4}},
                        "ps": _numlist, "anisotropy": _num, "log_scale": _num},
    "comparison": {"instance": _instance, "center": _numlist, "radius": _pos, "eps": _numlist,
                   "gamma": _numlist},
    "levelset": {"instance": _instance, "alpha": _num, "theta": _pos, "eps": _numlist,
                 "gamma": _numlist, "n_lambda": _int, "lambda_range": _numlist},
    "norm_transfer": {"instance": _instance, "alpha": _num, "q": _numlist, "s": {"type": "array"},
                      "upsilon": _pos, "expected": _num},
    "maximal_indicator": {"n": {"type": "integer", "minimum": 8}, "rho": _pos, "j_max": _int,
                          "y": _numlist, "slack": _pos},
    "weak_type": {"n": {"type": "integer", "minimum": 4}, "alpha": _numlist, "q": _pos},
    "muckenhoupt_trend": {"n": {"type": "integer", "minimum": 4}, "q": _pos,
                          "amplitudes": _numlist},
    "sigma_doubling": {"sigma": _strobj, "samples": _int},
}

PARAM_SCHEMAS = {
    "solve": _obj(_problem_props, ["p"]),
    "maxop": _obj({**_field_props, "alpha": _num, "rho_cut": _pos, "mu": _strobj,
                   "n_lambda": _int, "lambda_range": _numlist}),
    "norms": _obj({**_field_props, "mu": _strobj, "q": _pos, "s": _num, "sigma": _strobj,
                   "psi": _strobj, "omega": _strobj}),
    "weights": _obj({"domain": _strobj, "P": _strobj, "q": {"type": "number", "exclusiveMinimum": 1},
                     "R": _pos, "n_balls": _int}),
}

CONFIG_SCHEMA = _obj({"command": {"enum": list(COMMANDS)},
                      "inputs": {"type": "object", "additionalProperties": {"type": "string"}},
                      "params": _any_obj, "seed": {"type": "integer"},
                      "out_dir": {"type": "string"}}, ["command", "params"])


def _check_schema(name: str) -> dict:
    return _obj({"check": {"enum": [name]}, **CHECK_SCHEMAS[name]}, ["check"])


def _validate(instance, schema, where: str):
    v = jsonschema.Draft7Validator(schema)
    errs = sorted(v.iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        path = "/".join(str(x) for x in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: field '{path}': {e.message}")


def validate_config(cfg: dict, base=None) -> dict:
    _validate(cfg, CONFIG_SCHEMA, "config")
    cmd = cfg["command"]
    params = cfg["params"]
    if cmd in PARAM_SCHEMAS:
        _validate(params, PARAM_SCHEMAS[cmd], "params")
    else:
        check = params.get("check")
        if check not in CHECK_SCHEMAS:
            raise ConfigError(f"params: field 'check': must be one of {sorted(CHECK_SCHEMAS)}")
        if cmd == "verify":
            _validate(params, _check_schema(check), "params")
        else:
            key = params.get("sweep_key") or _sweep_key(params)
            fixed = {k: v for k, v in params.items() if k not in (key, "sweep_key")}
            _validate(fixed, _check_schema(check), "params")
            if not isinstance(params.get(key), list) or not params[key]:
                raise ConfigError(f"params: field '{key}': sweep values must be a non-empty list")
            for v in params[key]:
                item = {**fixed, key: _sweep_item(check, key, v)}
                _validate(item, _check_schema(check), "params")
    for name, path in cfg.get("inputs", {}).items():
        full = Path(path) if base is None or Path(path).is_absolute() else Path(base) / path
        if not full.exists():
            raise ConfigError(f"inputs: field '{name}': file {path!r} does not exist")
    return cfg


def config_hash(cfg: dict) -> str:
    core = {k: v for k, v in cfg.items() if k != "out_dir"}
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()[:16]


# -- sweeps ----------------------------------------------------------------------------------

def _sweep_key(params: dict) -> str:
    check = params["check"]
    lists = [k for k, v in params.items() if isinstance(v, list) and k not in ("center", "y",
                                                                             "lambda_range")]
    scalar_keys = [k for k in lists if CHECK_SCHEMAS[check].get(k, {}).get("type") != "array"]
    cands = scalar_keys or lists
    if len(cands) != 1:
        raise ConfigError("params: a sweep needs exactly one list-valued parameter "
                          "(or an explicit 'sweep_key')")
    return cands[0]


def _sweep_item(check: str, key: str, v):
    """A single sweep value, wrapped in a list when the check expects a list."""
    return [v] if CHECK_SCHEMAS[check].get(key, {}).get("type") == "array" else v


# -- dispatch ----------------------------------------------------------------------------------

def _instance_cfg(doc: dict, seed: int) -> InstanceConfig:
    return InstanceConfig(**{"seed": seed, **(doc or {})})


def run_check(params: dict, seed: int) -> CheckReport:
    check = params["check"]
    P = {k: v for k, v in params.items() if k != "check"}
    if check == "vphi":
        return verify.check_vphi(P.get("p", 2.0), P.get("trials", 100_000), seed,
                                 tuple(P.get("eps", (0.5, 0.1, 0.01))))
    if check == "energy_estimate":
        cfgs = instance_family(P.get("count", 20), P.get("n", 32), seed,
                               tuple(P.get("ps", (1.5, 2.0, 3.0))),
                               anisotropy=P.get("anisotropy", 0.04),
                               log_scale=P.get("log_scale", 0.0))
        return verify.check_energy_estimate(cfgs, P.get("resolutions"), seed)
    if check == "comparison":
        return verify.check_comparison(_instance_cfg(P.get("instance"), seed),
                                       tuple(P.get("center", (0.5, 0.5))), P.get("radius", 0.5),
                                       tuple(P.get("eps", (0.5, 0.1))),
                                       tuple(P.get("gamma", (1.0, 1.5, 2.0))))
    if check == "levelset":
        return verify.check_levelset(_instance_cfg(P.get("instance"), seed), P.get("alpha", 0.0),
                                     P.get("theta", 0.5), tuple(P.get("eps", (0.5, 0.1))),
                                     tuple(P.get("gamma", (0.5, 1.0, 2.0))),
                                     P.get("n_lambda", 200),
                                     tuple(P.get("lambda_range", (1e-4, 1.0))))
    if check == "norm_transfer":
        s = tuple(math.inf if x in ("inf", None) else float(x)
                  for x in P.get("s", [1.0, 2.0, "inf"]))
        return verify.check_norm_transfer(_instance_cfg(P.get("instance"), seed),
                                          P.get("alpha", 0.0), tuple(P.get("q", (0.5, 1.0, 2.0))),
                                          s, P.get("upsilon", 1.0), P.get("expected"))
    if check == "maximal_indicator":
        return verify.check_maximal_indicator(P.get("n", 256), P.get("rho"), P.get("j_max", 3),
                                              P.get("y"), P.get("slack", 8.0))
    if check == "weak_type":
        return verify.check_weak_type(P.get("n", 64), tuple(P.get("alpha", (0.0, 0.5, 1.0))),
                                      P.get("q", 1.0), seed)
    if check == "muckenhoupt_trend":
        return verify.check_muckenhoupt_trend(P.get("n", 48), P.get("q", 2.0),
                                              tuple(P.get("amplitudes", (0.8, 0.4, 0.2, 0.1, 0.05))),
                                              seed)
    if check == "sigma_doubling":
        sigma = dio.load_sigma(P.get("sigma", {"power": 2.0}), seed=seed)
        return sigma_doubling_checks(sigma, P.get("samples", 10_000), seed)
    raise ConfigError(f"unknown check {check!r}")


def _artifact(doc: dict, h: str, cfg: dict) -> str:
    return dumps({**doc, "config_hash": h, "config": cfg})


def _field_from(doc, mask, seed: int, base):
    """Scalar field description for maxop/norms: csv, indicator, random or scalar docs."""
    grid = mask.grid
    if isinstance(doc, dict) and "indicator" in doc:
        from .grid import ball_cells
        ind = doc["indicator"]
        return ball_cells(mask, ind["center"], ind["radius"]).astype(float)
    if doc == "random":
        rng = np.random.default_rng(seed)
        return np.where(mask.nonexterior, rng.random(grid.shape), 0.0)
    return dio.load_scalar_doc(doc, grid, base)


def cmd_solve(params, seed, out: Path, h: str, cfg: dict, base) -> int:
    spec = dio.load_problem(params, base)
    rep = solve(spec, tol=params.get("tol", 1e-10), max_iter=params.get("max_iter", 500))
    dio.write_field_csv(out / "solution.csv", rep.u, spec.mask, h, names=["u"])
    meta = {**rep.metadata(), "p": spec.p, "grid": spec.mask.grid.to_dict(),
            "max_abs_u_minus_g": float(np.max(np.abs(rep.u.values - spec.g.values)[spec.mask.nonexterior]))}
    atomic_write(out / "solve.json", _artifact(meta, h, cfg))
    if not rep.converged:
        print(f"plap solver: no convergence (weak residual {rep.weak_residual:.3e})", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_maxop(params, seed, out, h, cfg, base) -> int:
    mask = dio.load_domain_doc(params.get("domain", {"n": 64}), base)
    f = _field_from(params.get("field", "random"), mask, seed, base)
    mcfg = MaximalConfig.default(mask, params.get("alpha", 0.0), rho_cut=params.get("rho_cut"))
    M = fractional_maximal(f, mcfg, mask)
    top = float(M.values.max())
    lo, hi = params.get("lambda_range", [1e-4, 1.0])
    lam = (top if top > 0 else 1.0) * np.geomspace(lo, hi, params.get("n_lambda", 200))
    mu = np.ones(mask.grid.shape) if "mu" not in params else \
        dio.load_scalar_doc(params["mu"], mask.grid, base)
    curve = distribution(M, mu, lam, mask)
    dio.write_field_csv(out / "maximal.csv", M, mask, h, names=["M"])
    dio.write_distribution_csv(out / "distribution.csv", curve, h)
    atomic_write(out / "maxop.json", _artifact(
        {"alpha": mcfg.alpha, "radii": mcfg.radii(), "max": top, "grid": mask.grid.to_dict()},
        h, cfg))
    return EXIT_OK


def cmd_norms(params, seed, out, h, cfg, base) -> int:
    mask = dio.load_domain_doc(params.get("domain", {"n": 64}), base)
    f = _field_from(params.get("field", "random"), mask, seed, base)
    mu = np.ones(mask.grid.shape) if "mu" not in params else \
        dio.load_scalar_doc(params["mu"], mask.grid, base)
    q = params.get("q", 2.0)
    s = params.get("s", math.inf)
    idx = LorentzIndices(q, s)
    res = {"lorentz": lorentz_norm(f, mu, idx, mask),
           "lebesgue": weighted_Lq_norm(f, mu ** (1 / q), q, mask)}
    if "omega" in params:
        res["weighted_lebesgue"] = weighted_Lq_norm(
            f, dio.load_scalar_doc(params["omega"], mask.grid, base), q, mask)
    if "sigma" in params:
        sig = dio.load_sigma(params["sigma"], base, seed)
        res["two_weight_lorentz"] = generalized_lorentz_norm(f, mu, sig, idx, mask)
    if "psi" in params:
        res["morrey"] = morrey_norm(f, dio.load_psi(params["psi"], mask, base), q, mask)
    atomic_write(out / "norms.json", _artifact(
        {"q": q, "s": s, "norms": res, "grid": mask.grid.to_dict()}, h, cfg))
    return EXIT_OK


def cmd_weights(params, seed, out, h, cfg, base) -> int:
    mask = dio.load_domain_doc(params.get("domain", {"n": 32}), base)
    P = dio.load_weight_doc(params.get("P", "identity"), mask.grid, base)
    q = params.get("q", 2.0)
    R = params.get("R", mask.diameter)
    bmo, wit = log_bmo_seminorm(P, mask, R, return_witness=True)
    omega = scalar_weight_of(P).values
    aq, aq_wit = muckenhoupt_Aq(omega ** q, mask, q, return_witness=True)
    fam = subset_family(mask, np.random.default_rng(seed), params.get("n_balls", 40))
    ainf = a_infty_params(omega ** q, mask, fam)
    dio.write_matrix_csv(out / "weight.csv", P, mask, h)
    atomic_write(out / "weights.json", _artifact(
        {"log_bmo": bmo, "log_bmo_witness": wit, "Lambda": ellipticity_lambda(P, mask),
         "Aq": aq, "Aq_witness": aq_wit, "q": q, "a_infty": ainf.to_dict(),
         "grid": mask.grid.to_dict()}, h, cfg))
    return EXIT_OK


def _report_name(rep: CheckReport) -> str:
    return rep.name.replace("/", "_")


def cmd_verify(params, seed, out, h, cfg, base) -> int:
    rep = run_check(params, seed)
    atomic_write(out / f"{_report_name(rep)}.json", _artifact(rep.to_dict(), h, cfg))
    return EXIT_OK


def cmd_sweep(params, seed, out, h, cfg, base, parallel: int = 1) -> int:
    key = params.get("sweep_key") or _sweep_key(params)
    fixed = {k: v for k, v in params.items() if k not in (key, "sweep_key")}
    values = params[key]
    items = [{**fixed, key: _sweep_item(params['check'], key, v)} for v in values]
    if parallel > 1:
        with ThreadPoolExecutor(parallel) as ex:
            reports = list(ex.map(lambda it: run_check(it, seed), items))
    else:
        reports = [run_check(it, seed) for it in items]
    lines = [f"# config_hash={h}", f"{key},check,empirical_C,passed"]
    for v, rep in zip(values, reports):
        lines.append(f"{dio.FLOAT_FMT % v if isinstance(v, (int, float)) else v},"
                     f"{rep.name},{dio.FLOAT_FMT % rep.empirical_C},{str(rep.passed).lower()}")
        tag = f"{key}={v}"
        atomic_write(out / f"{_report_name(rep)}__{tag}.json",
                     _artifact({**rep.to_dict(), "sweep_value": {key: v}}, h, cfg))
    atomic_write(out / f"sweep_{params['check']}.csv", "\n".join(lines) + "\n")
    return EXIT_OK


HANDLERS = {"solve": cmd_solve, "maxop": cmd_maxop, "norms": cmd_norms, "weights": cmd_weights,
            "verify": cmd_verify}


# -- summary -----------------------------------------------------------------------------------

def report_summary(out_dir, allow_mixed: bool = False) -> str:
    """Markdown table over every CheckReport JSON in ``out_dir``; returns the written text."""
    out_dir = Path(out_dir)
    reports = []
    for p in sorted(out_dir.glob("*.json")) if out_dir.is_dir() else []:
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError:
            continue
        if isinstance(d, dict) and {"name", "passed", "empirical_C"} <= d.keys():
            reports.append((p.name, d))
    if not reports:
        raise ConfigError(f"{out_dir}: no check reports found")
    hashes = sorted({d.get("config_hash", "none") for _, d in reports})
    if len(hashes) > 1 and not allow_mixed:
        raise ConfigError(f"{out_dir}: reports come from {len(hashes)} different configs "
                          f"({', '.join(hashes)}); pass --allow-mixed to combine them")
    rows = ["| file | check | statement | empirical_C | result | grid |",
            "|---|---|---|---|---|---|"]
    csv = ["file,check,statement,empirical_C,passed,nx,ny,h,config_hash"]
    for fname, d in reports:
        g = d.get("grid") or {}
        grid = f"{g['nx']}x{g['ny']}, h={g['h']:.6g}" if g else "-"
        C = d["empirical_C"]
        Cs = C if isinstance(C, str) else f"{C:.6g}"
        res = "pass" if d["passed"] else "**FAIL**"
        rows.append(f"| {fname} | {d['name']} | {d.get('statement', '')} | {Cs} | {res} | {grid} |")
        csv.append(",".join([fname, d["name"], d.get("statement", ""), str(C),
                             str(bool(d["passed"])).lower(), str(g.get("nx", "")),
                             str(g.get("ny", "")), repr(g["h"]) if g else "",
                             d.get("config_hash", "")]))
    text = f"<!-- config_hash={','.join(hashes)} -->\n" + "\n".join(rows) + "\n"
    atomic_write(out_dir / "summary.md", text)
    atomic_write(out_dir / "summary.csv", "\n".join(csv) + "\n")
    return text


# -- entry point -------------------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    return cfg


def run(cfg: dict, out_dir=None, parallel: int = 1, base=None) -> int:
    """Validate and execute one experiment configuration; returns the exit status."""
    cfg = dict(cfg)
    env = os.environ.get("DEGLAP_SEED")
    if env is not None:
        try:
            cfg["seed"] = int(env)
        except ValueError:
            raise ConfigError(f"DEGLAP_SEED must be an integer (got {env!r})") from None
    validate_config(cfg, base)
    seed = int(cfg.get("seed", 0))
    out = Path(out_dir or cfg.get("out_dir") or "out")
    h = config_hash(cfg)
    core = {k: v for k, v in cfg.items() if k != "out_dir"}
    cmd = cfg["command"]
    if cmd == "sweep":
        return cmd_sweep(cfg["params"], seed, out, h, core, base, parallel)
    return HANDLERS[cmd](cfg["params"], seed, out, h, core, base)


def _failing_module(exc: BaseException) -> str:
    tb, name = exc.__traceback__, "deglap"
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("deglap"):
            name = mod
        tb = tb.tb_next
    return name


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="deglap", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS + ("summary",))
    ap.add_argument("--config", help="JSON experiment configuration")
    ap.add_argument("--out", help="output directory (overrides out_dir)")
    ap.add_argument("--parallel", type=int, default=1, help="worker threads for sweeps")
    ap.add_argument("--allow-mixed", action="store_true",
                    help="let summary combine reports from different configs")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "summary":
            if not args.out:
                raise ConfigError("summary needs --out <dir>")
            report_summary(args.out, args.allow_mixed)
            return EXIT_OK
        if not args.config:
            raise ConfigError("--config is required")
        if args.parallel < 1:
            raise ConfigError("--parallel must be >= 1")
        cfg = load_config(args.config)
        if isinstance(cfg, dict) and cfg.get("command") not in (None, args.command):
            raise ConfigError(f"config command {cfg.get('command')!r} does not match "
                              f"'{args.command}'")
        base = Path(args.config).resolve().parent
        return run(cfg, args.out, args.parallel, base)
    except ConfigError as e:
        print(f"deglap: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as e:
        mod = _failing_module(e)
        print(f"deglap: numerical failure in {mod} ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
