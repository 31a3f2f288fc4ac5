"""CSV and JSON loaders/writers for fields, weights, distributions and tables."""

from __future__ import annotations

import io as _io
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .grid import DomainMask, Grid2D, ScalarField, VectorField, domain_from_dict, geometric_ladder
from .instances import unit_square_domain
from .maximal import DistributionCurve
from .plap import ProblemSpec, discrete_gradient
from .report import atomic_write
from .spaces import MorreyShape, SigmaFunction
from .weights import MatrixWeightField, make_weight

FLOAT_FMT = "%.17g"


def _csv_text(header: list, rows: np.ndarray, config_hash: Optional[str]) -> str:
    buf = _io.StringIO()
    if config_hash is not None:
        buf.write(f"# config_hash={config_hash}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(str(int(v)) if k < 2 and header[0] == "i" else FLOAT_FMT % v
                           for k, v in enumerate(row)) + "\n")
    return buf.getvalue()


def _read_csv(path) -> tuple:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]], dtype=float)
    return header, data.reshape(-1, len(header))


def field_csv(field, mask: Optional[DomainMask] = None, config_hash: Optional[str] = None,
              names=None) -> str:
    """Rows ``i,j,value...`` for every non-exterior cell (all cells without a mask)."""
    v = np.asarray(getattr(field, "values", field), dtype=float)
    nx, ny = v.shape[:2]
    v = v.reshape(nx, ny, -1)
    where = np.ones((nx, ny), bool) if mask is None else mask.nonexterior
    ii, jj = np.nonzero(where)
    if names is None:
        names = ["value"] if v.shape[2] == 1 else [f"value{k}" for k in range(v.shape[2])]
    rows = np.column_stack([ii, jj, v[ii, jj]])
    return _csv_text(["i", "j", *names], rows, config_hash)


def write_field_csv(path, field, mask=None, config_hash=None, names=None):
    atomic_write(path, field_csv(field, mask, config_hash, names))


def read_field_csv(path, grid: Grid2D) -> np.ndarray:
    """Inverse of :func:`field_csv`; missing cells are zero."""
    header, data = _read_csv(path)
    if header[:2] != ["i", "j"]:
        raise ValueError(f"{path}: field CSV must start with columns i,j")
    ncomp = len(header) - 2
    out = np.zeros(grid.shape + ((ncomp,) if ncomp > 1 else ()))
    i, j = data[:, 0].astype(int), data[:, 1].astype(int)
    out[i, j] = data[:, 2:] if ncomp > 1 else data[:, 2]
    return out


def write_matrix_csv(path, P: MatrixWeightField, mask=None, config_hash=None):
    v = P.values
    comp = np.stack([v[..., 0, 0], v[..., 0, 1], v[..., 1, 1]], axis=-1)
    write_field_csv(path, comp, mask, config_hash, names=["p11", "p12", "p22"])


def read_matrix_csv(path, grid: Grid2D) -> MatrixWeightField:
    comp = read_field_csv(path, grid)
    if comp.ndim != 3 or comp.shape[2] != 3:
        raise ValueError(f"{path}: matrix CSV needs columns p11,p12,p22")
    M = np.zeros(grid.shape + (2, 2))
    M[..., 0, 0] = comp[..., 0]
    M[..., 0, 1] = M[..., 1, 0] = comp[..., 1]
    M[..., 1, 1] = comp[..., 2]
    # cells absent from the file get the identity so the field stays SPD
    empty = np.all(comp == 0, axis=-1)
    M[empty] = np.eye(2)
    return MatrixWeightField(grid, M)


def distribution_csv(curve: DistributionCurve, config_hash=None) -> str:
    rows = np.column_stack([curve.lambdas, curve.masses])
    buf = _io.StringIO()
    if config_hash is not None:
        buf.write(f"# config_hash={config_hash}\n")
    buf.write("lambda,mass\n")
    for a, b in rows:
        buf.write(f"{FLOAT_FMT % a},{FLOAT_FMT % b}\n")
    return buf.getvalue()


def write_distribution_csv(path, curve: DistributionCurve, config_hash=None):
    atomic_write(path, distribution_csv(curve, config_hash))


def read_distribution_csv(path, weight_id: str = "mu") -> DistributionCurve:
    _, data = _read_csv(path)
    return DistributionCurve(data[:, 0], data[:, 1], weight_id)


# -- JSON documents --------------------------------------------------------------------

def _resolve(base: Optional[Path], p) -> Path:
    p = Path(p)
    return p if p.is_absolute() or base is None else base / p


def load_domain_doc(doc, base: Optional[Path] = None) -> DomainMask:
    """``{"n": k}`` for the unit square, a domain dict, or a path to one."""
    if isinstance(doc, str):
        doc = json.loads(_resolve(base, doc).read_text())
    if "n" in doc and "type" not in doc:
        return unit_square_domain(int(doc["n"]))
    return domain_from_dict(doc)


def load_weight_doc(doc, grid: Grid2D, base: Optional[Path] = None) -> MatrixWeightField:
    if isinstance(doc, str):
        return make_weight(grid, {"type": doc})
    if "csv" in doc:
        return read_matrix_csv(_resolve(base, doc["csv"]), grid)
    return make_weight(grid, doc)


DEFAULT_AFFINE = (0.25, 1.0, -0.5)


def load_scalar_doc(doc, grid: Grid2D, base: Optional[Path] = None) -> np.ndarray:
    """``"zero"``, ``"affine"``, ``{"affine": [c, a, b]}``, ``{"constant": c}`` or ``{"csv": path}``."""
    X, Y = grid.centers()
    if doc == "zero":
        return np.zeros(grid.shape)
    if doc == "affine":
        doc = {"affine": list(DEFAULT_AFFINE)}
    if "affine" in doc:
        c, a, b = doc["affine"]
        return c + a * X + b * Y
    if "constant" in doc:
        return np.full(grid.shape, float(doc["constant"]))
    if "csv" in doc:
        return read_field_csv(_resolve(base, doc["csv"]), grid)
    raise ValueError(f"unrecognised scalar field description {doc!r}")


def load_vector_doc(doc, grid: Grid2D, g: np.ndarray, mask: DomainMask,
                    base: Optional[Path] = None) -> np.ndarray:
    """``"zero"``, ``"grad_g"``, ``{"constant": [a, b]}`` or ``{"csv": path}``."""
    if doc == "zero":
        return np.zeros(grid.shape + (2,))
    if doc == "grad_g":
        return discrete_gradient(g, mask).values
    if "constant" in doc:
        return np.broadcast_to(np.asarray(doc["constant"], float), grid.shape + (2,)).copy()
    if "csv" in doc:
        v = read_field_csv(_resolve(base, doc["csv"]), grid)
        if v.ndim != 3 or v.shape[2] != 2:
            raise ValueError("vector CSV needs two value columns")
        return v
    raise ValueError(f"unrecognised vector field description {doc!r}")


def load_problem(doc: dict, base: Optional[Path] = None) -> ProblemSpec:
    """ProblemSpec from ``{"domain", "p", "P", "F", "g", "delta"}``."""
    mask = load_domain_doc(doc.get("domain", {"n": 32}), base)
    grid = mask.grid
    g = load_scalar_doc(doc.get("g", "zero"), grid, base)
    F = load_vector_doc(doc.get("F", "zero"), grid, g, mask, base)
    P = load_weight_doc(doc.get("P", "identity"), grid, base)
    return ProblemSpec(mask, P, float(doc["p"]), VectorField(grid, F), ScalarField(grid, g),
                       float(doc.get("delta", 0.0)))


def load_sigma(doc, base: Optional[Path] = None, seed: int = 0) -> SigmaFunction:
    """``{"power": a}``, ``{"random": {"t_max": T}}`` or a table ``{"taus", "nu"}``."""
    if isinstance(doc, str):
        doc = json.loads(_resolve(base, doc).read_text())
    if "power" in doc:
        return SigmaFunction.power(float(doc["power"]), float(doc.get("t_max", 1.0)))
    if "random" in doc:
        return SigmaFunction.random_doubling(np.random.default_rng(seed),
                                             float(doc["random"].get("t_max", 1.0)))
    return SigmaFunction.from_density(doc["taus"], doc["nu"], doc.get("name", "table"))


def load_psi(doc, mask: DomainMask, base: Optional[Path] = None) -> MorreyShape:
    """``{"upsilon": v}`` for psi = r**v on the default ladder, or a full table."""
    if isinstance(doc, str):
        doc = json.loads(_resolve(base, doc).read_text())
    radii = np.asarray(doc["radii"], float) if "radii" in doc else \
        geometric_ladder(mask.grid.h, mask.diameter)
    if "psi" in doc:
        return MorreyShape(np.asarray(doc["psi"], float), radii, float(doc["upsilon"]))
    if doc.get("type") == "ball_measure":
        return MorreyShape.ball_measure(mask, radii)
    return MorreyShape.power(mask.grid, radii, float(doc["upsilon"]))
