"""Check reports and deterministic JSON/CSV serialisation."""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np


def _clean(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` via a temp file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class CheckReport:
    name: str
    passed: bool
    empirical_C: float
    witness: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    conventions: list = field(default_factory=list)
    seed: Optional[int] = None
    grid: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    statement: str = ""

    def to_dict(self) -> dict:
        return _clean({
            "name": self.name,
            "statement": self.statement,
            "passed": bool(self.passed),
            "empirical_C": self.empirical_C,
            "witness": self.witness,
            "sweep": self.sweep,
            "seed": self.seed,
            "grid": self.grid,
            "conventions": list(self.conventions),
            "details": self.details,
        })

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CheckReport":
        c = d.get("empirical_C")
        if isinstance(c, str):
            c = float(c)
        return cls(name=d["name"], passed=bool(d["passed"]), empirical_C=c,
                   witness=d.get("witness", {}), sweep=d.get("sweep", {}),
                   conventions=d.get("conventions", []), seed=d.get("seed"),
                   grid=d.get("grid", {}), details=d.get("details", {}),
                   statement=d.get("statement", ""))


def ratio(num: float, den: float, zero_tol: float = 0.0) -> float:
    """num/den with 0/0 -> 0 and x/0 -> inf (x > 0)."""
    if den > zero_tol:
        return num / den
    return 0.0 if num <= zero_tol else math.inf


def format_float(x: Any) -> str:
    return repr(float(x))
