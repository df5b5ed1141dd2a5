"""Run record shared by every solver, with JSON and CSV serialization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..grid import ScalarField

SCHEMA = "fracgrad/solve-report"
SCHEMA_VERSION = 1
SCHEMES = ("linear", "monotone", "regularized", "fixed-point", "reaction", "newton")


@dataclass
class SolveReport:
    scheme: str
    final: ScalarField
    converged: bool
    reason: str = ""
    iterates_outer: int = 0
    iterates_inner: int = 0
    residual_history: list = field(default_factory=list)
    ball_history: list = field(default_factory=list)
    violation_history: list = field(default_factory=list)
    monotone_violation: float = 0.0
    norm_ledger: list = field(default_factory=list)
    equation_residual: float = float("nan")
    tol: float = float("nan")
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme tag {self.scheme!r}")

    @property
    def last_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")

    def to_dict(self, include_field: bool = True) -> dict[str, Any]:
        d = {
            "schema": SCHEMA,
            "schema_version": SCHEMA_VERSION,
            "scheme": self.scheme,
            "converged": bool(self.converged),
            "reason": self.reason,
            "iterates_outer": int(self.iterates_outer),
            "iterates_inner": int(self.iterates_inner),
            "tol": _num(self.tol),
            "equation_residual": _num(self.equation_residual),
            "monotone_violation": _num(self.monotone_violation),
            "residual_history": [_num(x) for x in self.residual_history],
            "ball_history": [_num(x) for x in self.ball_history],
            "violation_history": [_num(x) for x in self.violation_history],
            "norm_ledger": [_num(x) for x in self.norm_ledger],
            "extras": _jsonable(self.extras),
            "n_grid": self.final.grid.n_interior,
        }
        if include_field:
            d["final"] = [_num(x) for x in self.final.values]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=kw.pop("indent", 1), **kw)

    def write_csv(self, path) -> None:
        """One row per recorded iteration: iter, residual, ball_norm, violation."""
        n = len(self.residual_history)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "residual", "ball_norm", "violation"])
            for j in range(n):
                w.writerow(
                    [
                        j + 1,
                        _cell(self.residual_history[j]),
                        _cell(_at(self.ball_history, j)),
                        _cell(_at(self.violation_history, j)),
                    ]
                )


def _at(seq, j):
    return seq[j] if j < len(seq) else float("nan")


def _cell(x) -> str:
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _num(x):
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, ScalarField):
        return [_num(v) for v in obj.values]
    return obj
