"""Numerical admissibility certificate for reaction weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInput, InvalidArgument
from ..grid import Grid, ScalarField
from ..norms import weighted_grad_norm

POWER_EXPONENTS = tuple(np.round(np.geomspace(0.3, 4.0, 20), 6))


@dataclass(frozen=True)
class TrialField:
    label: str
    field: ScalarField


@dataclass(frozen=True)
class AdmissibilityCertificate:
    value: float
    argmin: str
    ratios: tuple

    def __float__(self):
        return self.value


def power_family(grid: Grid, exponents=POWER_EXPONENTS) -> list[TrialField]:
    x = grid.nodes
    return [TrialField(f"power:{t:g}", grid.field((1 - x * x) ** t)) for t in exponents]


def bump_family(grid: Grid, count: int = 20) -> list[TrialField]:
    x = grid.nodes
    out = []
    widths = (0.9, 0.5, 0.25, 0.1)
    per = max(1, count // len(widths))
    for w in widths:
        for c in np.linspace(-(1 - w), 1 - w, per):
            z = (x - c) / w
            with np.errstate(divide="ignore"):
                vals = np.where(np.abs(z) < 1, np.exp(-1 / np.maximum(1 - z * z, 1e-300)), 0.0)
            out.append(TrialField(f"bump:{c:.4f}:{w:g}", grid.field(vals)))
    return out[:count]


def random_family(grid: Grid, count: int = 20, seed: int = 0, modes: int = 8) -> list[TrialField]:
    """Random sine series vanishing at the endpoints, coefficients decaying like k^-2."""
    rng = np.random.default_rng(seed)
    k = np.arange(1, modes + 1)
    basis = np.sin(np.outer(grid.nodes + 1, k) * np.pi / 2) / k**2
    return [TrialField(f"random:{seed}:{j}", grid.field(basis @ rng.standard_normal(modes))) for j in range(count)]


def standard_trial_family(grid: Grid, seed: int = 0) -> list[TrialField]:
    """20 powers (1-x^2)^t, 20 bumps and 20 random smooth fields."""
    return power_family(grid) + bump_family(grid) + random_family(grid, seed=seed)


def check_admissible(g: ScalarField, p: float, trial_family=None, seed: int = 0) -> AdmissibilityCertificate:
    """min over the family of ||D phi||_{L^p} / int g |phi|.

    Trials with a vanishing denominator carry no information and are skipped.
    """
    if not p >= 1:
        raise InvalidArgument(f"p must be >= 1, got {p!r}")
    vals = np.asarray(g.values)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise InvalidArgument("weight must be finite and nonnegative")
    grid = g.grid
    family = standard_trial_family(grid, seed) if trial_family is None else trial_family
    ratios = []
    for trial in family:
        fld = trial.field if isinstance(trial, TrialField) else trial
        label = trial.label if isinstance(trial, TrialField) else str(len(ratios))
        den = grid.integrate(vals * np.abs(fld.values))
        if den > 0:
            ratios.append((label, weighted_grad_norm(fld, p) / den))
    if not ratios:
        raise DegenerateInput("int g|phi| vanishes for every trial field")
    label, value = min(ratios, key=lambda r: r[1])
    return AdmissibilityCertificate(float(value), label, tuple(ratios))
