"""Zero-variance extrapolation of subspace energies.

Variational energies are fit linearly against the Hamiltonian variance
divided by the squared energy; the intercept is the zero-variance estimate
and its OLS standard error is the quoted uncertainty.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

__all__ = [
    "HARTREE_TO_KCAL_PER_MOL",
    "VariancePoint",
    "FitResult",
    "SingularFitError",
    "fit_zero_variance",
    "extrapolate_binding",
    "points_from_jsonl",
]

HARTREE_TO_KCAL_PER_MOL = 627.509474


class SingularFitError(ValueError):
    """All abscissa values coincide; the line is undetermined."""


@dataclass(frozen=True)
class VariancePoint:
    """One extrapolation point: x = variance / energy^2 (dimensionless)."""

    x: float
    e: float
    batch_size: int = 0

    def __post_init__(self):
        if self.x < 0:
            raise ValueError("scaled variance must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    intercept: float
    slope: float
    intercept_stderr: float
    r_squared: float
    n_points: int
    dof_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "slope": self.slope,
            "intercept_stderr": self.intercept_stderr,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
            "dof_warning": self.dof_warning,
        }


def fit_zero_variance(points, weights=None) -> FitResult:
    """Least-squares line e = intercept + slope * x through the points.

    With exactly two points the fit is exact and the standard error is
    reported as 0 with a degrees-of-freedom warning flag. Optional weights
    switch to inverse-variance-style weighted least squares.
    """
    points = list(points)
    if len(points) < 2:
        raise ValueError("need at least 2 points to extrapolate")
    x = np.array([p.x for p in points], dtype=float)
    e = np.array([p.e for p in points], dtype=float)
    if np.ptp(x) == 0.0:
        raise SingularFitError("all scaled-variance values are identical")

    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != x.shape or np.any(w <= 0):
            raise ValueError("weights must be positive, one per point")
        design = np.column_stack([np.ones_like(x), x])
        wd = design * w[:, None]
        cov = np.linalg.inv(design.T @ wd)
        beta = cov @ (wd.T @ e)
        intercept, slope = float(beta[0]), float(beta[1])
        resid = e - design @ beta
        dof = len(x) - 2
        if dof > 0:
            s2 = float(resid @ (w * resid)) / dof
            stderr = float(np.sqrt(s2 * cov[0, 0]))
        else:
            stderr = 0.0
        ss_tot = float(((e - e.mean()) ** 2).sum())
        r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
        return FitResult(intercept, slope, stderr, r2, len(x), dof_warning=dof == 0)

    if len(points) == 2:
        slope = (e[1] - e[0]) / (x[1] - x[0])
        intercept = e[0] - slope * x[0]
        return FitResult(float(intercept), float(slope), 0.0, 1.0, 2, dof_warning=True)

    res = linregress(x, e)
    return FitResult(
        intercept=float(res.intercept),
        slope=float(res.slope),
        intercept_stderr=float(res.intercept_stderr),
        r_squared=float(res.rvalue**2),
        n_points=len(x),
    )


def extrapolate_binding(bound_fit: FitResult, unbound_fit: FitResult) -> tuple[float, float]:
    """Binding energy (kcal/mol) and propagated error from two intercepts."""
    binding = (bound_fit.intercept - unbound_fit.intercept) * HARTREE_TO_KCAL_PER_MOL
    err = float(
        np.hypot(bound_fit.intercept_stderr, unbound_fit.intercept_stderr)
        * HARTREE_TO_KCAL_PER_MOL
    )
    return float(binding), err


def points_from_jsonl(lines, batch_sizes=None) -> list[VariancePoint]:
    """Collect VariancePoints from JSONL records carrying 'batch_size',
    'energy', and 'variance' fields; optionally filter by batch size."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    wanted = None if batch_sizes is None else {int(b) for b in batch_sizes}
    points = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: invalid JSON ({exc})") from None
        if not {"batch_size", "energy", "variance"} <= rec.keys():
            continue
        b = int(rec["batch_size"])
        if wanted is not None and b not in wanted:
            continue
        e = float(rec["energy"])
        points.append(VariancePoint(x=float(rec["variance"]) / e**2, e=e, batch_size=b))
    return points
