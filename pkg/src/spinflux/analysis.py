"""Finite-size scaling: error-weighted linear fits against the reciprocal
system size, infinite-size extrapolation, transport classification and the
bulk conductivity as a ratio of scaling slopes."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np


class UndefinedConductivityError(RuntimeError):
    """Gradient slope consistent with zero: no bulk conductivity exists."""


class BallisticRegimeWarning(UserWarning):
    """Conductivity requested although the extrapolated current stays finite."""


@dataclass(frozen=True)
class ScalingRecord:
    """Steady current and gradient of one system size, with errors.

    ``gradient`` may be None for sizes too small for a meaningful gradient
    (such records enter the current fit only).
    """

    size: int
    current: float
    current_error: float
    gradient: float | None = None
    gradient_error: float | None = None


@dataclass(frozen=True)
class FitResult:
    slope: float
    slope_error: float
    intercept: float
    intercept_error: float
    chi2_dof: float
    n_points: int


def weighted_linear_fit(points: list[tuple[float, float, float]]) -> FitResult:
    """Inverse-variance weighted least squares for y = a + b x.

    Parameter errors come from the covariance of the weighted normal
    equations (absolute errors, not rescaled by chi-square).
    """
    if len(points) < 3:
        raise ValueError("need at least three points")
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    err = np.array([p[2] for p in points])
    if np.any(err <= 0):
        raise ValueError("all y errors must be positive")
    w = 1.0 / err ** 2
    s0, sx, sxx = w.sum(), (w * x).sum(), (w * x * x).sum()
    sy, sxy = (w * y).sum(), (w * x * y).sum()
    det = s0 * sxx - sx * sx
    if det <= 0 or not np.isfinite(det) or det < 1e-14 * s0 * sxx:
        raise ValueError("singular design: x values do not span a line")
    slope = (s0 * sxy - sx * sy) / det
    intercept = (sxx * sy - sx * sxy) / det
    slope_err = math.sqrt(s0 / det)
    intercept_err = math.sqrt(sxx / det)
    resid = y - intercept - slope * x
    dof = len(points) - 2
    chi2_dof = float((w * resid ** 2).sum() / dof) if dof > 0 else 0.0
    return FitResult(float(slope), slope_err, float(intercept),
                     intercept_err, chi2_dof, len(points))


@dataclass(frozen=True)
class Extrapolation:
    """Infinite-size limits from fits against x = 1/size."""

    current_fit: FitResult
    gradient_fit: FitResult | None
    current_infinity: float
    current_infinity_error: float
    gradient_infinity: float | None
    gradient_infinity_error: float | None


def extrapolate_infinite(records: list[ScalingRecord],
                         min_size: int | None = None,
                         max_size: int | None = None) -> Extrapolation:
    """Fit current and gradient against the reciprocal size; the intercepts
    are the infinite-system values.  ``min_size`` drops small systems from
    the fits (contact-dominated); the gradient fit is formed only when at
    least three sizes carry a gradient."""
    kept = [r for r in records
            if (min_size is None or r.size >= min_size)
            and (max_size is None or r.size <= max_size)]
    if len(kept) < 3:
        raise ValueError("need at least three sizes after filtering")
    current_fit = weighted_linear_fit(
        [(1.0 / r.size, r.current, r.current_error) for r in kept])
    grad_points = [(1.0 / r.size, r.gradient, r.gradient_error)
                   for r in kept if r.gradient is not None]
    gradient_fit = (weighted_linear_fit(grad_points)
                    if len(grad_points) >= 3 else None)
    return Extrapolation(
        current_fit=current_fit,
        gradient_fit=gradient_fit,
        current_infinity=current_fit.intercept,
        current_infinity_error=current_fit.intercept_error,
        gradient_infinity=None if gradient_fit is None else gradient_fit.intercept,
        gradient_infinity_error=None if gradient_fit is None else gradient_fit.intercept_error,
    )


def conductivity_infinite(current_fit: FitResult,
                          gradient_fit: FitResult,
                          intercept_sigma: float = 3.0
                          ) -> tuple[float, float]:
    """Bulk conductivity = (current slope) / (gradient slope) versus 1/N.

    Positive when the current opposes the gradient (current is measured
    positive from hot to cold, the gradient rises toward the hot side).
    Undefined when the gradient slope is consistent with zero; a finite
    extrapolated current attaches a ballistic-regime warning.
    """
    if abs(gradient_fit.slope) <= gradient_fit.slope_error:
        raise UndefinedConductivityError(
            "gradient slope consistent with zero (ballistic scaling)"
        )
    if abs(current_fit.intercept) > intercept_sigma * current_fit.intercept_error:
        warnings.warn(
            "extrapolated current inconsistent with zero: conductivity of a "
            "ballistic regime is contact-limited, not a bulk property",
            BallisticRegimeWarning,
        )
    kappa = current_fit.slope / gradient_fit.slope
    rel = math.hypot(current_fit.slope_error / current_fit.slope,
                     gradient_fit.slope_error / gradient_fit.slope)
    return kappa, abs(kappa) * rel


def classify_transport(extrapolation: Extrapolation,
                       significance: float = 3.0) -> str:
    """'ballistic' when the infinite-size current stays finite, 'diffusive'
    when it vanishes while the gradient scales away significantly,
    'inconclusive' otherwise."""
    j_inf = extrapolation.current_infinity
    j_err = extrapolation.current_infinity_error
    if j_inf > significance * j_err:
        return "ballistic"
    gfit = extrapolation.gradient_fit
    if (abs(j_inf) <= significance * j_err and gfit is not None
            and abs(gfit.slope) > significance * gfit.slope_error):
        return "diffusive"
    return "inconclusive"


def fit_summary(extrapolation: Extrapolation,
                kappa: tuple[float, float] | None = None,
                classification: str | None = None) -> dict:
    """JSON-serializable summary of one scaling analysis."""
    out = {
        "current_fit": asdict(extrapolation.current_fit),
        "gradient_fit": (None if extrapolation.gradient_fit is None
                         else asdict(extrapolation.gradient_fit)),
        "current_infinity": extrapolation.current_infinity,
        "current_infinity_error": extrapolation.current_infinity_error,
        "gradient_infinity": extrapolation.gradient_infinity,
        "gradient_infinity_error": extrapolation.gradient_infinity_error,
    }
    if kappa is not None:
        out["kappa_infinity"] = kappa[0]
        out["kappa_infinity_error"] = kappa[1]
    if classification is not None:
        out["classification"] = classification
    return out


def write_fit_json(path: str | Path, summary: dict):
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True))


def write_scaling_csv(path: str | Path, records: list[ScalingRecord],
                      fit: FitResult, quantity: str = "current"):
    """Figure data: one row per size with the fitted line evaluated at the
    same x = 1/size.  Columns: x, y, y_error, fit_y."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "y_error", "fit_y"])
        for r in records:
            if quantity == "current":
                y, err = r.current, r.current_error
            else:
                if r.gradient is None:
                    continue
                y, err = r.gradient, r.gradient_error
            x = 1.0 / r.size
            fit_y = fit.intercept + fit.slope * x
            writer.writerow([f"{x:.15g}", f"{y:.15g}", f"{err:.15g}",
                             f"{fit_y:.15g}"])
