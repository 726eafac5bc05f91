"""Profiles, gradients and the uniform stationary current.

Local energies exclude the interaction contributions throughout: in the
weak internal coupling regime they are negligible against the local terms,
and the bond current is defined against exactly this local energy.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mcwf import StationaryEstimate
from .model import SystemSpec


class TooFewSitesError(ValueError):
    """Gradient statistics need at least five subunits."""


class CurrentUniformityWarning(UserWarning):
    """A bond current deviates from the weighted mean beyond tolerance."""


@dataclass(frozen=True)
class ProfileEstimate:
    """Stationary site energies and bond currents of one system size.

    ``site_energies`` holds (site, mean, std_error) with 1-based sites;
    ``bond_currents`` holds ((site, site+1), mean, std_error).
    """

    topology: str
    n_sites: int
    site_energies: list[tuple[int, float, float]]
    bond_currents: list[tuple[tuple[int, int], float, float]]

    def __post_init__(self):
        if len(self.site_energies) != self.n_sites:
            raise ValueError("one site energy per subunit required")
        if len(self.bond_currents) != self.n_sites - 1:
            raise ValueError("one bond current per adjacent pair required")


def profile_from_estimates(spec: SystemSpec,
                           estimates: list[StationaryEstimate]
                           ) -> ProfileEstimate:
    """Package the estimates of the default observable set (local energies
    followed by bond currents) into a profile."""
    n = spec.n_sites
    if len(estimates) != 2 * n - 1:
        raise ValueError(f"expected {2 * n - 1} estimates, got {len(estimates)}")
    sites = [(mu, est.mean, _err(est)) for mu, est in
             zip(range(1, n + 1), estimates[:n])]
    bonds = [((mu, mu + 1), est.mean, _err(est)) for mu, est in
             zip(range(1, n), estimates[n:])]
    return ProfileEstimate(spec.topology, n, sites, bonds)


def _err(est: StationaryEstimate) -> float:
    if est.std_error is None:
        raise ValueError("profile requires ensemble estimates with errors")
    return est.std_error


def mean_gradient(profile: ProfileEstimate) -> tuple[float, float]:
    """Mean energy difference over adjacent interior pairs.

    The first and last pairs are dropped (contact-dominated).  The error is
    the standard error of the mean of the pair differences.
    """
    n = profile.n_sites
    if n <= 4:
        raise TooFewSitesError(
            f"{n} subunits leave no interior pair with a meaningful spread"
        )
    means = [e[1] for e in profile.site_energies]
    diffs = np.array([means[mu] - means[mu - 1] for mu in range(2, n - 1)])
    grad = float(diffs.mean())
    err = float(diffs.std(ddof=1) / math.sqrt(len(diffs)))
    return grad, err


def fit_gradient(profile: ProfileEstimate) -> tuple[float, float]:
    """Per-site slope of an unweighted least-squares line through the
    interior of the profile (sites 2 .. N-1).

    For modulated profiles (alternating local fields) the adjacent-pair
    spread reflects the modulation rather than the mean slope, so the
    fitted slope is the meaningful gradient there.
    """
    n = profile.n_sites
    if n <= 4:
        raise TooFewSitesError("need at least five subunits to fit a slope")
    x = np.arange(2, n, dtype=float)
    y = np.array([profile.site_energies[mu - 1][1] for mu in range(2, n)])
    xc = x - x.mean()
    denom = (xc ** 2).sum()
    slope = float((xc * y).sum() / denom)
    resid = y - y.mean() - slope * xc
    dof = len(x) - 2
    var = (resid ** 2).sum() / dof / denom if dof > 0 else 0.0
    return slope, float(math.sqrt(var))


@dataclass(frozen=True)
class CurrentEstimate:
    mean: float
    std_error: float
    max_deviation_sigma: float


def steady_current(profile: ProfileEstimate,
                   warn_sigma: float = 4.0) -> CurrentEstimate:
    """Inverse-variance weighted mean of the bond currents.

    Stationarity makes the current uniform across bonds; a deviation beyond
    ``warn_sigma`` combined standard errors signals unconverged burn-in and
    raises a CurrentUniformityWarning.
    """
    values = np.array([b[1] for b in profile.bond_currents])
    errors = np.array([b[2] for b in profile.bond_currents])
    if np.any(errors <= 0):
        raise ValueError("bond current errors must be positive")
    weights = 1.0 / errors ** 2
    mean = float((weights * values).sum() / weights.sum())
    err = float(1.0 / math.sqrt(weights.sum()))
    combined = np.sqrt(errors ** 2 + err ** 2)
    dev = float(np.max(np.abs(values - mean) / combined))
    if dev > warn_sigma:
        warnings.warn(
            f"bond current deviates {dev:.1f} combined sigma from the "
            "weighted mean; burn-in may be too short",
            CurrentUniformityWarning,
        )
    return CurrentEstimate(mean, err, dev)


def write_profile_csv(path: str | Path, profile: ProfileEstimate):
    """Site and bond tables; columns: size, site/bond, mean, std_error."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["size", "site", "mean", "std_error"])
        for mu, mean, err in profile.site_energies:
            writer.writerow([profile.n_sites, mu, f"{mean:.15g}", f"{err:.15g}"])
        writer.writerow([])
        writer.writerow(["size", "bond", "mean", "std_error"])
        for (a, b), mean, err in profile.bond_currents:
            writer.writerow([profile.n_sites, f"{a}-{b}", f"{mean:.15g}",
                             f"{err:.15g}"])
