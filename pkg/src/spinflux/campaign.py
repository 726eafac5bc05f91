"""Experiment campaigns: scans over size or model parameters, parallel
ensemble execution, persistent per-point results, scaling analysis and a
manifest that makes interrupted campaigns resumable (completed points are
recognized by their spec hash and skipped)."""

from __future__ import annotations

import dataclasses
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analysis, mcwf, model, observables, oracle
from .mcwf import StationaryEstimate, TrajectoryConfig
from .model import SpecError, SystemSpec, spec_hash

SCAN_AXES = ("n_sites", "delta", "epsilon", "j_prime", "bath_coupling")


@dataclass(frozen=True)
class Campaign:
    """A scan of one parameter over a list of strictly increasing values."""

    base: SystemSpec
    scan_axis: str
    scan_values: tuple
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    realizations: int = 8
    output_dir: str = "campaign_out"
    fit_min_size: int | None = None

    def __post_init__(self):
        if self.scan_axis not in SCAN_AXES:
            raise SpecError(f"scan_axis must be one of {SCAN_AXES}")
        values = list(self.scan_values)
        if not values:
            raise SpecError("scan_values must not be empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise SpecError("scan_values must be strictly increasing")
        if self.realizations < 2:
            raise SpecError("campaigns need at least two realizations")

    def point_spec(self, value) -> SystemSpec:
        if self.scan_axis == "n_sites":
            value = int(value)
        return dataclasses.replace(self.base, **{self.scan_axis: value})


def campaign_from_config(config: dict) -> Campaign:
    """Build a campaign from the JSON config layout: ``system``,
    ``trajectory`` and ``campaign`` sections mapping 1:1 onto field names."""
    base = SystemSpec(**config.get("system", {}))
    trajectory = TrajectoryConfig(**config.get("trajectory", {}))
    fields = dict(config.get("campaign", {}))
    fields.setdefault("scan_axis", "n_sites")
    fields["scan_values"] = tuple(fields.get("scan_values", ()))
    return Campaign(base=base, trajectory=trajectory, **fields)


def _gradient_for(spec: SystemSpec, profile: observables.ProfileEstimate):
    """Gradient of one profile: fitted slope for modulated (alternating)
    fields, mean adjacent-pair difference otherwise; None when the system
    is too small for a meaningful spread."""
    try:
        if spec.topology == "chain" and spec.epsilon > 0:
            grad, err = observables.fit_gradient(profile)
            method = "interior_fit"
        else:
            grad, err = observables.mean_gradient(profile)
            method = "interior_pairs"
    except observables.TooFewSitesError:
        return None, None, "unavailable"
    return grad, err, method


def _point_payload(spec: SystemSpec, campaign: Campaign,
                   estimates: list[StationaryEstimate]) -> dict:
    profile = observables.profile_from_estimates(spec, estimates)
    grad, grad_err, grad_method = _gradient_for(spec, profile)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", observables.CurrentUniformityWarning)
        current = observables.steady_current(profile)
    return {
        "spec": dataclasses.asdict(spec),
        "spec_hash": spec_hash(spec),
        "size": spec.n_sites,
        "site_energies": [[mu, m, e] for mu, m, e in profile.site_energies],
        "bond_currents": [[list(b), m, e] for b, m, e in profile.bond_currents],
        "current": current.mean,
        "current_error": current.std_error,
        "current_max_deviation_sigma": current.max_deviation_sigma,
        "uniformity_warnings": [str(w.message) for w in caught],
        "gradient": grad,
        "gradient_error": grad_err,
        "gradient_method": grad_method,
        "realizations": campaign.realizations,
        "n_samples": campaign.trajectory.n_samples,
    }, profile


def _records_from_points(points: list[dict]) -> list[analysis.ScalingRecord]:
    records = []
    for p in sorted(points, key=lambda q: q["size"]):
        records.append(analysis.ScalingRecord(
            size=p["size"],
            current=p["current"],
            current_error=p["current_error"],
            gradient=p["gradient"],
            gradient_error=p["gradient_error"],
        ))
    return records


def analyze_points(points: list[dict], min_size: int | None = None) -> dict:
    """Scaling fits, classification and conductivity across scan points."""
    records = _records_from_points(points)
    extrap = analysis.extrapolate_infinite(records, min_size=min_size)
    classification = analysis.classify_transport(extrap)
    kappa = None
    if extrap.gradient_fit is not None:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", analysis.BallisticRegimeWarning)
                kappa = analysis.conductivity_infinite(
                    extrap.current_fit, extrap.gradient_fit)
        except analysis.UndefinedConductivityError:
            kappa = None
    summary = analysis.fit_summary(extrap, kappa, classification)
    summary["records"] = [dataclasses.asdict(r) for r in records]
    summary["min_size"] = min_size
    return summary


def write_analysis(out: Path, summary: dict):
    analysis.write_fit_json(out / "fits.json", summary)
    records = [analysis.ScalingRecord(**r) for r in summary["records"]]
    current_fit = analysis.FitResult(**summary["current_fit"])
    analysis.write_scaling_csv(out / "scaling_current.csv", records,
                               current_fit, quantity="current")
    if summary["gradient_fit"] is not None:
        gradient_fit = analysis.FitResult(**summary["gradient_fit"])
        analysis.write_scaling_csv(out / "scaling_gradient.csv", records,
                                   gradient_fit, quantity="gradient")


def run_campaign(campaign: Campaign, n_workers: int | None = None) -> dict:
    """Execute a campaign, resuming past completed points.

    Every (scan point x realization) is one pool task; per-point results
    are aggregated and persisted as JSON + CSV, then the cross-point
    scaling analysis is written.  Per-point failures are recorded in the
    manifest and do not abort the campaign."""
    out = Path(campaign.output_dir)
    (out / "points").mkdir(parents=True, exist_ok=True)
    t_start = time.time()

    point_specs = [campaign.point_spec(v) for v in campaign.scan_values]
    pending: list[tuple[int, SystemSpec]] = []
    points: dict[str, dict] = {}
    for idx, spec in enumerate(point_specs):
        path = out / "points" / f"{spec_hash(spec)}.json"
        if path.exists():
            points[spec_hash(spec)] = json.loads(path.read_text())
        else:
            pending.append((idx, spec))

    failures: dict[str, str] = {}
    if pending:
        tasks = []
        task_owner = []
        for idx, spec in pending:
            obs = mcwf.default_observables(spec)
            for r in range(campaign.realizations):
                seed_seq = np.random.SeedSequence(
                    [campaign.trajectory.seed, idx, r])
                tasks.append((spec, campaign.trajectory, obs, seed_seq))
                task_owner.append(idx)
        if n_workers is None or n_workers > 1:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                rows = list(pool.map(mcwf._ensemble_worker, tasks,
                                     chunksize=1))
        else:
            rows = [mcwf._ensemble_worker(t) for t in tasks]
        by_point: dict[int, list[np.ndarray]] = {}
        for owner, row in zip(task_owner, rows):
            by_point.setdefault(owner, []).append(row)
        for idx, spec in pending:
            try:
                mat = np.vstack(by_point[idx])
                means = mat.mean(axis=0)
                r = mat.shape[0]
                sigma = np.sqrt(((mat - means) ** 2).sum(axis=0) / (r * (r - 1)))
                ests = [StationaryEstimate(float(m), float(s), r,
                                           campaign.trajectory.n_samples + 1)
                        for m, s in zip(means, sigma)]
                payload, profile = _point_payload(spec, campaign, ests)
                h = spec_hash(spec)
                (out / "points" / f"{h}.json").write_text(
                    json.dumps(payload, indent=2))
                observables.write_profile_csv(
                    out / "points" / f"{h}_profile.csv", profile)
                points[h] = payload
            except Exception as exc:  # recorded, campaign continues
                failures[spec_hash(spec)] = f"{type(exc).__name__}: {exc}"

    summary = None
    analysis_error = None
    try:
        summary = analyze_points(list(points.values()),
                                 min_size=campaign.fit_min_size)
        write_analysis(out, summary)
    except Exception as exc:
        analysis_error = f"{type(exc).__name__}: {exc}"

    manifest = {
        "version": __version__,
        "seed": campaign.trajectory.seed,
        "scan_axis": campaign.scan_axis,
        "scan_values": list(campaign.scan_values),
        "realizations": campaign.realizations,
        "trajectory": dataclasses.asdict(campaign.trajectory),
        "base_spec": dataclasses.asdict(campaign.base),
        "point_hashes": [spec_hash(s) for s in point_specs],
        "failures": failures,
        "analysis_error": analysis_error,
        "wall_time_s": time.time() - t_start,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return {"manifest": manifest, "points": points, "summary": summary}


VERIFY_MAX_SPINS = 4


def verify(spec: SystemSpec, config: TrajectoryConfig,
           n_realizations: int = 32, n_workers: int | None = None,
           z_limit: float = 4.0) -> dict:
    """Side-by-side oracle / trajectory comparison for small systems.

    Returns per-observable z-scores of the ensemble means against the
    exact stationary values; ``ok`` is False when any |z| exceeds z_limit.
    """
    if spec.n_spins > VERIFY_MAX_SPINS:
        raise SpecError(
            f"verify is limited to {VERIFY_MAX_SPINS} spins (got {spec.n_spins})"
        )
    exact = oracle.steady_observables(spec)
    targets = exact["site_energies"] + exact["bond_currents"]
    labels = ([f"site_energy[{mu}]" for mu in range(1, spec.n_sites + 1)]
              + [f"bond_current[{mu}-{mu + 1}]" for mu in range(1, spec.n_sites)])
    estimates = mcwf.run_ensemble(spec, config, n_realizations=n_realizations,
                                  n_workers=n_workers)
    rows = []
    worst = 0.0
    for label, est, target in zip(labels, estimates, targets):
        z = (est.mean - target) / est.std_error if est.std_error else np.inf
        worst = max(worst, abs(z))
        rows.append({"observable": label, "estimate": est.mean,
                     "std_error": est.std_error, "exact": target,
                     "z": z})
    return {"rows": rows, "max_abs_z": worst, "ok": bool(worst <= z_limit),
            "realizations": n_realizations, "n_samples": config.n_samples}
