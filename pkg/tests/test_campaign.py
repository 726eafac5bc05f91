"""Campaign orchestration: persistence, resumability, verify, CLI."""

import json
from pathlib import Path

import numpy as np
import pytest

from spinflux import campaign as campaign_mod
from spinflux import cli, mcwf, oracle
from spinflux.campaign import Campaign, campaign_from_config, run_campaign, verify
from spinflux.mcwf import TrajectoryConfig
from spinflux.model import SpecError, SystemSpec

TINY = TrajectoryConfig(t0=200.0, n_samples=1500, seed=101)


def tiny_campaign(out, values=(2, 3, 4), realizations=4):
    return Campaign(
        base=SystemSpec(n_sites=2, delta=0.0),
        scan_axis="n_sites",
        scan_values=tuple(values),
        trajectory=TINY,
        realizations=realizations,
        output_dir=str(out),
    )


def bundle_digest(out: Path) -> dict:
    """Point payloads and fit summary, without wall-clock entries."""
    digest = {p.name: p.read_text() for p in sorted((out / "points").glob("*.json"))}
    fits = out / "fits.json"
    if fits.exists():
        digest["fits.json"] = fits.read_text()
    return digest


def test_campaign_validation():
    with pytest.raises(SpecError):
        Campaign(base=SystemSpec(), scan_axis="n_sites", scan_values=())
    with pytest.raises(SpecError):
        Campaign(base=SystemSpec(), scan_axis="n_sites", scan_values=(4, 3))
    with pytest.raises(SpecError):
        Campaign(base=SystemSpec(), scan_axis="coupling", scan_values=(1, 2))
    with pytest.raises(SpecError):
        Campaign(base=SystemSpec(), scan_axis="n_sites", scan_values=(2, 3),
                 realizations=1)


def test_campaign_from_config_roundtrip():
    config = {
        "system": {"topology": "chain", "n_sites": 2, "delta": 1.6},
        "trajectory": {"t0": 100.0, "n_samples": 500, "seed": 3},
        "campaign": {"scan_axis": "delta", "scan_values": [0.5, 1.0, 1.6],
                     "realizations": 4, "output_dir": "x"},
    }
    camp = campaign_from_config(config)
    assert camp.base.delta == 1.6
    assert camp.point_spec(0.5).delta == 0.5
    assert camp.trajectory.seed == 3


def test_run_campaign_produces_bundle(tmp_path):
    out = tmp_path / "bundle"
    result = run_campaign(tiny_campaign(out), n_workers=2)
    assert not result["manifest"]["failures"]
    assert (out / "manifest.json").exists()
    assert (out / "fits.json").exists()
    assert (out / "scaling_current.csv").exists()
    points = list((out / "points").glob("*.json"))
    assert len(points) == 3
    payload = json.loads(points[0].read_text())
    assert payload["current_error"] > 0
    assert len(payload["site_energies"]) == payload["size"]
    # gradients unavailable below five sites
    assert payload["gradient"] is None
    summary = result["summary"]
    assert summary["classification"] in ("ballistic", "diffusive", "inconclusive")


def test_campaign_reproducible(tmp_path):
    a = run_campaign(tiny_campaign(tmp_path / "a"), n_workers=2)
    b = run_campaign(tiny_campaign(tmp_path / "b"), n_workers=1)
    assert bundle_digest(tmp_path / "a") == bundle_digest(tmp_path / "b")
    assert a["summary"] == b["summary"]


def test_campaign_resumable(tmp_path):
    reference = tmp_path / "ref"
    run_campaign(tiny_campaign(reference), n_workers=2)
    resumed = tmp_path / "resumed"
    camp = tiny_campaign(resumed)
    run_campaign(camp, n_workers=2)
    # drop one completed point and the analysis, then resume
    victims = sorted((resumed / "points").glob("*.json"))
    victims[1].unlink()
    (resumed / "fits.json").unlink()
    result = run_campaign(camp, n_workers=2)
    assert not result["manifest"]["failures"]
    assert bundle_digest(reference) == bundle_digest(resumed)


def test_verify_passes_on_consistent_system():
    report = verify(SystemSpec(n_sites=2, delta=0.0), TINY,
                    n_realizations=8, n_workers=2)
    assert report["ok"]
    assert report["max_abs_z"] < 4.0
    assert len(report["rows"]) == 3


def test_verify_flags_corrupted_rates():
    # negative control: simulate with doubled bath coupling, compare to the
    # unmodified oracle; the mismatch must exceed the z threshold
    spec = SystemSpec(n_sites=2, delta=0.0)
    corrupted = SystemSpec(n_sites=2, delta=0.0, bath_coupling=0.02)
    exact = oracle.steady_observables(spec)
    targets = exact["site_energies"] + exact["bond_currents"]
    cfg = TrajectoryConfig(t0=500.0, n_samples=12000, seed=7)
    est = mcwf.run_ensemble(corrupted, cfg, n_realizations=8, n_workers=2)
    zs = [abs(e.mean - t) / e.std_error for e, t in zip(est, targets)]
    assert max(zs) > 4.0


def test_verify_size_guard():
    with pytest.raises(SpecError):
        verify(SystemSpec(n_sites=5, delta=1.0), TINY)


def test_jump_seed_stability_across_resume(tmp_path):
    """Point seeds derive from the scan index, not the completion order."""
    out1 = tmp_path / "o1"
    camp = tiny_campaign(out1, values=(2, 3))
    run_campaign(camp, n_workers=1)
    # fresh campaign where point 0 is pre-completed, point 1 removed
    out2 = tmp_path / "o2"
    (out2 / "points").mkdir(parents=True)
    src = sorted((out1 / "points").glob("*.json"))
    (out2 / "points" / src[0].name).write_text(src[0].read_text())
    run_campaign(tiny_campaign(out2, values=(2, 3)), n_workers=1)
    assert bundle_digest(out1) == bundle_digest(out2)


# ----------------------------------------------------------------- CLI

def write_config(path, out_dir):
    config = {
        "system": {"topology": "chain", "n_sites": 2, "delta": 0.0},
        "trajectory": {"t0": 200.0, "n_samples": 1500, "seed": 101},
        "campaign": {"scan_axis": "n_sites", "scan_values": [2, 3, 4],
                     "realizations": 4, "output_dir": str(out_dir)},
    }
    path.write_text(json.dumps(config))
    return path


def test_cli_run_fit_export(tmp_path, capsys):
    config = write_config(tmp_path / "config.json", tmp_path / "out")
    assert cli.main(["run", "--config", str(config), "--workers", "2"]) == 0
    assert cli.main(["fit", "--bundle", str(tmp_path / "out")]) == 0
    assert cli.main(["export", "--bundle", str(tmp_path / "out")]) == 0
    figures = tmp_path / "out" / "figures"
    assert (figures / "scaling_current.csv").exists()
    assert (figures / "fits.json").exists()
    assert len(list(figures.glob("profile_size_*.csv"))) == 3
    capsys.readouterr()


def test_cli_verify_ok(tmp_path, capsys):
    config = write_config(tmp_path / "config.json", tmp_path / "out")
    code = cli.main(["verify", "--config", str(config),
                     "--realizations", "8", "--workers", "2"])
    out = capsys.readouterr().out
    assert code == 0
    assert "max |z|" in out


def test_cli_validation_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"system": {"n_sites": 1}}))
    assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_VALIDATION
    missing = tmp_path / "missing.json"
    assert cli.main(["run", "--config", str(missing)]) == cli.EXIT_VALIDATION
    assert cli.main(["fit", "--bundle", str(tmp_path / "nowhere")]) == \
        cli.EXIT_VALIDATION
    capsys.readouterr()


def test_cli_seed_override(tmp_path):
    config = write_config(tmp_path / "config.json", tmp_path / "out1")
    cli.main(["run", "--config", str(config), "--workers", "1",
              "--seed", "777", "--output", str(tmp_path / "s777")])
    cli.main(["run", "--config", str(config), "--workers", "1",
              "--seed", "778", "--output", str(tmp_path / "s778")])
    d1 = bundle_digest(tmp_path / "s777")
    d2 = bundle_digest(tmp_path / "s778")
    assert d1 != d2
