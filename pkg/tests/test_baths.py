"""Thermal rates, coefficient matrices, channel construction."""

import math

import numpy as np
import pytest

from spinflux import baths, model
from spinflux.model import SystemSpec

# 0.01 / expm1(0.5) and the matching trace, evaluated independently
GAMMA_UP_FIXTURE = 1.541494082537e-02
GAMMA_TRACE_FIXTURE = 4.082988165074e-02


def test_thermal_rate_value():
    assert baths.thermal_rate(1.0, 0.5, 0.01) == pytest.approx(
        GAMMA_UP_FIXTURE, rel=1e-11)


def test_thermal_rate_detailed_balance():
    rng = np.random.default_rng(10)
    for _ in range(50):
        omega = rng.uniform(0.2, 3.0)
        beta = rng.uniform(0.05, 5.0)
        lam = rng.uniform(1e-3, 0.1)
        ratio = (baths.thermal_rate(-omega, beta, lam)
                 / baths.thermal_rate(omega, beta, lam))
        assert ratio == pytest.approx(math.exp(beta * omega), rel=1e-12)


def test_thermal_rate_zero_temperature_limit():
    assert baths.thermal_rate(1.0, 800.0, 0.01) == 0.0
    assert baths.thermal_rate(-1.0, 800.0, 0.01) == pytest.approx(0.01, rel=1e-12)


def test_thermal_rate_domain():
    with pytest.raises(ValueError):
        baths.thermal_rate(0.0, 0.5, 0.01)
    with pytest.raises(ValueError):
        baths.thermal_rate(1.0, -0.5, 0.01)
    with pytest.raises(ValueError):
        baths.thermal_rate(1.0, 0.5, 0.0)


def test_rate_matrix_rank_one():
    m = baths.bath_rate_matrix(1.0, 0.5, 0.01)
    assert np.linalg.det(m) == pytest.approx(0.0, abs=1e-20)
    eigs = np.sort(np.linalg.eigvalsh(m))
    assert eigs[0] == pytest.approx(0.0, abs=1e-18)
    assert eigs[1] == pytest.approx(m.trace())
    assert m.trace() == pytest.approx(GAMMA_TRACE_FIXTURE, rel=1e-11)


def test_rate_matrix_positive_semidefinite():
    rng = np.random.default_rng(11)
    for _ in range(100):
        m = baths.bath_rate_matrix(rng.uniform(0.2, 3.0),
                                   rng.uniform(0.05, 5.0),
                                   rng.uniform(1e-3, 0.1))
        assert np.linalg.eigvalsh(m).min() >= -1e-15 * m.trace()


def test_single_channel_per_contact():
    coeffs = baths.channel_coefficients(1.0, 0.5, 0.01)
    assert len(coeffs) == 1
    rate, u, v = coeffs[0]
    assert rate == pytest.approx(GAMMA_TRACE_FIXTURE, rel=1e-11)
    assert u >= 0.0
    assert u ** 2 + v ** 2 == pytest.approx(1.0, rel=1e-12)
    # eigenvector of the rank-one matrix: (sqrt(up), sqrt(down)) direction
    up = baths.thermal_rate(1.0, 0.5, 0.01)
    down = baths.thermal_rate(-1.0, 0.5, 0.01)
    assert u / v == pytest.approx(math.sqrt(up / down), rel=1e-10)


def test_channel_counts():
    assert len(baths.build_channels(SystemSpec(n_sites=3))) == 2
    assert len(baths.build_channels(
        SystemSpec(topology="ladder", n_sites=2, j_prime=0.01))) == 4


def test_chain_channels_mirror_symmetric():
    spec = SystemSpec(n_sites=2, delta=0.0, beta_left=0.4, beta_right=0.4)
    left, right = baths.build_channels(spec)
    assert left.rate == pytest.approx(right.rate, rel=1e-14)
    # site-reflection permutation: swap the two qubits
    perm = np.zeros((4, 4))
    for a in range(4):
        swapped = ((a & 1) << 1) | ((a >> 1) & 1)
        perm[swapped, a] = 1.0
    el = model.to_dense(left.operator)
    er = model.to_dense(right.operator)
    assert np.abs(perm @ el @ perm.T - er).max() < 1e-14


def test_ladder_private_bath_targets():
    spec = SystemSpec(topology="ladder", n_sites=3, j_prime=0.01)
    specs = baths.bath_specs_for(spec)
    assert specs[0].target_spins == (1, 2)
    assert specs[1].target_spins == (5, 6)


def test_zero_temperature_channel_is_pure_decay():
    (rate, u, v), = baths.channel_coefficients(1.0, 800.0, 0.01)
    assert rate == pytest.approx(0.01, rel=1e-12)
    assert u == 0.0 and v == 1.0
