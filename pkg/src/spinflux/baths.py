"""Thermal bath contacts: rates, coefficient matrices, jump channels.

Each bath couples through sigma_+ and sigma_- of one spin with an Ohmic
rate profile.  The 2x2 coefficient matrix of every contact is analytically
rank one, so diagonalizing it yields exactly one jump channel per contact:
a fixed linear combination  u sigma_+ + v sigma_-  with a single rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import scipy.sparse as sp

from .model import SIGMA_MINUS, SIGMA_PLUS, SpecError, SystemSpec, embed

EIGENVALUE_CUTOFF = 1e-14


@dataclass(frozen=True)
class BathSpec:
    """One bath contact: side, inverse temperature, coupling, target spins."""

    side: str
    beta: float
    coupling: float
    target_spins: tuple[int, ...]


@dataclass(frozen=True)
class JumpChannel:
    """A jump operator with its non-negative rate."""

    operator: sp.csr_matrix = field(repr=False)
    rate: float
    label: str = ""


def thermal_rate(omega: float, beta: float, coupling: float) -> float:
    """Ohmic bath rate  coupling * omega / (exp(beta * omega) - 1).

    Defined for either sign of omega (positive in both cases); omega = 0 is
    rejected rather than taking the removable limit, since the models here
    always query the rate at +/- the local splitting.
    """
    if omega == 0:
        raise ValueError("thermal_rate is undefined at omega = 0")
    if beta <= 0:
        raise ValueError("beta must be positive")
    if coupling <= 0:
        raise ValueError("coupling must be positive")
    x = beta * omega
    if x > 700.0:  # exp would overflow; the rate is dead anyway
        return 0.0
    return coupling * omega / math.expm1(x)


def bath_rate_matrix(omega: float, beta: float, coupling: float):
    """Symmetric 2x2 coefficient matrix in the (sigma_+, sigma_-) basis."""
    import numpy as np

    up = thermal_rate(omega, beta, coupling)
    down = thermal_rate(-omega, beta, coupling)
    off = math.sqrt(up * down)
    return np.array([[up, off], [off, down]])


def channel_coefficients(omega: float, beta: float, coupling: float
                         ) -> list[tuple[float, float, float]]:
    """Closed-form eigendecomposition of the contact's coefficient matrix.

    Returns (rate, u, v) per nonzero eigenvalue, where the jump operator is
    u sigma_+ + v sigma_-.  Eigenvalues below EIGENVALUE_CUTOFF * trace are
    dropped as exact zeros (the matrix is rank one analytically).  The
    eigenvector phase is fixed by a non-negative sigma_+ coefficient.
    """
    gamma = bath_rate_matrix(omega, beta, coupling)
    a, b, c = gamma[0, 0], gamma[1, 1], gamma[0, 1]
    trace = a + b
    disc = math.sqrt((a - b) ** 2 + 4 * c * c)
    out = []
    for lam in ((trace + disc) / 2.0, (trace - disc) / 2.0):
        if lam <= EIGENVALUE_CUTOFF * trace:
            continue
        # eigenvector of [[a, c], [c, b]] for eigenvalue lam
        u, v = (c, lam - a) if abs(lam - a) > abs(lam - b) else (lam - b, c)
        norm = math.hypot(u, v)
        u, v = u / norm, v / norm
        if u < 0 or (u == 0 and v < 0):
            u, v = -u, -v
        out.append((lam, u, v))
    return out


def bath_specs_for(spec: SystemSpec) -> list[BathSpec]:
    """Bath contacts of a system: edge sites of a chain, or one private bath
    per spin of the edge rungs of a ladder."""
    if spec.topology == "chain":
        return [
            BathSpec("left", spec.beta_left, spec.bath_coupling, (1,)),
            BathSpec("right", spec.beta_right, spec.bath_coupling, (spec.n_sites,)),
        ]
    n = spec.n_spins
    return [
        BathSpec("left", spec.beta_left, spec.bath_coupling, (1, 2)),
        BathSpec("right", spec.beta_right, spec.bath_coupling, (n - 1, n)),
    ]


def spin_channels(omega: float, beta: float, coupling: float, spin: int,
                  n_spins: int, label: str = "") -> list[JumpChannel]:
    """Jump channels of a single bath contact on one spin, embedded in the
    full space.  Private ladder baths use the bare single-spin splitting."""
    channels = []
    for k, (rate, u, v) in enumerate(channel_coefficients(omega, beta, coupling)):
        op = u * embed(SIGMA_PLUS, spin, n_spins) + v * embed(SIGMA_MINUS, spin, n_spins)
        channels.append(JumpChannel(op.tocsr(), rate, label=f"{label}[{k}]"))
    return channels


def build_channels(spec: SystemSpec) -> list[JumpChannel]:
    """All jump channels of a system: one per bath contact (rank-1 matrix),
    so two for a chain and four for a ladder."""
    channels = []
    for bath in bath_specs_for(spec):
        for spin in bath.target_spins:
            channels.extend(
                spin_channels(spec.omega, bath.beta, bath.coupling, spin,
                              spec.n_spins, label=f"{bath.side}:{spin}")
            )
    if not channels:
        raise SpecError("no jump channels built")
    return channels
