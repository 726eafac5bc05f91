"""Exact small-system reference: dense Liouvillian, stationary state, and
direct master-equation propagation.

Vectorization is column-stacking: vec(rho) = rho.flatten(order="F"), so
vec(A rho B) = (B.T kron A) vec(rho).  The Liouvillian can be assembled
either from the full 2x2 coefficient matrix of each bath contact or from
the diagonalized jump channels; the two constructions must agree and are
compared in tests.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import baths, model
from .model import SystemSpec, to_dense

ORACLE_MAX_SPINS = 8


class DegenerateSteadyStateError(RuntimeError):
    """Raised when the Liouvillian null space is not one-dimensional."""


def _check_size(n_spins: int):
    if n_spins > ORACLE_MAX_SPINS:
        raise ValueError(
            f"oracle limited to {ORACLE_MAX_SPINS} spins (got {n_spins}): "
            "the dense superoperator would not fit in memory"
        )


def _dissipator_term(left: np.ndarray, right_dag: np.ndarray) -> np.ndarray:
    """Superoperator of  L rho Rdag - (Rdag L rho + rho Rdag L) / 2."""
    dim = left.shape[0]
    eye = np.eye(dim)
    rl = right_dag @ left
    return (np.kron(right_dag.T, left)
            - 0.5 * np.kron(eye, rl)
            - 0.5 * np.kron(rl.T, eye))


def commutator_superoperator(h: sp.spmatrix | np.ndarray) -> np.ndarray:
    """Superoperator of -i [H, rho] in column-stacking convention."""
    hd = to_dense(h) if sp.issparse(h) else np.asarray(h, dtype=complex)
    eye = np.eye(hd.shape[0])
    return -1j * (np.kron(eye, hd) - np.kron(hd.T, eye))


def dissipator_from_rates(omega: float, beta: float, coupling: float,
                          spin: int, n_spins: int) -> np.ndarray:
    """Dissipator of one bath contact built from the full coefficient
    matrix, independent of the channel diagonalization."""
    gamma = baths.bath_rate_matrix(omega, beta, coupling)
    ops = [to_dense(model.embed(model.SIGMA_PLUS, spin, n_spins)),
           to_dense(model.embed(model.SIGMA_MINUS, spin, n_spins))]
    dim = 2 ** n_spins
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for k in range(2):
        for l in range(2):
            out += gamma[k, l] * _dissipator_term(ops[k], ops[l].conj().T)
    return out


def dissipator_from_channels(channels: list[baths.JumpChannel]) -> np.ndarray:
    """Dissipator in diagonal (Lindblad) form from jump channels."""
    dim = channels[0].operator.shape[0]
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for ch in channels:
        e = to_dense(ch.operator)
        out += ch.rate * _dissipator_term(e, e.conj().T)
    return out


def liouvillian_from_parts(h: sp.spmatrix | np.ndarray,
                           channels: list[baths.JumpChannel]) -> np.ndarray:
    """Liouvillian of an arbitrary Hamiltonian plus jump channels; with no
    channels this is the closed-system (purely coherent) generator."""
    lv = commutator_superoperator(h)
    if channels:
        lv = lv + dissipator_from_channels(channels)
    return lv


def build_liouvillian(spec: SystemSpec, route: str = "rates") -> np.ndarray:
    """Dense Liouvillian of a system; ``route`` selects whether dissipators
    come from the full coefficient matrices or the diagonalized channels."""
    _check_size(spec.n_spins)
    h = model.total_hamiltonian(spec)
    lv = commutator_superoperator(h)
    if route == "rates":
        for bath in baths.bath_specs_for(spec):
            for spin in bath.target_spins:
                lv += dissipator_from_rates(spec.omega, bath.beta,
                                            bath.coupling, spin, spec.n_spins)
    elif route == "channels":
        lv += dissipator_from_channels(baths.build_channels(spec))
    else:
        raise ValueError(f"unknown route {route!r}")
    return lv


def steady_state_from_liouvillian(lv: np.ndarray, gap_tol: float = 1e-10
                                  ) -> tuple[np.ndarray, float]:
    """Trace-one Hermitian null vector of a Liouvillian and the second
    smallest singular value (uniqueness gap)."""
    _, s, vh = la.svd(lv)
    gap = s[-2]
    if gap <= gap_tol:
        raise DegenerateSteadyStateError(
            f"second-smallest singular value {gap:.3e} <= {gap_tol:.1e}"
        )
    dim = int(round(np.sqrt(lv.shape[0])))
    rho = vh[-1].conj().reshape((dim, dim), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return rho, gap


def steady_state(spec: SystemSpec) -> np.ndarray:
    rho, _ = steady_state_from_liouvillian(build_liouvillian(spec))
    return rho


def propagate(rho0: np.ndarray, spec: SystemSpec, t: float) -> np.ndarray:
    """rho(t) by dense exponential of the Liouvillian; re-checks the
    density-matrix invariants on the result."""
    lv = build_liouvillian(spec)
    vec = np.asarray(rho0, dtype=complex).flatten(order="F")
    out = la.expm(lv * t) @ vec
    rho = out.reshape(rho0.shape, order="F")
    assert_density_matrix(rho)
    return rho


def assert_density_matrix(rho: np.ndarray, herm_tol: float = 1e-10,
                          trace_tol: float = 1e-10, eig_tol: float = 1e-8):
    """Check Hermiticity, unit trace and positivity; raise with the largest
    deviation when violated."""
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"non-Hermitian density matrix: max deviation {herm:.3e}")
    trace = abs(np.trace(rho) - 1.0)
    if trace > trace_tol:
        raise ValueError(f"trace deviates from one by {trace:.3e}")
    lowest = la.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lowest < -eig_tol:
        raise ValueError(f"negative eigenvalue {lowest:.3e}")


def expectation(op: sp.spmatrix | np.ndarray, rho: np.ndarray) -> float:
    od = to_dense(op) if sp.issparse(op) else op
    return float(np.trace(od @ rho).real)


def steady_observables(spec: SystemSpec) -> dict:
    """Stationary site energies and bond currents, exact for small systems."""
    rho = steady_state(spec)
    local = model.build_local_hamiltonians(spec)
    currents = model.build_current_operators(spec)
    return {
        "site_energies": [expectation(op, rho) for op in local],
        "bond_currents": [expectation(op, rho) for op in currents],
    }


def export_fixtures(specs: list[SystemSpec], path: str | Path) -> dict:
    """Write stationary observables keyed by the canonical spec hash."""
    out = {}
    for spec in specs:
        out[model.spec_hash(spec)] = steady_observables(spec)
    path = Path(path)
    path.write_text(json.dumps(out, indent=2, sort_keys=True))
    return out
