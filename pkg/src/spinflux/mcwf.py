"""Quantum-jump trajectory solver for the stationary state.

The piecewise-deterministic process: evolve the unnormalized state under
the non-Hermitian effective Hamiltonian until its squared norm reaches a
uniformly drawn threshold, then apply one jump channel selected by the
channel weights and renormalize.  Observables are sampled on a uniform
time grid after a burn-in period and averaged over time (one realization)
and over independently seeded realizations (ensemble mean and error).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import _kernels, model
from .baths import JumpChannel, build_channels
from .model import SystemSpec


class IntegrationError(RuntimeError):
    """Norm grew along a deterministic segment (bad substep or operator)."""


class DarkStateError(RuntimeError):
    """No jump channel has nonzero weight on the current state."""


class InvalidJumpError(RuntimeError):
    """A jump was requested whose channel annihilates the state."""


@dataclass(frozen=True)
class TrajectoryConfig:
    """Sampling grid, burn-in, integrator substep and seeding."""

    dt_sample: float = 1.0
    t0: float = 1.0e4
    n_samples: int = 100_000
    substep: float = 0.5
    seed: int = 0
    jump_mode: str = "norm_threshold"

    def __post_init__(self):
        if self.dt_sample <= 0:
            raise ValueError("dt_sample must be positive")
        if self.substep <= 0 or self.substep > self.dt_sample:
            raise ValueError("substep must lie in (0, dt_sample]")
        if self.t0 < 0:
            raise ValueError("t0 must be non-negative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.jump_mode not in ("norm_threshold", "fixed_step"):
            raise ValueError(f"unknown jump_mode {self.jump_mode!r}")


@dataclass(frozen=True)
class StationaryEstimate:
    """Stationary mean of one observable with its statistical error.

    ``std_error`` is the realization-to-realization error of the ensemble
    mean; it is None for a single realization (time samples on the grid
    are correlated, so no per-sample error is quoted).
    """

    mean: float
    std_error: float | None
    n_realizations: int
    n_samples: int


def effective_hamiltonian(h: sp.spmatrix,
                          channels: list[JumpChannel]) -> sp.csr_matrix:
    """H_eff = H - (i/2) sum_k rate_k E_k^dag E_k (non-Hermitian)."""
    h_eff = h.tocsr().astype(complex)
    for ch in channels:
        if ch.operator.shape != h.shape:
            raise ValueError("channel dimension does not match Hamiltonian")
        e = ch.operator
        h_eff = h_eff - 0.5j * ch.rate * (e.getH() @ e)
    return h_eff.tocsr()


class _Engine:
    """Precomputed arrays for integrating one effective Hamiltonian."""

    def __init__(self, h_eff: sp.spmatrix, substep: float):
        h_eff = h_eff.tocsr()
        diag = h_eff.diagonal().astype(complex)
        offdiag = (h_eff - sp.diags(diag, format="csr")).tocsr()
        offdiag.eliminate_zeros()
        offdiag.sort_indices()
        self.dim = h_eff.shape[0]
        self.c = diag
        self.gamma = -2.0 * diag.imag
        if self.gamma.min() < -1e-12:
            raise ValueError("effective Hamiltonian has amplifying diagonal")
        self.indptr = offdiag.indptr.astype(np.int32)
        self.indices = offdiag.indices.astype(np.int32)
        self.data = offdiag.data.astype(np.complex128)
        self.substep = float(substep)
        self._phase_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def _phases(self, h: float) -> tuple[np.ndarray, np.ndarray]:
        cached = self._phase_cache.get(h)
        if cached is None:
            q = np.exp(-1j * self.c * (0.5 * h))
            cached = (q, 1.0 / q)
            if len(self._phase_cache) < 64:
                self._phase_cache[h] = cached
        return cached

    def advance(self, psi: np.ndarray, length: float,
                eta: float) -> tuple[int, float, float]:
        """Advance psi in place by up to ``length``, stopping at the norm
        threshold eta (disabled when eta <= 0)."""
        n_steps = max(1, math.ceil(length / self.substep - 1e-12))
        h = length / n_steps
        q, qinv = self._phases(h)
        status, elapsed, norm2 = _kernels.advance_segment(
            psi, self.c, self.gamma, self.indptr, self.indices, self.data,
            q, qinv, h, n_steps, eta)
        if status == _kernels.STATUS_NORM_GREW:
            raise IntegrationError(
                f"squared norm grew to {norm2:.6e} during a deterministic "
                "segment; reduce the substep"
            )
        return status, elapsed, norm2


class _PackedObservables:
    """Batch of Hermitian operators laid out for the quadratic-form kernel."""

    def __init__(self, ops: list[sp.spmatrix]):
        csrs = [op.tocsr().astype(np.complex128) for op in ops]
        for op in csrs:
            op.sort_indices()
        dim = csrs[0].shape[0]
        self.n_ops = len(csrs)
        self.indptr2d = np.vstack([op.indptr.astype(np.int32) for op in csrs])
        self.indices = np.concatenate(
            [op.indices.astype(np.int32) for op in csrs])
        self.data = np.concatenate([op.data for op in csrs])
        nnzs = np.array([op.nnz for op in csrs], dtype=np.int64)
        self.offsets = np.concatenate(([0], np.cumsum(nnzs)))
        self.dim = dim

    def evaluate(self, psi: np.ndarray, norm2: float,
                 out: np.ndarray) -> np.ndarray:
        _kernels.quadratic_forms(psi, self.indptr2d, self.indices,
                                 self.data, self.offsets, out)
        out /= norm2
        return out


def default_observables(spec: SystemSpec) -> list[sp.csr_matrix]:
    """Local energies followed by bond currents."""
    local = model.build_local_hamiltonians(spec)
    interaction = model.build_interaction_hamiltonians(spec)
    currents = model.build_current_operators(spec, local, interaction)
    return local + currents


def initial_state(n_spins: int) -> np.ndarray:
    """Product state with every spin in (|up> + |down>)/sqrt(2): a
    non-eigenstate start that no channel annihilates."""
    dim = 2 ** n_spins
    return np.full(dim, 1.0 / math.sqrt(dim), dtype=np.complex128)


def evolve_to_threshold(psi: np.ndarray, h_eff: sp.spmatrix, eta: float,
                        max_time: float, substep: float = 0.25
                        ) -> tuple[np.ndarray, float, bool]:
    """Integrate the unnormalized state until <psi|psi> crosses eta or
    max_time elapses.  Returns (state, elapsed time, hit flag)."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    engine = _Engine(h_eff, substep)
    out = np.array(psi, dtype=np.complex128, copy=True)
    status, elapsed, _ = engine.advance(out, max_time, eta)
    return out, elapsed, status == _kernels.STATUS_CROSSED


def jump_weights(psi: np.ndarray, channels: list[JumpChannel]) -> np.ndarray:
    return np.array([ch.rate * _norm2(ch.operator @ psi) for ch in channels])


def select_jump(psi: np.ndarray, channels: list[JumpChannel],
                u: float) -> int:
    """Channel index drawn by cumulative-sum inversion of u over the
    normalized weights rate_k ||E_k psi||^2."""
    weights = jump_weights(psi, channels)
    total = weights.sum()
    if total <= 0.0:
        raise DarkStateError("all jump-channel weights vanish")
    cumulative = np.cumsum(weights)
    return int(np.searchsorted(cumulative, u * total, side="right").clip(0, len(channels) - 1))


def apply_jump(psi: np.ndarray, channel: JumpChannel) -> np.ndarray:
    """Replace the state by the normalized channel image."""
    image = channel.operator @ psi
    norm = np.linalg.norm(image)
    if norm == 0.0:
        raise InvalidJumpError("jump channel annihilates the state")
    return image / norm


def _norm2(psi: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, psi)))


class _Trajectory:
    """One realization of the piecewise-deterministic process."""

    def __init__(self, engine: _Engine, channels: list[JumpChannel],
                 config: TrajectoryConfig, rng: np.random.Generator,
                 psi0: np.ndarray, jump_log=None):
        self.engine = engine
        self.channels = channels
        self.config = config
        self.rng = rng
        self.psi = np.array(psi0, dtype=np.complex128, copy=True)
        self.psi /= np.linalg.norm(self.psi)
        self.norm2 = 1.0
        self.t = 0.0
        self.jump_log = jump_log
        self.n_jumps = 0
        self.jumps_in_window = 0
        self.eta = self._draw_eta()

    @property
    def normalized_state(self) -> np.ndarray:
        return self.psi / math.sqrt(self.norm2)

    def _draw_eta(self) -> float:
        eta = self.rng.random()
        while eta <= 0.0:
            eta = self.rng.random()
        return eta

    def _do_jump(self):
        k = select_jump(self.psi, self.channels, self.rng.random())
        self.psi = apply_jump(self.psi, self.channels[k])
        self.norm2 = 1.0
        self.eta = self._draw_eta()
        self.n_jumps += 1
        if self.jump_log is not None:
            self.jump_log.write(f"{self.t:.9g} {k}\n")

    def advance(self, length: float):
        if self.config.jump_mode == "fixed_step":
            self._advance_fixed_step(length)
            return
        remaining = length
        while remaining > 1e-12:
            status, elapsed, norm2 = self.engine.advance(
                self.psi, remaining, self.eta)
            self.t += elapsed
            self.norm2 = norm2
            remaining -= elapsed
            if status == _kernels.STATUS_CROSSED:
                try:
                    self._do_jump()
                except DarkStateError:
                    # no channel can fire: continue deterministically
                    self.eta = -1.0
            else:
                break

    def _advance_fixed_step(self, length: float):
        """First-order variant: jumps allowed at segment boundaries only,
        with probability 1 - <psi|psi> accumulated over the segment."""
        norm_before = self.norm2
        _, elapsed, norm2 = self.engine.advance(self.psi, length, -1.0)
        self.t += elapsed
        self.norm2 = norm2
        if self.rng.random() < 1.0 - norm2 / norm_before:
            self._do_jump()
        else:
            # renormalize so the no-jump probability stays first order
            self.psi /= math.sqrt(norm2 / norm_before)
            self.norm2 = norm_before


def _simulate(spec: SystemSpec, config: TrajectoryConfig,
              observables: list[sp.spmatrix],
              seed_sequence: np.random.SeedSequence,
              psi0: np.ndarray | None = None,
              jump_log=None):
    """Run one trajectory over the full grid t0 + k dt, k = 0..n_samples.

    Returns (samples, trajectory): one sample row per grid time, and the
    trajectory object whose state is the normalized wave function at the
    final grid time (with jump counters for diagnostics)."""
    h = model.total_hamiltonian(spec)
    channels = build_channels(spec)
    engine = _Engine(effective_hamiltonian(h, channels), config.substep)
    packed = _PackedObservables(observables) if observables else None
    rng = np.random.default_rng(seed_sequence)
    if psi0 is None:
        psi0 = initial_state(spec.n_spins)
    traj = _Trajectory(engine, channels, config, rng, psi0, jump_log)

    n_burn = int(round(config.t0 / config.dt_sample))
    if abs(n_burn * config.dt_sample - config.t0) > 1e-9:
        raise ValueError("t0 must be a multiple of dt_sample")
    for _ in range(n_burn):
        traj.advance(config.dt_sample)
    jumps_at_t0 = traj.n_jumps
    samples = np.empty((config.n_samples + 1, len(observables)))
    row = np.empty(len(observables))
    for k in range(config.n_samples + 1):
        if k > 0:
            traj.advance(config.dt_sample)
        if packed is not None:
            packed.evaluate(traj.psi, traj.norm2, row)
            samples[k] = row
    traj.jumps_in_window = traj.n_jumps - jumps_at_t0
    return samples, traj


def run_trajectory(spec: SystemSpec, config: TrajectoryConfig,
                   observables: list[sp.spmatrix] | None = None,
                   return_samples: bool = False, jump_log=None):
    """Time-averaged stationary estimate of each observable from a single
    realization (deterministic given the config seed)."""
    if observables is None:
        observables = default_observables(spec)
    samples, _ = _simulate(spec, config, observables,
                           np.random.SeedSequence(config.seed),
                           jump_log=jump_log)
    means = samples.mean(axis=0)
    estimates = [StationaryEstimate(float(m), None, 1, samples.shape[0])
                 for m in means]
    if return_samples:
        return estimates, samples
    return estimates


def _realization_seed(master_seed: int, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, r])


def _ensemble_worker(args):
    spec, config, observables, seed_entry = args
    samples, _ = _simulate(spec, config, observables, seed_entry)
    return samples.mean(axis=0)


def ensemble_means(spec: SystemSpec, config: TrajectoryConfig,
                   observables: list[sp.spmatrix],
                   n_realizations: int,
                   n_workers: int | None = None,
                   seeds: list[int] | None = None) -> np.ndarray:
    """Per-realization time averages A_r, shape (R, n_observables)."""
    if seeds is None:
        seq = [_realization_seed(config.seed, r) for r in range(n_realizations)]
    else:
        if len(seeds) != n_realizations:
            raise ValueError("need one seed per realization")
        seq = [np.random.SeedSequence(s) for s in seeds]
    tasks = [(spec, config, observables, s) for s in seq]
    if n_workers is None or n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_ensemble_worker, tasks))
    else:
        rows = [_ensemble_worker(t) for t in tasks]
    return np.vstack(rows)


def run_ensemble(spec: SystemSpec, config: TrajectoryConfig,
                 observables: list[sp.spmatrix] | None = None,
                 n_realizations: int = 8,
                 n_workers: int | None = None,
                 seeds: list[int] | None = None) -> list[StationaryEstimate]:
    """Ensemble mean and standard error over independently seeded
    realizations: mean = (1/R) sum A_r, sigma^2 = sum (A_r - mean)^2 / (R(R-1))."""
    if n_realizations < 2:
        raise ValueError("need at least two realizations for an error bar")
    if observables is None:
        observables = default_observables(spec)
    rows = ensemble_means(spec, config, observables, n_realizations,
                          n_workers=n_workers, seeds=seeds)
    means = rows.mean(axis=0)
    r = rows.shape[0]
    sigma = np.sqrt(((rows - means) ** 2).sum(axis=0) / (r * (r - 1)))
    return [StationaryEstimate(float(m), float(s), r, config.n_samples + 1)
            for m, s in zip(means, sigma)]


def with_seed(config: TrajectoryConfig, seed: int) -> TrajectoryConfig:
    return replace(config, seed=seed)
