"""Numba kernels for the trajectory engine.

The effective Hamiltonian is split as H_eff = diag(c) + F with F strictly
off-diagonal.  All strong scales (local fields, zz terms, decay rates) live
in c, so integrating in the interaction picture of the diagonal leaves a
slow equation  phi' = -i exp(+ics) F exp(-ics) phi  that a fixed-step RK4
handles with substeps well above what the bare equation would allow.  The
diagonal phases at the RK4 stage times are chained from a single
half-substep phase vector, so no complex exponentials appear in the hot
loop.
"""

import numpy as np
from numba import njit

STATUS_DONE = 0
STATUS_CROSSED = 1
STATUS_NORM_GREW = 2

MONO_TOL = 1e-9
REFINE_NORM_TOL = 1e-13
MAX_REFINE_ITERS = 80


@njit(cache=True)
def _apply_offdiag(indptr, indices, data, x, out):
    for a in range(x.shape[0]):
        acc = 0.0 + 0.0j
        for p in range(indptr[a], indptr[a + 1]):
            acc += data[p] * x[indices[p]]
        out[a] = acc


@njit(cache=True)
def _stage_deriv(phi, u, winv, indptr, indices, data, tmp, out):
    # out = -i * winv o (F (u o phi))   with u = exp(-ics), winv = exp(+ics)
    n = phi.shape[0]
    for i in range(n):
        tmp[i] = u[i] * phi[i]
    _apply_offdiag(indptr, indices, data, tmp, out)
    for i in range(n):
        out[i] = -1j * (winv[i] * out[i])


@njit(cache=True)
def _rk4_step(phi, u, winv, q, qinv, h, indptr, indices, data,
              tmp, k1, k2, k3, stage):
    """One RK4 step of size h; u/winv enter at the step start and leave at
    the step end (q is the half-step diagonal phase)."""
    n = phi.shape[0]
    _stage_deriv(phi, u, winv, indptr, indices, data, tmp, k1)
    for i in range(n):
        u[i] *= q[i]
        winv[i] *= qinv[i]
        stage[i] = phi[i] + 0.5 * h * k1[i]
    _stage_deriv(stage, u, winv, indptr, indices, data, tmp, k2)
    for i in range(n):
        stage[i] = phi[i] + 0.5 * h * k2[i]
    _stage_deriv(stage, u, winv, indptr, indices, data, tmp, k3)
    for i in range(n):
        u[i] *= q[i]
        winv[i] *= qinv[i]
        stage[i] = phi[i] + h * k3[i]
    # k3 is reused as k4 accumulation target after this call
    _stage_deriv(stage, u, winv, indptr, indices, data, tmp, stage)
    for i in range(n):
        phi[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + stage[i])


@njit(cache=True)
def _materialized_norm2(u, phi):
    total = 0.0
    for i in range(u.shape[0]):
        z = u[i] * phi[i]
        total += z.real * z.real + z.imag * z.imag
    return total


@njit(cache=True)
def _decay_rate(u, phi, gamma):
    # d<psi|psi>/ds = -sum_i gamma_i |psi_i|^2  (gamma = -2 Im c >= 0)
    total = 0.0
    for i in range(u.shape[0]):
        z = u[i] * phi[i]
        total += gamma[i] * (z.real * z.real + z.imag * z.imag)
    return total


@njit(cache=True)
def _refine_crossing(phi0, u0, winv0, c, gamma, indptr, indices, data,
                     h, eta, norm_lo, norm_hi, psi_out,
                     tmp, k1, k2, k3, stage, phi_t, u_t, winv_t, e_half):
    """Locate s in (0, h] with ||psi(s)||^2 = eta, starting from the state
    at the step start (norm norm_lo >= eta > norm_hi at s = h).

    Newton iterations on the exactly known norm derivative, safeguarded by
    the shrinking bracket; each trial is one RK4 step of size s.  Returns
    the crossing offset and writes the unnormalized state into psi_out.
    """
    n = phi0.shape[0]
    lo, hi = 0.0, h
    # exponential-decay interpolation for the first guess
    rate = np.log(norm_lo / norm_hi) / h
    s = np.log(norm_lo / eta) / rate
    if not (lo < s < hi):
        s = 0.5 * h
    for _ in range(MAX_REFINE_ITERS):
        for i in range(n):
            e_half[i] = np.exp(-1j * c[i] * (0.5 * s))
            phi_t[i] = phi0[i]
            u_t[i] = u0[i]
            winv_t[i] = winv0[i]
        _rk4_step(phi_t, u_t, winv_t, e_half, 1.0 / e_half, s,
                  indptr, indices, data, tmp, k1, k2, k3, stage)
        norm2 = _materialized_norm2(u_t, phi_t)
        g = norm2 - eta
        if abs(g) <= REFINE_NORM_TOL or (hi - lo) <= 1e-12 * h:
            break
        if g > 0.0:
            lo = s
        else:
            hi = s
        slope = -_decay_rate(u_t, phi_t, gamma)
        s_new = s - g / slope if slope < 0.0 else 0.5 * (lo + hi)
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        s = s_new
    for i in range(n):
        psi_out[i] = u_t[i] * phi_t[i]
    return s


@njit(cache=True)
def _norm2_of(psi):
    total = 0.0
    for i in range(psi.shape[0]):
        total += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
    return total


@njit(cache=True)
def advance_segment(psi, c, gamma, indptr, indices, data, q, qinv,
                    h, n_steps, eta):
    """Integrate psi under H_eff for n_steps substeps of size h, stopping
    when the squared norm crosses eta (eta <= 0 disables the threshold).

    psi is updated in place to the state at the segment end or at the
    crossing (unnormalized).  Returns (status, elapsed, squared_norm).
    """
    n = psi.shape[0]
    u = np.ones(n, np.complex128)
    winv = np.ones(n, np.complex128)
    phi = psi.copy()
    phi_prev = np.empty(n, np.complex128)
    u_prev = np.empty(n, np.complex128)
    winv_prev = np.empty(n, np.complex128)
    tmp = np.empty(n, np.complex128)
    k1 = np.empty(n, np.complex128)
    k2 = np.empty(n, np.complex128)
    k3 = np.empty(n, np.complex128)
    stage = np.empty(n, np.complex128)
    e_half = np.empty(n, np.complex128)
    norm_prev = _norm2_of(psi)
    for step in range(n_steps):
        for i in range(n):
            phi_prev[i] = phi[i]
            u_prev[i] = u[i]
            winv_prev[i] = winv[i]
        _rk4_step(phi, u, winv, q, qinv, h, indptr, indices, data,
                  tmp, k1, k2, k3, stage)
        norm2 = _materialized_norm2(u, phi)
        if norm2 > norm_prev * (1.0 + MONO_TOL):
            return STATUS_NORM_GREW, (step + 1) * h, norm2
        if eta > 0.0 and norm2 < eta:
            # phi/u/winv are dead past this point; reuse them as the
            # refinement trial buffers
            s = _refine_crossing(phi_prev, u_prev, winv_prev, c, gamma,
                                 indptr, indices, data, h, eta,
                                 norm_prev, norm2, psi,
                                 tmp, k1, k2, k3, stage,
                                 phi, u, winv, e_half)
            return STATUS_CROSSED, step * h + s, _norm2_of(psi)
        norm_prev = norm2
    for i in range(n):
        psi[i] = u[i] * phi[i]
    return STATUS_DONE, n_steps * h, norm_prev


@njit(cache=True)
def quadratic_forms(psi, indptr2d, indices_cat, data_cat, offsets, out):
    """Real quadratic forms <psi|A_k|psi> for a batch of Hermitian CSR
    operators with concatenated index/data arrays."""
    n = psi.shape[0]
    for k in range(indptr2d.shape[0]):
        base = offsets[k]
        acc = 0.0 + 0.0j
        for a in range(n):
            row = 0.0 + 0.0j
            for p in range(indptr2d[k, a], indptr2d[k, a + 1]):
                row += data_cat[base + p] * psi[indices_cat[base + p]]
            acc += np.conj(psi[a]) * row
        out[k] = acc.real
    return out


@njit(cache=True)
def channel_weight(indptr, indices, data, psi, out):
    """||E psi||^2 and E psi for one channel."""
    _apply_offdiag(indptr, indices, data, psi, out)
    return _norm2_of(out)
