"""Compiled inner loops for state-vector propagation.

Everything here works in angular units (rad/us) on complex128 amplitude
vectors over the 2**N bitstring basis, vertex 1 = least significant bit.
The Hamiltonian is never materialized: the diagonal is evaluated per basis
state and the drive term is a sum of single-bit flips, so one application
costs O(N * 2**N).

The stepper is classic fixed-step RK4.  Step count is chosen by the caller
from a spectral-norm bound; the kernels only execute.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _omega_ang(t, omega0, tf1, tf2, tau):
    if t <= tf1:
        return omega0 * (t / tf1)
    if t <= tf2:
        return omega0
    return omega0 * (t - tau) / (tf2 - tau)


@njit(cache=True)
def _sweep_frac(t, tf1, tf2, tau, alpha_d, inv_sin2):
    if t < tf1:
        return 0.0
    if t >= tf2:
        return 1.0
    s = np.sin(alpha_d * (t - tf1) / tau)
    return s * s * inv_sin2


@njit(cache=True, fastmath=True)
def _rhs(t, psi, out, diag_v, pop, wsum, gsum, gamma_on,
         delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2, n_atoms):
    # out = -i H(t) psi - (1/4) gsum psi   (the decay term is active only
    # for the effective non-Hermitian evolution of the jump unraveling)
    s = _sweep_frac(t, tf1, tf2, tau, alpha_d, inv_sin2)
    half_omega = 0.5 * _omega_ang(t, omega0, tf1, tf2, tau)
    a0 = (1.0 - s) * delta0
    dim = psi.shape[0]
    for i in range(dim):
        acc = (diag_v[i] - a0 * pop[i] - s * wsum[i]) * psi[i]
        for k in range(n_atoms):
            acc += half_omega * psi[i ^ (1 << k)]
        if gamma_on:
            out[i] = -1j * acc - 0.25 * gsum[i] * psi[i]
        else:
            out[i] = -1j * acc


@njit(cache=True)
def _rk4_step(t, dt, psi, k1, k2, k3, k4, work, diag_v, pop, wsum, gsum, gamma_on,
              delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2, n_atoms):
    dim = psi.shape[0]
    half = 0.5 * dt
    _rhs(t, psi, k1, diag_v, pop, wsum, gsum, gamma_on,
         delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2, n_atoms)
    for i in range(dim):
        work[i] = psi[i] + half * k1[i]
    _rhs(t + half, work, k2, diag_v, pop, wsum, gsum, gamma_on,
         delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2, n_atoms)
    for i in range(dim):
        work[i] = psi[i] + half * k2[i]
    _rhs(t + half, work, k3, diag_v, pop, wsum, gsum, gamma_on,
         delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2, n_atoms)
    for i in range(dim):
        work[i] = psi[i] + dt * k3[i]
    _rhs(t + dt, work, k4, diag_v, pop, wsum, gsum, gamma_on,
         delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2, n_atoms)
    sixth = dt / 6.0
    for i in range(dim):
        psi[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def propagate_closed(psi, diag_v, pop, wsum,
                     delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2,
                     n_atoms, n_steps):
    """Integrate the closed system from t=0 to tau in n_steps RK4 steps.

    ``psi`` is updated in place; returns the maximum |1 - ||psi||^2|
    observed after any step.
    """
    dim = psi.shape[0]
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    work = np.empty(dim, dtype=np.complex128)
    gsum = np.zeros(dim, dtype=np.float64)
    dt = tau / n_steps
    drift = 0.0
    for step in range(n_steps):
        t = step * dt
        _rk4_step(t, dt, psi, k1, k2, k3, k4, work, diag_v, pop, wsum, gsum, False,
                  delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2, n_atoms)
        nrm2 = 0.0
        for i in range(dim):
            nrm2 += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
        dev = abs(1.0 - nrm2)
        if dev > drift:
            drift = dev
    return drift


@njit(cache=True)
def propagate_jump_trajectory(psi, diag_v, pop, wsum, gsum, gammas, uniforms,
                              delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2,
                              n_atoms, n_steps):
    """One Monte Carlo wave-function trajectory under the effective
    non-Hermitian Hamiltonian with projector jump channels.

    A jump fires when the decaying squared norm crosses the current uniform
    threshold; the channel is drawn proportionally to (gamma_k/2) <n_k>, the
    state is projected onto "atom k excited" and renormalized, and a fresh
    threshold is drawn.  ``psi`` holds the (unnormalized) final state.

    Returns (consumed, n_jumps); consumed = -1 signals that the uniform pool
    ran out and the caller must retry this trajectory with a larger pool.
    """
    dim = psi.shape[0]
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    work = np.empty(dim, dtype=np.complex128)
    weights = np.empty(n_atoms, dtype=np.float64)
    dt = tau / n_steps
    ptr = 0
    n_jumps = 0
    if ptr >= uniforms.shape[0]:
        return -1, n_jumps
    r = uniforms[ptr]
    ptr += 1
    for step in range(n_steps):
        t = step * dt
        _rk4_step(t, dt, psi, k1, k2, k3, k4, work, diag_v, pop, wsum, gsum, True,
                  delta0, omega0, tf1, tf2, tau, alpha_d, inv_sin2, n_atoms)
        nrm2 = 0.0
        for i in range(dim):
            nrm2 += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
        if nrm2 < r:
            total = 0.0
            for k in range(n_atoms):
                wk = 0.0
                for i in range(dim):
                    if (i >> k) & 1:
                        wk += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
                weights[k] = 0.5 * gammas[k] * wk
                total += weights[k]
            if total <= 0.0:
                # no excited population, so the norm cannot have decayed
                # through dissipation; treat as a spurious crossing
                if ptr >= uniforms.shape[0]:
                    return -1, n_jumps
                r = nrm2 * uniforms[ptr]
                ptr += 1
                continue
            if ptr + 1 >= uniforms.shape[0]:
                return -1, n_jumps
            u = uniforms[ptr] * total
            ptr += 1
            channel = n_atoms - 1
            acc = 0.0
            for k in range(n_atoms):
                acc += weights[k]
                if u < acc:
                    channel = k
                    break
            proj2 = 0.0
            for i in range(dim):
                if (i >> channel) & 1:
                    proj2 += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
                else:
                    psi[i] = 0.0
            inv = 1.0 / np.sqrt(proj2)
            for i in range(dim):
                psi[i] *= inv
            n_jumps += 1
            r = uniforms[ptr]
            ptr += 1
    return ptr, n_jumps
