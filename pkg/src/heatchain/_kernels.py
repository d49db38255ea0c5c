"""Compiled inner loops for the Langevin integrator."""
import math

import numba
import numpy as np

EULER = 0
SPLITTING = 1


@numba.njit(cache=True, nogil=True)
def _force(q, M, lam, J, out):
    n = q.shape[0]
    for j in range(n):
        s = 0.0
        for l in range(n):
            s += J[j, l] * q[l]
        out[j] = -M[j] * q[j] + s - lam * q[j] ** 3


@numba.njit(cache=True, nogil=True)
def _accumulate(q, p, J, b, p2, q2, bond, cut, fwd):
    n = q.shape[0]
    for j in range(n):
        p2[b, j] += p[j] * p[j]
        q2[b, j] += q[j] * q[j]
    for j in range(n):
        s = 0.0
        for l in range(j + 1, n):
            s += 0.5 * J[j, l] * (q[j] - q[l]) * (p[j] + p[l])
        fwd[b, j] += s
    for j in range(n - 1):
        bond[b, j] += 0.5 * J[j, j + 1] * (q[j] - q[j + 1]) * (p[j] + p[j + 1])
        # current across the cut between j and j+1 (all pairs a <= j < c)
        s = 0.0
        for a in range(j + 1):
            for c in range(j + 1, n):
                s += 0.5 * J[a, c] * (q[a] - q[c]) * (p[a] + p[c])
        cut[b, j] += s


@numba.njit(cache=True, nogil=True)
def integrate_chunk(q, p, M, lam, zeta, temps, J, dt, scheme, noise,
                    step0, burn_in, batch_len, p2, q2, bond, cut, fwd, bad):
    """Advance ``noise.shape[0]`` steps in place.

    Returns -1 on success, otherwise the global step index at which a non-finite
    momentum appeared (the offending site is written to ``bad[0]``).
    """
    n = q.shape[0]
    nsteps = noise.shape[0]
    f = np.empty(n)
    amp = np.empty(n)
    decay = np.empty(n)
    if scheme == EULER:
        for j in range(n):
            amp[j] = math.sqrt(2.0 * zeta[j] * temps[j] * dt)
    else:
        # OBABO: exact OU half-kick, velocity Verlet, exact OU half-kick
        for j in range(n):
            decay[j] = math.exp(-0.5 * zeta[j] * dt)
            amp[j] = math.sqrt(temps[j] * (1.0 - decay[j] * decay[j]))
    _force(q, M, lam, J, f)
    nbatches = p2.shape[0]
    for k in range(nsteps):
        if scheme == EULER:
            for j in range(n):
                qj = q[j]
                q[j] = qj + p[j] * dt
                p[j] = p[j] + (f[j] - zeta[j] * p[j]) * dt + amp[j] * noise[k, j]
            _force(q, M, lam, J, f)
        else:
            for j in range(n):
                p[j] = decay[j] * p[j] + amp[j] * noise[k, j]
                p[j] += 0.5 * dt * f[j]
                q[j] += dt * p[j]
            _force(q, M, lam, J, f)
            for j in range(n):
                p[j] += 0.5 * dt * f[j]
                p[j] = decay[j] * p[j] + amp[j] * noise[k, n + j]
        for j in range(n):
            if not (math.isfinite(p[j]) and math.isfinite(q[j])):
                bad[0] = j
                return step0 + k
        g = step0 + k - burn_in
        if g >= 0:
            b = g // batch_len
            if b < nbatches:
                _accumulate(q, p, J, b, p2, q2, bond, cut, fwd)
    return -1
