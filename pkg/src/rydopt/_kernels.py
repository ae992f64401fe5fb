"""Compiled inner loops for ladder propagation.

Each elementary factor is ``exp(-i h (diag(a, b, d) + x M))`` with ``M`` the
nearest-neighbour coupling pattern. The eigenproblem is solved in closed form
by a shifted fixed-point iteration: every eigenvalue is written as
``D_k + delta_k`` and ``delta_k`` is computed directly, which keeps the
eigenvectors orthogonal to machine precision even when ``x`` crosses zero.

The propagation loop itself evaluates whole blocks of factors from the power
series of :mod:`rydopt._series` and only falls back to the eigen-decomposition
for couplings outside the series' safe radius.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_FIXED_POINT_ITERS = 8


@njit(cache=True, nogil=True, error_model="numpy")
def eig_ladder(a, b, d, x, lam, V):
    """Eigen-decomposition of [[a, x, 0], [x, b, x], [0, x, d]] for a < b < d.

    Writes eigenvalues to ``lam`` and eigenvectors (columns) to ``V``.
    """
    gap = min(b - a, d - b)
    if x == 0.0:
        lam[0] = a
        lam[1] = b
        lam[2] = d
        for i in range(3):
            for j in range(3):
                V[i, j] = 1.0 if i == j else 0.0
        return
    if abs(x) > 0.05 * gap:
        T = np.zeros((3, 3))
        T[0, 0] = a
        T[1, 1] = b
        T[2, 2] = d
        T[0, 1] = x
        T[1, 0] = x
        T[1, 2] = x
        T[2, 1] = x
        w, v = np.linalg.eigh(T)
        for i in range(3):
            lam[i] = w[i]
            for j in range(3):
                V[i, j] = v[i, j]
        return
    x2 = x * x
    # each update contracts by ~(x/gap)^2
    da = 0.0
    for _ in range(_FIXED_POINT_ITERS):
        nxt = -x2 * (d - a - da) / ((b - a - da) * (d - a - da) - x2)
        if abs(nxt - da) <= 1e-17 * abs(nxt):
            da = nxt
            break
        da = nxt
    dd = 0.0
    for _ in range(_FIXED_POINT_ITERS):
        nxt = -x2 * (a - d - dd) / ((a - d - dd) * (b - d - dd) - x2)
        if abs(nxt - dd) <= 1e-17 * abs(nxt):
            dd = nxt
            break
        dd = nxt
    # the trace is invariant
    db = -(da + dd)
    lam[0] = a + da
    lam[1] = b + db
    lam[2] = d + dd

    v0 = 1.0
    v1 = da / x
    v2 = da / (a + da - d)
    n = np.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    V[0, 0] = v0 / n
    V[1, 0] = v1 / n
    V[2, 0] = v2 / n

    v0 = x / (b + db - a)
    v1 = 1.0
    v2 = x / (b + db - d)
    n = np.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    V[0, 1] = v0 / n
    V[1, 1] = v1 / n
    V[2, 1] = v2 / n

    v0 = dd / (d + dd - a)
    v1 = dd / x
    v2 = 1.0
    n = np.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    V[0, 2] = v0 / n
    V[1, 2] = v1 / n
    V[2, 2] = v2 / n


@njit(cache=True, nogil=True, error_model="numpy")
def _small_exp(z):
    # exp(-i z) for |z| < 1e-3 by Taylor series, exact to rounding
    iz = -1j * z
    return 1.0 + iz * (1.0 + iz * (0.5 + iz * (1.0 / 6.0 + iz * (1.0 / 24.0 + iz / 120.0))))


@njit(cache=True, nogil=True, error_model="numpy")
def phases(diag, base, lam, h, ph, sign):
    """ph_i = exp(sign * -i lam_i h), factored as a fixed diagonal phase times a small correction."""
    for i in range(3):
        z = (lam[i] - diag[i]) * h
        if abs(z) < 1e-3:
            c = _small_exp(z)
        else:
            c = np.exp(-1j * z)
        v = base[i] * c
        ph[i] = v if sign > 0 else np.conj(v)


@njit(cache=True, nogil=True, error_model="numpy")
def base_phases(diag, h):
    out = np.empty(3, dtype=np.complex128)
    for i in range(3):
        out[i] = np.exp(-1j * diag[i] * h)
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def _apply(V, ph, psi, out):
    # out = V diag(ph) V^T psi
    p0 = (V[0, 0] * psi[0] + V[1, 0] * psi[1] + V[2, 0] * psi[2]) * ph[0]
    p1 = (V[0, 1] * psi[0] + V[1, 1] * psi[1] + V[2, 1] * psi[2]) * ph[1]
    p2 = (V[0, 2] * psi[0] + V[1, 2] * psi[1] + V[2, 2] * psi[2]) * ph[2]
    out[0] = V[0, 0] * p0 + V[0, 1] * p1 + V[0, 2] * p2
    out[1] = V[1, 0] * p0 + V[1, 1] * p1 + V[1, 2] * p2
    out[2] = V[2, 0] * p0 + V[2, 1] * p1 + V[2, 2] * p2


_BLOCK = 256


@njit(cache=True, nogil=True, error_model="numpy")
def unitary_block(coef, x_max, diag, h, base, xs, U):
    """Fill ``U[i]`` (six upper-triangle entries) for every coupling in ``xs``.

    Uses the power series in ``x^2`` where it converges and the closed-form
    eigen-decomposition elsewhere.
    """
    nb = xs.shape[0]
    nk = coef.shape[0]
    acc = np.empty((12, nb))
    u = np.empty(nb)
    for i in range(nb):
        u[i] = xs[i] * xs[i]
    for r in range(12):
        c = coef[nk - 1, r]
        for i in range(nb):
            acc[r, i] = c
    for k in range(nk - 2, -1, -1):
        for r in range(12):
            c = coef[k, r]
            for i in range(nb):
                acc[r, i] = acc[r, i] * u[i] + c
    for i in range(nb):
        x = xs[i]
        U[i, 0] = acc[0, i] + 1j * acc[6, i]
        U[i, 1] = x * (acc[1, i] + 1j * acc[7, i])
        U[i, 2] = acc[2, i] + 1j * acc[8, i]
        U[i, 3] = acc[3, i] + 1j * acc[9, i]
        U[i, 4] = x * (acc[4, i] + 1j * acc[10, i])
        U[i, 5] = acc[5, i] + 1j * acc[11, i]
    lam = np.empty(3)
    V = np.empty((3, 3))
    ph = np.empty(3, dtype=np.complex128)
    for i in range(nb):
        if abs(xs[i]) > x_max:
            eig_ladder(diag[0], diag[1], diag[2], xs[i], lam, V)
            phases(diag, base, lam, h, ph, 1)
            U[i, 0] = V[0, 0] * V[0, 0] * ph[0] + V[0, 1] * V[0, 1] * ph[1] + V[0, 2] * V[0, 2] * ph[2]
            U[i, 1] = V[0, 0] * V[1, 0] * ph[0] + V[0, 1] * V[1, 1] * ph[1] + V[0, 2] * V[1, 2] * ph[2]
            U[i, 2] = V[0, 0] * V[2, 0] * ph[0] + V[0, 1] * V[2, 1] * ph[1] + V[0, 2] * V[2, 2] * ph[2]
            U[i, 3] = V[1, 0] * V[1, 0] * ph[0] + V[1, 1] * V[1, 1] * ph[1] + V[1, 2] * V[1, 2] * ph[2]
            U[i, 4] = V[1, 0] * V[2, 0] * ph[0] + V[1, 1] * V[2, 1] * ph[1] + V[1, 2] * V[2, 2] * ph[2]
            U[i, 5] = V[2, 0] * V[2, 0] * ph[0] + V[2, 1] * V[2, 1] * ph[1] + V[2, 2] * V[2, 2] * ph[2]


@njit(cache=True, nogil=True, error_model="numpy")
def _run(coef, x_max, diag, h, X, psi0, pops, states):
    n_int, n_fac = X.shape
    xf = X.ravel()
    n_tot = n_int * n_fac
    base = base_phases(diag, h)
    U = np.empty((_BLOCK, 6), dtype=np.complex128)
    p0 = psi0[0]
    p1 = psi0[1]
    p2 = psi0[2]
    rec_pops = pops.shape[0] == n_int + 1
    rec_states = states.shape[0] == n_int + 1
    if rec_pops:
        pops[0, 0] = p0.real ** 2 + p0.imag ** 2
        pops[0, 1] = p1.real ** 2 + p1.imag ** 2
        pops[0, 2] = p2.real ** 2 + p2.imag ** 2
    if rec_states:
        states[0, 0] = p0
        states[0, 1] = p1
        states[0, 2] = p2
    for s in range(0, n_tot, _BLOCK):
        e = min(s + _BLOCK, n_tot)
        unitary_block(coef, x_max, diag, h, base, xf[s:e], U)
        for i in range(e - s):
            q0 = U[i, 0] * p0 + U[i, 1] * p1 + U[i, 2] * p2
            q1 = U[i, 1] * p0 + U[i, 3] * p1 + U[i, 4] * p2
            q2 = U[i, 2] * p0 + U[i, 4] * p1 + U[i, 5] * p2
            p0 = q0
            p1 = q1
            p2 = q2
            if (rec_pops or rec_states) and (s + i + 1) % n_fac == 0:
                j = (s + i + 1) // n_fac
                if rec_pops:
                    pops[j, 0] = p0.real ** 2 + p0.imag ** 2
                    pops[j, 1] = p1.real ** 2 + p1.imag ** 2
                    pops[j, 2] = p2.real ** 2 + p2.imag ** 2
                if rec_states:
                    states[j, 0] = p0
                    states[j, 1] = p1
                    states[j, 2] = p2
    out = np.empty(3, dtype=np.complex128)
    out[0] = p0
    out[1] = p1
    out[2] = p2
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def propagate(coef, x_max, diag, h, X, psi0, pops):
    """Apply all factors row by row; ``X[j, k]`` is the coupling of factor k in interval j.

    If ``pops`` has ``X.shape[0] + 1`` rows the populations after every interval
    are written to it. Returns the final state.
    """
    return _run(coef, x_max, diag, h, X, psi0, pops, np.empty((0, 3), dtype=np.complex128))


@njit(cache=True, nogil=True, error_model="numpy")
def propagate_states(coef, x_max, diag, h, X, psi0):
    """State after every interval, shape ``(X.shape[0] + 1, 3)``."""
    states = np.empty((X.shape[0] + 1, 3), dtype=np.complex128)
    _run(coef, x_max, diag, h, X, psi0, np.empty((0, 3)), states)
    return states


@njit(cache=True, nogil=True, error_model="numpy")
def propagate_many(coef, x_max, diag, h, X, psi0):
    """Final states for a batch of coupling tables ``X[r]`` (one per realization)."""
    n_real = X.shape[0]
    out = np.empty((n_real, 3), dtype=np.complex128)
    dummy = np.empty((0, 3))
    for r in range(n_real):
        out[r] = propagate(coef, x_max, diag, h, X[r], psi0, dummy)
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def fidelity_gradient(coef, x_max, diag, h, X, psi0, target):
    """F = |<target|psi(T)>|^2 and its exact derivative with respect to every ``X[j, k]``."""
    n_int, n_fac = X.shape
    a, b, d = diag[0], diag[1], diag[2]
    lam = np.empty(3)
    V = np.empty((3, 3))
    ph = np.empty(3, dtype=np.complex128)
    tmp = np.empty(3, dtype=np.complex128)
    dummy = np.empty((0, 3))
    psi = propagate(coef, x_max, diag, h, X, psi0, dummy)
    amp = np.conj(target[0]) * psi[0] + np.conj(target[1]) * psi[1] + np.conj(target[2]) * psi[2]
    F = amp.real ** 2 + amp.imag ** 2
    chi = target.astype(np.complex128).copy()
    base = base_phases(diag, h)
    grad = np.empty((n_int, n_fac))
    Gam = np.empty((3, 3), dtype=np.complex128)
    W = np.empty((3, 3))
    q = np.empty(3, dtype=np.complex128)
    pp = np.empty(3, dtype=np.complex128)
    for j in range(n_int - 1, -1, -1):
        for k in range(n_fac - 1, -1, -1):
            eig_ladder(a, b, d, X[j, k], lam, V)
            # step psi back: psi_{k-1} = U^dagger psi_k
            phases(diag, base, lam, h, ph, -1)
            _apply(V, ph, psi, tmp)
            psi[0] = tmp[0]
            psi[1] = tmp[1]
            psi[2] = tmp[2]
            for i in range(3):
                ph[i] = np.conj(ph[i])
            for m in range(3):
                q[m] = V[0, m] * chi[0] + V[1, m] * chi[1] + V[2, m] * chi[2]
                pp[m] = V[0, m] * psi[0] + V[1, m] * psi[1] + V[2, m] * psi[2]
            # W = V^T M V with M = [[0,1,0],[1,0,1],[0,1,0]]
            for m in range(3):
                for n in range(3):
                    W[m, n] = (V[0, m] * V[1, n] + V[1, m] * V[0, n]
                               + V[1, m] * V[2, n] + V[2, m] * V[1, n])
            for m in range(3):
                for n in range(3):
                    if m == n:
                        Gam[m, n] = -1j * h * ph[m]
                    else:
                        Gam[m, n] = (ph[m] - ph[n]) / (lam[m] - lam[n])
            damp = 0.0 + 0.0j
            for m in range(3):
                for n in range(3):
                    damp += np.conj(q[m]) * Gam[m, n] * W[m, n] * pp[n]
            grad[j, k] = 2.0 * (np.conj(amp) * damp).real
            # step costate back: chi_{k-1} = U^dagger chi_k
            for i in range(3):
                ph[i] = np.conj(ph[i])
            _apply(V, ph, chi, tmp)
            chi[0] = tmp[0]
            chi[1] = tmp[1]
            chi[2] = tmp[2]
    return F, grad
