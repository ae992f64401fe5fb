"""Power series in u = x^2 for the elementary ladder propagator.

``exp(-i h (diag(a, b, d) + x M))`` is analytic in ``x`` and has definite
parity entry by entry, so every matrix element is ``S(u)`` or ``x S(u)``
for a power series ``S``. The series are built once per (diag, h) with
truncated series arithmetic; evaluation is then a Horner sweep that
vectorizes across many factors.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

ORDER = 12
# radius of convergence is ~0.7 gap in x; stay well inside it
RADIUS_FRACTION = 0.1

# upper-triangle entries of the complex-symmetric propagator, in storage order
ENTRIES = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _mul(p, q, k):
    return np.convolve(p, q)[: k + 1]


def _div(p, q, k):
    r = np.zeros(k + 1, dtype=np.result_type(p, q))
    for n in range(k + 1):
        r[n] = (p[n] - np.dot(q[1: n + 1], r[n - 1:: -1][:n])) / q[0]
    return r


def _const(c, k):
    z = np.zeros(k + 1)
    z[0] = c
    return z


def _shift(p):
    return np.concatenate([p[1:], [0.0]])


def _delta(gap1, gap2, k):
    # eigenvalue shift of a diagonal entry: delta = -u (g2 - delta) / ((g1 - delta)(g2 - delta) - u)
    u = _const(0.0, k)
    u[1] = 1.0
    d = np.zeros(k + 1)
    for _ in range(k + 2):
        num = -_mul(u, _const(gap2, k) - d, k)
        den = _mul(_const(gap1, k) - d, _const(gap2, k) - d, k) - u
        d = _div(num, den, k)
    return d


def _invsqrt(q, k):
    r = _const(q[0] ** -0.5, k)
    for _ in range(2 * k.bit_length() + 2):
        r = 0.5 * _mul(r, 3 * _const(1.0, k) - _mul(q, _mul(r, r, k), k), k)
    return r


def _expi(d, h, k):
    # exp(-i h d(u)) with d(0) = 0, from n E_n = -i h sum_m m d_m E_{n-m}
    e = np.zeros(k + 1, dtype=complex)
    e[0] = 1.0
    for n in range(1, k + 1):
        e[n] = -1j * h * sum(m * d[m] * e[n - m] for m in range(1, n + 1)) / n
    return e


@lru_cache(maxsize=32)
def propagator_series(a: float, b: float, d: float, h: float, order: int = ORDER):
    """Series coefficients of the six independent propagator entries.

    Returns
    -------
    coef : ndarray, shape (order + 1, 12)
        Column ``r`` (``r < 6``) is the real part of entry ``ENTRIES[r]``,
        column ``r + 6`` its imaginary part. Entries (0, 1) and (1, 2) carry
        an extra factor ``x``.
    x_max : float
        Largest ``|x|`` for which the truncated series is exact to rounding.
    """
    k = order
    one = _const(1.0, k)
    u = _const(0.0, k)
    u[1] = 1.0
    da = _delta(b - a, d - a, k)
    dd = _delta(b - d, a - d, k)
    db = -(da + dd)
    # unnormalized eigenvectors (1, x sa, ta), (x q0, 1, x q2), (td, x sd, 1)
    sa = _shift(da)
    ta = _div(da, da - _const(d - a, k), k)
    ra = _invsqrt(one + _mul(u, _mul(sa, sa, k), k) + _mul(ta, ta, k), k)
    q0 = _div(one, _const(b - a, k) + db, k)
    q2 = _div(one, _const(b - d, k) + db, k)
    rb = _invsqrt(one + _mul(u, _mul(q0, q0, k) + _mul(q2, q2, k), k), k)
    sd = _shift(dd)
    td = _div(dd, dd + _const(d - a, k), k)
    rd = _invsqrt(one + _mul(u, _mul(sd, sd, k), k) + _mul(td, td, k), k)
    vec = [[ra, _mul(q0, rb, k), _mul(td, rd, k)],
           [_mul(sa, ra, k), rb, _mul(sd, rd, k)],
           [_mul(ta, ra, k), _mul(q2, rb, k), rd]]
    ph = [np.exp(-1j * a * h) * _expi(da, h, k),
          np.exp(-1j * b * h) * _expi(db, h, k),
          np.exp(-1j * d * h) * _expi(dd, h, k)]
    coef = np.empty((k + 1, 12))
    for r, (i, j) in enumerate(ENTRIES):
        s = np.zeros(k + 1, dtype=complex)
        for m in range(3):
            t = _mul(_mul(vec[i][m], vec[j][m], k), ph[m], k)
            if (i == 1) != (m == 1) and (j == 1) != (m == 1):
                t = _mul(u, t, k)
            s += t
        coef[:, r] = s.real
        coef[:, r + 6] = s.imag
    coef.flags.writeable = False
    gap = min(b - a, d - b)
    return coef, RADIUS_FRACTION * gap
