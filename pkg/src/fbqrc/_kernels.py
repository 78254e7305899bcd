"""Compiled inner loops for the vectorized master equations.

Density matrices are row-major vectorized (``v[j*d + k] = rho[j, k]``) and
Liouvillians are CSR matrices given as ``(indptr, indices, data)`` triples.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def csr_matvec(indptr, indices, data, x, out):
    for i in range(indptr.size - 1):
        acc = 0j
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc


@njit(cache=True)
def _rk4_step(indptr, indices, data, v, h, k, y):
    # Classical RK4 on a linear autonomous system equals the degree-4 Taylor
    # polynomial of exp(hL); Horner form needs one work vector.
    n = v.size
    csr_matvec(indptr, indices, data, v, k)
    for i in range(n):
        y[i] = v[i] + (h / 4.0) * k[i]
    csr_matvec(indptr, indices, data, y, k)
    for i in range(n):
        y[i] = v[i] + (h / 3.0) * k[i]
    csr_matvec(indptr, indices, data, y, k)
    for i in range(n):
        y[i] = v[i] + (h / 2.0) * k[i]
    csr_matvec(indptr, indices, data, y, k)
    for i in range(n):
        v[i] += h * k[i]


@njit(cache=True)
def rk4_interval(indptr, indices, data, v, h, nsub):
    """Advance ``v`` in place by ``nsub`` RK4 steps of size ``h``."""
    k = np.empty_like(v)
    y = np.empty_like(v)
    for _ in range(nsub):
        _rk4_step(indptr, indices, data, v, h, k, y)


@njit(cache=True)
def _trace(v, d):
    tr = 0.0
    for j in range(d):
        tr += v[j * d + j].real
    return tr


@njit(cache=True)
def sme_interval(indptr, indices, data, g_indptr, g_indices, g_data, m_rows, obs_scale,
                 v, dw, h, d):
    """Advance one conditional state over ``dw.shape[0]`` substeps.

    ``g_*`` is the CSR of the stacked measurement maps ``rho -> a rho + rho a^dag``
    (shape ``(C*n, n)``); ``m_rows[c] . v`` is ``Tr[(a_c + a_c^dag) rho]``.
    Euler-Maruyama in both drift and noise.  Returns the substep-averaged
    records ``<O_c> + dW_c / h``.
    """
    n = v.size
    n_ch = m_rows.shape[0]
    nsub = dw.shape[0]
    k = np.empty(n, np.complex128)
    gv = np.empty(n_ch * n, np.complex128)
    noise = np.empty(n, np.complex128)
    expect = np.empty(n_ch)
    records = np.zeros(n_ch)
    for s in range(nsub):
        tr = _trace(v, d)
        for c in range(n_ch):
            acc = 0j
            for i in range(n):
                acc += m_rows[c, i] * v[i]
            expect[c] = acc.real / tr
            records[c] += expect[c] / obs_scale[c] + dw[s, c] / h
        csr_matvec(g_indptr, g_indices, g_data, v, gv)
        for i in range(n):
            noise[i] = 0j
        for c in range(n_ch):
            w = dw[s, c]
            if w == 0.0:
                continue
            off = c * n
            e = expect[c]
            for i in range(n):
                noise[i] += w * (gv[off + i] - e * v[i])
        csr_matvec(indptr, indices, data, v, k)
        for i in range(n):
            v[i] += h * k[i]
        for i in range(n):
            v[i] += noise[i]
    for c in range(n_ch):
        records[c] /= nsub
    return records


@njit(cache=True)
def _matmul(A, B, out):
    d = A.shape[0]
    for i in range(d):
        for j in range(d):
            out[i, j] = 0j
        for k in range(d):
            a = A[i, k]
            if a == 0j:
                continue
            for j in range(d):
                out[i, j] += a * B[k, j]


@njit(cache=True)
def kraus_interval(E, Ls, Xs, Q, obs_scale, rho, dw, h):
    """Positivity-preserving homodyne update over ``dw.shape[0]`` substeps.

    Each substep maps ``rho -> K rho K^dag / Tr`` with ``K = B E``,
    ``E = exp(-i H_eff h)`` and ``B = I + S + S^2/2 - h Q/2`` where
    ``S = sum_c L_c dY_c``, ``dY_c = <L_c + L_c^dag> h + dW_c`` and
    ``Q = sum_c L_c^2``.  ``Xs[c] = L_c + L_c^dag``.  ``rho`` is updated in
    place; returns the substep-averaged records ``<O_c> + dW_c / h``.
    """
    d = rho.shape[0]
    n_ch = Ls.shape[0]
    nsub = dw.shape[0]
    S = np.empty((d, d), np.complex128)
    B = np.empty((d, d), np.complex128)
    K = np.empty((d, d), np.complex128)
    T = np.empty((d, d), np.complex128)
    expect = np.empty(n_ch)
    records = np.zeros(n_ch)
    for s in range(nsub):
        for c in range(n_ch):
            acc = 0j
            for i in range(d):
                for j in range(d):
                    acc += Xs[c, i, j] * rho[j, i]
            expect[c] = acc.real
            records[c] += expect[c] / obs_scale[c] + dw[s, c] / h
        for i in range(d):
            for j in range(d):
                S[i, j] = 0j
        for c in range(n_ch):
            dy = expect[c] * h + dw[s, c]
            for i in range(d):
                for j in range(d):
                    S[i, j] += dy * Ls[c, i, j]
        _matmul(S, S, B)
        for i in range(d):
            for j in range(d):
                B[i, j] = S[i, j] + 0.5 * B[i, j] - 0.5 * h * Q[i, j]
            B[i, i] += 1.0
        _matmul(B, E, K)
        _matmul(K, rho, T)
        tr = 0.0
        for i in range(d):
            for j in range(d):
                acc = 0j
                for k in range(d):
                    acc += T[i, k] * np.conj(K[j, k])
                rho[i, j] = acc
            tr += rho[i, i].real
        for i in range(d):
            for j in range(d):
                rho[i, j] /= tr
    for c in range(n_ch):
        records[c] /= nsub
    return records
