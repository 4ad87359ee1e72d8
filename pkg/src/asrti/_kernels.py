"""Tight sequential recursions of the condensing layer.

These loops (state-response chain, particular step, multiplier
back-substitution) are inherently sequential over the horizon and
dominate the Python overhead of a vector-phase solve; numba compiles
them when available, otherwise the plain implementations run.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def control_response_chain(phi_x, phi_u, T):
    """Fill ``T`` with the homogeneous response of states to control steps.

    Stage rows follow ``ds_{k+1} = phi_x[k] ds_k + phi_u[k] du_k`` with
    ``ds_0 = 0``; control rows carry the identity.
    """
    N, n_x, n_u = phi_u.shape
    stride = n_x + n_u
    nu_tot = N * n_u
    S = np.zeros((n_x, nu_tot))
    for k in range(N):
        base = k * stride
        for i in range(n_x):
            for c in range(nu_tot):
                T[base + i, c] = S[i, c]
        for j in range(n_u):
            T[base + n_x + j, k * n_u + j] = 1.0
        S_new = phi_x[k] @ S
        for i in range(n_x):
            for j in range(n_u):
                S_new[i, k * n_u + j] += phi_u[k][i, j]
        S = S_new
    base = N * stride
    for i in range(n_x):
        for c in range(nu_tot):
            T[base + i, c] = S[i, c]


@njit(cache=True)
def particular_step(phi_x, eq_res, x, n_u, t):
    """State response to the residual vectors at zero control step."""
    N = phi_x.shape[0]
    n_x = phi_x.shape[1]
    stride = n_x + n_u
    ds = x - eq_res[:n_x]
    for i in range(n_x):
        t[i] = ds[i]
    for k in range(N):
        ds = phi_x[k] @ ds + eq_res[(k + 1) * n_x : (k + 2) * n_x]
        base = (k + 1) * stride
        for i in range(n_x):
            t[base + i] = ds[i]


@njit(cache=True)
def recover_multipliers(phi_x, r, n_u, lam):
    """Backward substitution through the eliminated stationarity rows."""
    N = phi_x.shape[0]
    n_x = phi_x.shape[1]
    stride = n_x + n_u
    lam_next = -r[N * stride : N * stride + n_x]
    for i in range(n_x):
        lam[N * n_x + i] = lam_next[i]
    for k in range(N - 1, 0, -1):
        lam_k = phi_x[k].T @ lam_next - r[k * stride : k * stride + n_x]
        for i in range(n_x):
            lam[k * n_x + i] = lam_k[i]
        lam_next = lam_k
    lam0 = r[:n_x] - phi_x[0].T @ lam_next
    for i in range(n_x):
        lam[i] = lam0[i]
