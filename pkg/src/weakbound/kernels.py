"""Inner loops shared by the solvers.

Every kernel exists twice: a loop version that numba compiles (``*_nb``) and a
numpy fallback (``*_np``).  The public name is bound to whichever backend is
active (see :mod:`weakbound._backend`).  Both versions take and return plain
float64/int64 arrays so they can be compared directly in tests and benchmarks.
"""

import numpy as np

from ._backend import HAS_NUMBA, njit

# -- Sturm sequence counts -------------------------------------------------


def _sturm_counts_loop(d, e2, shifts, pivmin):
    n = d.shape[0]
    out = np.empty(shifts.shape[0], dtype=np.int64)
    for k in range(shifts.shape[0]):
        x = shifts[k]
        cnt = 0
        q = d[0] - x
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            cnt += 1
        for i in range(1, n):
            q = (d[i] - x) - e2[i - 1] / q
            if abs(q) < pivmin:
                q = -pivmin
            if q < 0.0:
                cnt += 1
        out[k] = cnt
    return out


def _sturm_counts_np(d, e2, shifts, pivmin):
    """Vectorised over shifts; the recurrence itself runs in Python."""
    q = d[0] - shifts
    q[np.abs(q) < pivmin] = -pivmin
    cnt = (q < 0.0).astype(np.int64)
    for i in range(1, d.shape[0]):
        q = (d[i] - shifts) - e2[i - 1] / q
        q[np.abs(q) < pivmin] = -pivmin
        cnt += q < 0.0
    return cnt


# -- tridiagonal solve with partial pivoting --------------------------------


def _tridiag_solve_loop(d, e, rhs, tiny):
    # Solves T x = rhs for symmetric tridiagonal T = (d, e); LAPACK gtsv layout.
    n = d.shape[0]
    dd = d.copy()
    du = e.copy()
    dl = e.copy()
    du2 = np.zeros(max(n - 2, 0))
    b = rhs.copy()
    for i in range(n - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if abs(dd[i]) < tiny:
                dd[i] = tiny
            fact = dl[i] / dd[i]
            dd[i + 1] -= fact * du[i]
            b[i + 1] -= fact * b[i]
        else:
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            temp = dd[i + 1]
            dd[i + 1] = du[i] - fact * temp
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du2[i]
            du[i] = temp
            temp = b[i]
            b[i] = b[i + 1]
            b[i + 1] = temp - fact * b[i + 1]
    if abs(dd[n - 1]) < tiny:
        dd[n - 1] = tiny
    b[n - 1] /= dd[n - 1]
    if n > 1:
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / dd[n - 2]
    for i in range(n - 3, -1, -1):
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / dd[i]
    return b


def _tridiag_solve_np(d, e, rhs, tiny):
    # No vectorised form exists for the elimination; Python floats beat
    # per-element numpy indexing by an order of magnitude here.
    n = d.shape[0]
    dd = d.tolist()
    du = e.tolist()
    dl = e.tolist()
    du2 = [0.0] * max(n - 2, 0)
    b = rhs.tolist()
    for i in range(n - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if abs(dd[i]) < tiny:
                dd[i] = tiny
            fact = dl[i] / dd[i]
            dd[i + 1] -= fact * du[i]
            b[i + 1] -= fact * b[i]
        else:
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            temp = dd[i + 1]
            dd[i + 1] = du[i] - fact * temp
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du2[i]
            du[i] = temp
            temp = b[i]
            b[i] = b[i + 1]
            b[i + 1] = temp - fact * b[i + 1]
    if abs(dd[n - 1]) < tiny:
        dd[n - 1] = tiny
    b[n - 1] /= dd[n - 1]
    if n > 1:
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / dd[n - 2]
    for i in range(n - 3, -1, -1):
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / dd[i]
    return np.array(b)


# -- Neumann Green's function ------------------------------------------------
#
# On a uniform grid the kernel factorises as
#     G_ij = c * U[min(i,j)] * W[max(i,j)] * r**|i-j|,   r = exp(-kappa*h),
# which gives an O(n) matvec through two geometric scans.


def _green_apply_loop(U, W, r, x):
    n = x.shape[0]
    y = np.empty(n)
    p = 0.0
    for i in range(n):
        p = r * p + U[i] * x[i]
        y[i] = W[i] * p
    q = 0.0
    for i in range(n - 1, -1, -1):
        y[i] += U[i] * q
        q = r * (q + W[i] * x[i])
    return y


def _green_apply_np(U, W, r, x):
    Ux = (U * x).tolist()
    Wx = (W * x).tolist()
    n = len(Ux)
    fwd = [0.0] * n
    bwd = [0.0] * n
    p = 0.0
    for i in range(n):
        p = r * p + Ux[i]
        fwd[i] = p
    q = 0.0
    for i in range(n - 1, -1, -1):
        bwd[i] = q
        q = r * (q + Wx[i])
    return W * np.array(fwd) + U * np.array(bwd)


def _green_dense_loop(x, U, W, kappa, c):
    n = x.shape[0]
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i + 1):
            g = c * U[j] * W[i] * np.exp(-kappa * (x[i] - x[j]))
            G[i, j] = g
            G[j, i] = g
    return G


def _green_dense_np(x, U, W, kappa, c):
    upper = np.triu(np.ones((x.shape[0], x.shape[0]), dtype=bool))
    # row i, col j with i <= j: U[i] W[j]; otherwise U[j] W[i]
    prod = np.where(upper, np.outer(U, W), np.outer(W, U))
    return c * prod * np.exp(-kappa * np.abs(x[:, None] - x[None, :]))


# -- 2-D Neumann stiffness (Kronecker sum) ------------------------------------


def _stencil2d_loop(u, mx, my, ihx2, ihy2):
    ny, nx = u.shape
    out = np.zeros((ny, nx))
    for j in range(ny):
        for i in range(nx - 1):
            g = (u[j, i + 1] - u[j, i]) * ihx2 * my[j]
            out[j, i] -= g
            out[j, i + 1] += g
    for j in range(ny - 1):
        for i in range(nx):
            g = (u[j + 1, i] - u[j, i]) * ihy2 * mx[i]
            out[j, i] -= g
            out[j + 1, i] += g
    return out


def _stencil2d_np(u, mx, my, ihx2, ihy2):
    out = np.zeros_like(u)
    gx = np.diff(u, axis=1) * (ihx2 * my[:, None])
    out[:, :-1] -= gx
    out[:, 1:] += gx
    gy = np.diff(u, axis=0) * (ihy2 * mx[None, :])
    out[:-1, :] -= gy
    out[1:, :] += gy
    return out


_sturm_counts_nb = njit(_sturm_counts_loop)
_tridiag_solve_nb = njit(_tridiag_solve_loop)
_green_apply_nb = njit(_green_apply_loop)
_green_dense_nb = njit(_green_dense_loop)
_stencil2d_nb = njit(_stencil2d_loop)

if HAS_NUMBA:
    sturm_counts = _sturm_counts_nb
    tridiag_solve = _tridiag_solve_nb
    green_apply = _green_apply_nb
    green_dense = _green_dense_nb
    stencil2d = _stencil2d_nb
    # one shift per interval: a compiled count is cheap enough for bisection
    SHIFTS_PER_SWEEP = 1
else:
    sturm_counts = _sturm_counts_np
    tridiag_solve = _tridiag_solve_np
    green_apply = _green_apply_np
    green_dense = _green_dense_np
    stencil2d = _stencil2d_np
    # the Python-level loop over n dominates, so refine 8 bits per sweep
    SHIFTS_PER_SWEEP = 255


def warmup():
    """Trigger JIT compilation on tiny inputs (no-op without numba)."""
    if not HAS_NUMBA:
        return
    d = np.array([2.0, 2.0, 2.0])
    e = np.array([-1.0, -1.0])
    sturm_counts(d, e * e, np.array([0.5]), 1e-300)
    tridiag_solve(d, e, np.ones(3), 1e-300)
    green_apply(np.ones(3), np.ones(3), 0.5, np.ones(3))
    green_dense(np.arange(3.0), np.ones(3), np.ones(3), 1.0, 1.0)
    stencil2d(np.ones((3, 3)), np.ones(3), np.ones(3), 1.0, 1.0)
