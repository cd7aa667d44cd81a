"""Hot loops, each with an njit version and a vectorized numpy version.

The public names (``orth_into``, ``tri_sylvester``, ``stencil_triplets``)
resolve to one or the other depending on ``H2MOR_DISABLE_NUMBA``.
"""

import numpy as np
import scipy.linalg as spla

from ._accel import NUMBA_ENABLED, njit


# -- Gram-Schmidt with reorthogonalization -----------------------------------

def _orth_into_loop(Q, k0, M, tol):
    n, m = M.shape
    k = k0
    kept = np.zeros(m, dtype=np.bool_)
    v = np.empty(n, dtype=Q.dtype)
    h = np.empty(Q.shape[1], dtype=Q.dtype)
    for j in range(m):
        nrm0 = 0.0
        for t in range(n):
            v[t] = M[t, j]
            nrm0 += abs(M[t, j]) ** 2
        nrm0 = np.sqrt(nrm0)
        if nrm0 == 0.0:
            continue
        # classical Gram-Schmidt, twice; rows of Q are contiguous
        for _sweep in range(2):
            h[:k] = 0
            for t in range(n):
                vt = v[t]
                for i in range(k):
                    h[i] += np.conj(Q[t, i]) * vt
            for t in range(n):
                acc = v[t]
                for i in range(k):
                    acc -= Q[t, i] * h[i]
                v[t] = acc
        nrm = 0.0
        for t in range(n):
            nrm += abs(v[t]) ** 2
        nrm = np.sqrt(nrm)
        if nrm <= tol * nrm0:
            continue
        for t in range(n):
            Q[t, k] = v[t] / nrm
        kept[j] = True
        k += 1
    return k, kept


def _orth_into_numpy(Q, k0, M, tol):
    m = M.shape[1]
    k = k0
    kept = np.zeros(m, dtype=np.bool_)
    for j in range(m):
        v = M[:, j].astype(Q.dtype, copy=True)
        nrm0 = np.linalg.norm(v)
        if nrm0 == 0.0:
            continue
        for _sweep in range(2):
            Qk = Q[:, :k]
            v -= Qk @ (Qk.conj().T @ v)
        nrm = np.linalg.norm(v)
        if nrm <= tol * nrm0:
            continue
        Q[:, k] = v / nrm
        kept[j] = True
        k += 1
    return k, kept


_orth_into_numba = njit(_orth_into_loop)
_ORTH_NUMBA_MAX = 20000


def orth_into(Q, k0, M, tol):
    """Orthonormalize columns of `M` into ``Q[:, k0:]`` against ``Q[:, :k0]``.

    `Q` must be preallocated with at least ``k0 + M.shape[1]`` columns and the
    same dtype as the result. Returns the new column count and a boolean mask
    of the retained columns of `M`.
    """
    M = np.ascontiguousarray(M, dtype=Q.dtype)
    # on tall bases the BLAS-2 sweeps of the numpy path are faster
    if NUMBA_ENABLED and Q.shape[0] * Q.shape[1] <= _ORTH_NUMBA_MAX:
        return _orth_into_numba(Q, k0, M, float(tol))
    return _orth_into_numpy(Q, k0, M, tol)


# -- triangular Sylvester (Bartels-Stewart back substitution) ----------------

def _tri_sylvester_loop(T, S, R):
    m = T.shape[0]
    k = S.shape[0]
    Y = np.zeros((m, k), dtype=np.complex128)
    rhs = np.empty(m, dtype=np.complex128)
    for j in range(k):
        for i in range(m):
            acc = R[i, j]
            for l in range(j):
                acc -= Y[i, l] * S[l, j]
            rhs[i] = acc
        shift = S[j, j]
        for i in range(m - 1, -1, -1):
            acc = rhs[i]
            for l in range(i + 1, m):
                acc -= T[i, l] * Y[l, j]
            Y[i, j] = acc / (T[i, i] + shift)
    return Y


def _tri_sylvester_numpy(T, S, R):
    m = T.shape[0]
    k = S.shape[0]
    Y = np.zeros((m, k), dtype=np.complex128)
    eye = np.eye(m)
    for j in range(k):
        rhs = R[:, j] - Y[:, :j] @ S[:j, j]
        Y[:, j] = spla.solve_triangular(T + S[j, j] * eye, rhs)
    return Y


_tri_sylvester_numba = njit(_tri_sylvester_loop)


def tri_sylvester(T, S, R):
    """Solve ``T Y + Y S = R`` with `T`, `S` upper triangular (complex)."""
    T = np.ascontiguousarray(T, dtype=np.complex128)
    S = np.ascontiguousarray(S, dtype=np.complex128)
    R = np.ascontiguousarray(R, dtype=np.complex128)
    if NUMBA_ENABLED:
        return _tri_sylvester_numba(T, S, R)
    return _tri_sylvester_numpy(T, S, R)


# -- 7-point stencil assembly -------------------------------------------------

def _stencil_triplets_loop(weights, nx, ny, nz):
    # weights: (7, nz, ny, nx) for center, west, east, south, north, down, up
    n = nx * ny * nz
    cap = 7 * n
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap, dtype=np.float64)
    p = 0
    for kz in range(nz):
        for jy in range(ny):
            for ix in range(nx):
                row = ix + nx * (jy + ny * kz)
                rows[p] = row
                cols[p] = row
                vals[p] = weights[0, kz, jy, ix]
                p += 1
                if ix > 0:
                    rows[p] = row
                    cols[p] = row - 1
                    vals[p] = weights[1, kz, jy, ix]
                    p += 1
                if ix < nx - 1:
                    rows[p] = row
                    cols[p] = row + 1
                    vals[p] = weights[2, kz, jy, ix]
                    p += 1
                if jy > 0:
                    rows[p] = row
                    cols[p] = row - nx
                    vals[p] = weights[3, kz, jy, ix]
                    p += 1
                if jy < ny - 1:
                    rows[p] = row
                    cols[p] = row + nx
                    vals[p] = weights[4, kz, jy, ix]
                    p += 1
                if kz > 0:
                    rows[p] = row
                    cols[p] = row - nx * ny
                    vals[p] = weights[5, kz, jy, ix]
                    p += 1
                if kz < nz - 1:
                    rows[p] = row
                    cols[p] = row + nx * ny
                    vals[p] = weights[6, kz, jy, ix]
                    p += 1
    return rows[:p], cols[:p], vals[:p]


def _stencil_triplets_numpy(weights, nx, ny, nz):
    kz, jy, ix = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    row = ix + nx * (jy + ny * kz)
    offsets = (0, -1, 1, -nx, nx, -nx * ny, nx * ny)
    masks = (
        np.ones_like(ix, dtype=bool),
        ix > 0,
        ix < nx - 1,
        jy > 0,
        jy < ny - 1,
        kz > 0,
        kz < nz - 1,
    )
    rows, cols, vals = [], [], []
    for d in range(7):
        mask = masks[d]
        rows.append(row[mask])
        cols.append(row[mask] + offsets[d])
        vals.append(weights[d][mask])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


_stencil_triplets_numba = njit(_stencil_triplets_loop)


def stencil_triplets(weights, nx, ny, nz):
    """COO triplets of a 7-point stencil on an ``nx*ny*nz`` grid, x fastest.

    Neighbors outside the grid are dropped (zero Dirichlet boundary).
    """
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if NUMBA_ENABLED:
        return _stencil_triplets_numba(weights, nx, ny, nz)
    return _stencil_triplets_numpy(weights, nx, ny, nz)
