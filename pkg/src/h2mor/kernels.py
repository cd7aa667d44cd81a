"""Numeric primitives: shifted factorizations, orthonormalization, small dense
eigen/Sylvester solves and the smallest-eigenvalue basis used for startup."""

import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sp
import scipy.sparse.linalg as spsla

from . import _kernels
from .errors import (
    DimensionCapError,
    EigensolverError,
    EmptyBasisError,
    IllPosedSylvesterError,
    SingularPencilError,
    SingularShiftError,
)

DENSE_CAP = 2000
RANK_TOL = 1e-10
PAIR_TOL = 1e-8
_PIVOT_TOL = 1e-14


class SolveCounter:
    """Thread-safe tally of shifted linear solves (one per right-hand side)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, k):
        with self._lock:
            self._count += int(k)

    @property
    def count(self):
        with self._lock:
            return self._count

    def reset(self):
        with self._lock:
            self._count = 0


SOLVE_COUNTER = SolveCounter()


def solve_count():
    return SOLVE_COUNTER.count


def canonical_order(values):
    """Indices sorting `values` ascending by real part, then imaginary part."""
    values = np.asarray(values, dtype=complex)
    return np.lexsort((values.imag, values.real))


def is_real_matrix(M):
    if sp.issparse(M):
        return not np.iscomplexobj(M.data) or not np.any(M.data.imag)
    return not np.iscomplexobj(M) or not np.any(np.asarray(M).imag)


@dataclass(frozen=True, eq=False)
class ShiftedFactorization:
    """LU factorization of ``A - shift * E``.

    ``solve`` handles ``(A - s E) x = b`` and ``solve_adjoint`` handles
    ``(A - s E)^H x = b``. When `count` is set, every right-hand-side column
    is added to :data:`SOLVE_COUNTER` (times `weight`, see ``solve``).
    """

    shift: complex
    n: int
    cond_estimate: float
    count: bool
    _lu: object = field(repr=False)
    _sparse: bool = field(repr=False)
    _complex: bool = field(repr=False)

    def _apply(self, rhs, trans, weight):
        rhs = np.asarray(rhs)
        vec = rhs.ndim == 1
        R = rhs.reshape(self.n, -1)
        if not self._complex and np.iscomplexobj(R):
            X = self._raw(R.real, trans) + 1j * self._raw(R.imag, trans)
        else:
            dtype = complex if self._complex else float
            X = self._raw(np.asarray(R, dtype=dtype), trans)
        if self.count:
            SOLVE_COUNTER.add(weight * R.shape[1])
        return X.ravel() if vec else X

    def _raw(self, R, trans):
        if self._sparse:
            code = "N" if trans == 0 else ("H" if self._complex else "T")
            return self._lu.solve(np.ascontiguousarray(R), trans=code)
        return spla.lu_solve(self._lu, R, trans=0 if trans == 0 else 2, check_finite=False)

    def solve(self, rhs, weight=1):
        """Solve ``(A - s E) X = rhs``.

        `weight` is the number of shifted systems one column stands for: a
        single complex solve on real data also yields the solution at the
        conjugate shift, and is tallied as two.
        """
        return self._apply(rhs, 0, weight)

    def solve_adjoint(self, rhs, weight=1):
        """Solve ``(A - s E)^H X = rhs``."""
        return self._apply(rhs, 1, weight)


def factor_shifted(A, E, s, count=True):
    """Factorize ``A - s E`` (sparse LU for sparse `A`, dense LU otherwise)."""
    s = complex(s)
    cplx = s.imag != 0.0 or not (is_real_matrix(A) and is_real_matrix(E))
    sval = s if cplx else s.real
    n = A.shape[0]
    if sp.issparse(A) or sp.issparse(E):
        M = sp.csc_matrix(sp.csc_matrix(A) - sval * sp.csc_matrix(E))
        M = M.astype(complex if cplx else float)
        try:
            lu = spsla.splu(M)
        except RuntimeError as exc:
            raise SingularShiftError(s, str(exc)) from None
        diag = np.abs(lu.U.diagonal())
        sparse = True
    else:
        M = np.asarray(A, dtype=complex if cplx else float) - sval * np.asarray(E)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", spla.LinAlgWarning)
            lu = spla.lu_factor(M, check_finite=False)
        diag = np.abs(np.diag(lu[0]))
        sparse = False
    dmax = diag.max() if diag.size else 0.0
    dmin = diag.min() if diag.size else 0.0
    if dmax == 0.0 or dmin <= _PIVOT_TOL * dmax or not np.isfinite(dmax):
        raise SingularShiftError(s, f"pivot ratio {dmin / dmax if dmax else 0.0:.3e}")
    return ShiftedFactorization(s, n, float(dmax / dmin), count, lu, sparse, cplx)


@dataclass(frozen=True)
class OrthResult:
    Q: np.ndarray
    kept: list
    dropped: list


def orth(M, rank_tol=RANK_TOL):
    """Orthonormal basis of ``range(M)`` built column by column.

    Columns whose residual after two Gram-Schmidt sweeps is below
    ``rank_tol * ||column||`` are dropped and reported; column order is
    preserved otherwise.
    """
    M = np.asarray(M)
    if M.ndim == 1:
        M = M[:, None]
    if M.shape[1] == 0:
        raise EmptyBasisError("orth called on a matrix with no columns")
    dtype = complex if np.iscomplexobj(M) else float
    Q = np.zeros((M.shape[0], M.shape[1]), dtype=dtype)
    k, kept = _kernels.orth_into(Q, 0, M, rank_tol)
    if k == 0:
        raise EmptyBasisError("all columns dropped during orthogonalization")
    idx = np.arange(M.shape[1])
    return OrthResult(Q[:, :k].copy(), idx[kept].tolist(), idx[~kept].tolist())


def orth_against(Q0, M, rank_tol=RANK_TOL):
    """Orthonormalize `M` against the orthonormal `Q0`, then internally.

    Returns ``(Q_new, kept_mask)`` with only the new columns.
    """
    M = np.asarray(M)
    dtype = complex if (np.iscomplexobj(Q0) or np.iscomplexobj(M)) else float
    k0 = Q0.shape[1]
    Q = np.zeros((Q0.shape[0], k0 + M.shape[1]), dtype=dtype)
    Q[:, :k0] = Q0
    k, kept = _kernels.orth_into(Q, k0, M, rank_tol)
    return Q[:, k0:k].copy(), kept


def _check_cap(n, cap, what):
    if n > cap:
        raise DimensionCapError(
            f"{what}: dimension {n} exceeds dense cap {cap}; "
            "use smallest_eigs (iterative) or raise the cap explicitly"
        )


def _phase_fix(v):
    i = np.argmax(np.abs(v))
    if v[i] == 0:
        return v
    return v * (abs(v[i]) / v[i])


def pair_conjugates(vals, vecs=None, tol=PAIR_TOL, warn=True):
    """Force exact conjugate pairing on eigen-data of a real pencil.

    Returns values in canonical order (and matching vectors). Values whose
    imaginary part is below ``tol * |value|`` are made real. Unpaired values
    are left alone (with a warning unless `warn` is false).
    """
    vals = np.asarray(vals, dtype=complex).copy()
    order = canonical_order(vals)
    vals = vals[order]
    if vecs is not None:
        vecs = np.asarray(vecs, dtype=complex)[:, order].copy()
    n = vals.size
    done = np.zeros(n, dtype=bool)
    for i in range(n):
        if done[i]:
            continue
        a = vals[i]
        if abs(a.imag) <= tol * abs(a):
            vals[i] = a.real
            if vecs is not None:
                vecs[:, i] = _phase_fix(vecs[:, i]).real
            done[i] = True
            continue
        best, bestd = -1, np.inf
        for j in range(n):
            if j == i or done[j]:
                continue
            d = abs(a - np.conj(vals[j]))
            if d < bestd:
                best, bestd = j, d
        if best < 0 or bestd > tol * abs(a):
            if warn:
                warnings.warn(f"eigenvalue {a!r} has no conjugate partner", RuntimeWarning, stacklevel=2)
            done[i] = True
            continue
        mu = 0.5 * (a + np.conj(vals[best]))
        # keep the member with positive imaginary part as the representative
        up, lo = (i, best) if mu.imag > 0 else (best, i)
        mu_up = mu if mu.imag > 0 else np.conj(mu)
        vals[up], vals[lo] = mu_up, np.conj(mu_up)
        if vecs is not None:
            vecs[:, lo] = np.conj(vecs[:, up])
        done[i] = done[best] = True
    order = canonical_order(vals)
    vals = vals[order]
    if vecs is not None:
        return vals, vecs[:, order]
    return vals


def small_gen_eig(A_red, E_red, cap=DENSE_CAP):
    """Eigenvalues and right eigenvectors of the small dense pencil (A_red, E_red).

    Real input gets exact conjugate pairs. Values come back in canonical order.
    """
    A_red = np.atleast_2d(np.asarray(A_red))
    E_red = np.atleast_2d(np.asarray(E_red))
    n = A_red.shape[0]
    _check_cap(n, cap, "small_gen_eig")
    sv = np.linalg.svd(E_red, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= n * np.finfo(float).eps * sv[0]:
        raise SingularPencilError(
            f"reduced E ({n}x{n}) is singular (rcond {sv[-1] / sv[0] if sv[0] else 0.0:.2e}); "
            "the projection bases are degenerate"
        )
    vals, vecs = spla.eig(A_red, E_red)
    if not np.all(np.isfinite(vals)):
        raise SingularPencilError(f"reduced pencil ({n}x{n}) has infinite eigenvalues")
    if is_real_matrix(A_red) and is_real_matrix(E_red):
        return pair_conjugates(vals, vecs)
    order = canonical_order(vals)
    return vals[order], vecs[:, order]


def solve_sylvester(F, G, RHS, cap=DENSE_CAP, sep_tol=1e-13):
    """Solve ``F X + X G = RHS`` by the Bartels-Stewart method (complex Schur)."""
    F = np.atleast_2d(np.asarray(F))
    G = np.atleast_2d(np.asarray(G))
    RHS = np.atleast_2d(np.asarray(RHS))
    _check_cap(max(F.shape[0], G.shape[0]), cap, "solve_sylvester")
    real = not (np.iscomplexobj(F) or np.iscomplexobj(G) or np.iscomplexobj(RHS))
    T, U = spla.schur(F.astype(complex), output="complex")
    S, V = spla.schur(G.astype(complex), output="complex")
    sep = np.abs(np.diag(T)[:, None] + np.diag(S)[None, :]).min()
    scale = max(np.linalg.norm(F, 1), np.linalg.norm(G, 1), np.finfo(float).tiny)
    if sep <= sep_tol * scale:
        raise IllPosedSylvesterError(
            f"spectra of F and -G overlap (min |f_i + g_j| = {sep:.3e})"
        )
    Y = _kernels.tri_sylvester(T, S, U.conj().T @ RHS @ V)
    X = U @ Y @ V.conj().T
    return X.real if real else X


def solve_lyapunov(F, Q, cap=DENSE_CAP):
    """Solve ``F P + P F^H + Q = 0``."""
    F = np.atleast_2d(np.asarray(F))
    P = solve_sylvester(F, F.conj().T, -np.asarray(Q), cap=cap)
    return 0.5 * (P + P.conj().T)


def _realify(vals, vecs, k):
    cols = []
    used = np.zeros(vals.size, dtype=bool)
    for i in range(vals.size):
        if len(cols) >= k:
            break
        if used[i]:
            continue
        used[i] = True
        v = _phase_fix(vecs[:, i])
        if vals[i].imag == 0.0:
            cols.append(v.real)
            continue
        for j in range(i + 1, vals.size):
            if not used[j] and vals[j] == np.conj(vals[i]):
                used[j] = True
                break
        cols.append(v.real)
        cols.append(v.imag)
    return np.column_stack(cols[:k])


def random_orth_basis(n, k, rng):
    """``orth(randn(n, k))`` from a numpy Generator."""
    return orth(rng.standard_normal((n, k))).Q


def smallest_eigs(A, E, k, seed=0, method="auto", cap=DENSE_CAP, tol=0.0, maxiter=None):
    """Orthonormal ``n x k`` basis of the invariant subspace belonging to the `k`
    eigenvalues of (A, E) of smallest magnitude.

    `method` is ``"dense"``, ``"arpack"`` or ``"auto"`` (dense up to `cap`).
    For real data, complex eigenvectors are split into real and imaginary
    parts so the basis is real. The ARPACK start vector is drawn from `seed`.
    """
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    real = is_real_matrix(A) and is_real_matrix(E)
    if method == "auto":
        method = "dense" if (n <= cap or k >= n - 2) else "arpack"
    if method == "dense":
        _check_cap(n, cap, "smallest_eigs(dense)")
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
        Ed = E.toarray() if sp.issparse(E) else np.asarray(E)
        vals, vecs = spla.eig(Ad, Ed)
        if real:
            vals, vecs = pair_conjugates(vals, vecs)
    elif method == "arpack":
        kk = min(k + 1, n - 2) if real else k
        lu = factor_shifted(A, E, 0.0, count=False)
        Emat = E

        def matvec(x):
            return lu.solve(Emat @ x)

        dtype = float if real else complex
        op = spsla.LinearOperator((n, n), matvec=matvec, dtype=dtype)
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            mu, vecs = spsla.eigs(op, k=kk, which="LM", v0=v0, tol=tol, maxiter=maxiter)
        except spsla.ArpackNoConvergence as exc:
            raise EigensolverError(
                f"ARPACK did not converge for the {k} smallest eigenvalues; "
                "consider random initial bases (Option 3)"
            ) from exc
        vals = 1.0 / mu
        if real:
            # a pair may be cut at the end of the partial spectrum
            vals, vecs = pair_conjugates(vals, vecs, tol=1e-6, warn=False)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.lexsort((vals.imag, np.abs(vals)))
    vals, vecs = vals[order], vecs[:, order]
    if real:
        X = _realify(vals, vecs, k)
    else:
        X = vecs[:, :k]
    return orth(X).Q
