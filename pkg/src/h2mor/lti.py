"""Descriptor LTI systems ``E x' = A x + B u, y = C^H x``."""

import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import DimensionCapError, SingularShiftError
from .kernels import DENSE_CAP, factor_shifted, is_real_matrix, small_gen_eig

_CACHE_SIZE = 16


def _as_block(M, n, name):
    M = np.asarray(M)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2 or M.shape[0] != n:
        raise ValueError(f"{name} must have {n} rows, got shape {M.shape}")
    if not np.iscomplexobj(M):
        M = M.astype(float)
    return M


def _is_hermitian(M):
    if sp.issparse(M):
        D = (M - M.conj().T).tocoo()
        return D.nnz == 0 or not np.any(D.data)
    M = np.asarray(M)
    return np.array_equal(M, M.conj().T)


@dataclass(frozen=True, eq=False)
class DescriptorSystem:
    """The quadruple (E, A, B, C) with transfer function ``C^H (sE - A)^{-1} B``.

    `A` and `E` may be dense arrays or scipy sparse matrices; `B` (n x m) and
    `C` (n x p) are stored dense. ``E=None`` means the identity. Instances are
    immutable; factorizations used for transfer evaluation are cached.
    """

    A: object
    B: np.ndarray
    C: np.ndarray
    E: object = None
    name: str = ""
    _cache: dict = field(default_factory=dict, init=False, repr=False)
    _lock: object = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        A = self.A
        if sp.issparse(A):
            A = sp.csr_matrix(A)
        else:
            A = np.atleast_2d(np.asarray(A))
            if not np.iscomplexobj(A):
                A = A.astype(float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        E = self.E
        e_identity = E is None
        if E is None:
            E = sp.identity(n, format="csr") if sp.issparse(A) else np.eye(n)
        elif sp.issparse(E):
            E = sp.csr_matrix(E)
        else:
            E = np.atleast_2d(np.asarray(E))
            if not np.iscomplexobj(E):
                E = E.astype(float)
        if E.shape != (n, n):
            raise ValueError(f"E must be {n}x{n}, got {E.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "B", _as_block(self.B, n, "B"))
        object.__setattr__(self, "C", _as_block(self.C, n, "C"))
        object.__setattr__(self, "_e_identity", e_identity)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.A)

    @property
    def e_is_identity(self):
        return self._e_identity

    @property
    def real_flag(self):
        return (is_real_matrix(self.A) and is_real_matrix(self.E)
                and is_real_matrix(self.B) and is_real_matrix(self.C))

    @property
    def symmetric_flag(self):
        return _is_hermitian(self.A) and _is_hermitian(self.E)

    def dense(self):
        """``(A, E, B, C)`` as dense arrays."""
        A = self.A.toarray() if sp.issparse(self.A) else self.A
        E = self.E.toarray() if sp.issparse(self.E) else self.E
        return A, E, self.B, self.C

    def factorization(self, s):
        """Cached, uncounted factorization of ``A - s E``."""
        key = complex(s)
        with self._lock:
            lu = self._cache.get(key)
        if lu is None:
            lu = factor_shifted(self.A, self.E, key, count=False)
            with self._lock:
                if len(self._cache) >= _CACHE_SIZE:
                    self._cache.pop(next(iter(self._cache)))
                self._cache[key] = lu
        return lu

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        label = f" {self.name!r}" if self.name else ""
        return f"<DescriptorSystem{label} n={self.n} m={self.m} p={self.p} {kind}>"


@dataclass(frozen=True)
class TransferSample:
    point: complex
    value: np.ndarray
    derivative: Optional[np.ndarray] = None


def eval_transfer(sys, s, derivative=False):
    """Evaluate ``h(s) = C^H (sE - A)^{-1} B`` and optionally ``h'(s)``."""
    s = complex(s)
    lu = sys.factorization(s)
    X = lu.solve(sys.B)  # (A - sE)^{-1} B
    CH = sys.C.conj().T
    value = -(CH @ X)
    dval = None
    if derivative:
        Y = lu.solve(sys.E @ X)
        dval = -(CH @ Y)
    return TransferSample(s, np.atleast_2d(value), None if dval is None else np.atleast_2d(dval))


def transfer(sys, s):
    """Shorthand for ``eval_transfer(sys, s).value``."""
    return eval_transfer(sys, s).value


def poles(sys, cap=DENSE_CAP):
    """Eigenvalues of the pencil (A, E) in canonical order (dense; ``n <= cap``)."""
    if sys.n > cap:
        raise DimensionCapError(
            f"poles: n={sys.n} exceeds dense cap {cap}; "
            "use kernels.smallest_eigs for a few eigenvalues of a large pencil"
        )
    A, E, _, _ = sys.dense()
    vals, _ = small_gen_eig(A, E, cap=cap)
    return vals


def is_c_stable(sys, cap=DENSE_CAP):
    return bool(np.all(poles(sys, cap=cap).real < 0))


__all__ = [
    "DescriptorSystem",
    "TransferSample",
    "SingularShiftError",
    "eval_transfer",
    "transfer",
    "poles",
    "is_c_stable",
]
