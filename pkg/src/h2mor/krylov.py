"""Rational Krylov bases, shift sets and tangential directions."""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .kernels import RANK_TOL, canonical_order, factor_shifted, orth, orth_against

logger = logging.getLogger(__name__)

_REAL_TOL = 1e-14
_PAIR_TOL = 1e-12


@dataclass(frozen=True)
class ShiftSet:
    """Interpolation points; `values` keeps the caller's order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=complex)).copy()
        if v.ndim != 1:
            raise ValueError("shifts must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValueError("shifts must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    def order(self):
        return canonical_order(self.values)

    def sorted(self):
        return ShiftSet(self.values[self.order()])

    def conj(self):
        return ShiftSet(self.values.conj())

    def is_conjugation_closed(self, tol=_PAIR_TOL):
        return all(p >= 0 for p in conjugate_partners(self.values, tol))

    def tolist(self):
        return [complex(s) for s in self.values]


def conjugate_partners(values, tol=_PAIR_TOL):
    """For each shift, the index of its conjugate partner.

    Real shifts map to themselves; unmatched complex shifts map to -1.
    """
    values = np.asarray(values, dtype=complex)
    n = values.size
    partner = np.full(n, -1, dtype=int)
    for i in range(n):
        s = values[i]
        if abs(s.imag) <= _REAL_TOL * max(abs(s), 1.0):
            partner[i] = i
            continue
        if partner[i] >= 0:
            continue
        for j in range(i + 1, n):
            if partner[j] < 0 and abs(values[j] - np.conj(s)) <= tol * max(abs(s), 1.0):
                partner[i], partner[j] = j, i
                break
    return partner


def normalize_direction(v):
    """Unit 2-norm, with the largest-magnitude entry made positive real."""
    v = np.asarray(v, dtype=complex).ravel()
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("zero tangent direction")
    i = int(np.argmax(np.abs(v)))
    return v * (abs(v[i]) / v[i]) / nrm


@dataclass(frozen=True)
class TangentSet:
    """Right (m-vector) and left (p-vector) directions, one row per shift."""

    b_dirs: np.ndarray
    c_dirs: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.b_dirs, dtype=complex))
        c = np.atleast_2d(np.asarray(self.c_dirs, dtype=complex))
        if b.shape[0] != c.shape[0]:
            raise ValueError("b_dirs and c_dirs must have one row per shift")
        object.__setattr__(self, "b_dirs", b)
        object.__setattr__(self, "c_dirs", c)

    def __len__(self):
        return self.b_dirs.shape[0]

    def take(self, idx):
        return TangentSet(self.b_dirs[idx], self.c_dirs[idx])

    @classmethod
    def ones(cls, r, m, p):
        """The default start: all-ones directions, normalized."""
        return cls(np.ones((r, m)) / np.sqrt(m), np.ones((r, p)) / np.sqrt(p))

    def normalized(self):
        return TangentSet(
            np.array([normalize_direction(b) for b in self.b_dirs]),
            np.array([normalize_direction(c) for c in self.c_dirs]),
        )


@dataclass(frozen=True)
class RKBasis:
    """Orthonormal basis with per-iteration block bookkeeping.

    `blocks` holds ``(iter_index, start, stop)`` column ranges in construction
    order. `stalled` flags that the most recent expansion added nothing.
    """

    Q: np.ndarray
    blocks: tuple
    side: str = "right"
    stalled: bool = False

    @property
    def ncols(self):
        return self.Q.shape[1]

    @property
    def block_ids(self):
        return [b[0] for b in self.blocks]

    @classmethod
    def single(cls, Q, side="right", iter_index=0):
        return cls(Q, ((iter_index, 0, Q.shape[1]),), side)

    @classmethod
    def from_blocks(cls, Q, widths, iter_indices, side="right"):
        blocks, start = [], 0
        for it, w in zip(iter_indices, widths):
            blocks.append((it, start, start + w))
            start += w
        if start != Q.shape[1]:
            raise ValueError("block widths do not cover Q")
        return cls(Q, tuple(blocks), side)


def _rhs(M, dirs, i):
    if dirs is None:
        return M[:, 0]
    return M @ dirs[i]


def rk_columns(sys, shifts, tangents=None, sides=("right", "left"), count=True):
    """Raw (unorthogonalized) rational Krylov columns for each requested side.

    Real data with conjugation-closed shifts (and conjugate-aligned tangents)
    gives real columns: a conjugate pair contributes ``Re x, Im x`` of one
    complex solve. Each distinct shift is factorized once and shared by both
    sides (adjoint solves for the left side).
    """
    vals = np.asarray(shifts.values if isinstance(shifts, ShiftSet) else shifts, dtype=complex)
    if tangents is None:
        if sys.m > 1 and "right" in sides:
            raise ValueError(f"MIMO system (m={sys.m}) needs tangent directions")
        if sys.p > 1 and "left" in sides:
            raise ValueError(f"MIMO system (p={sys.p}) needs tangent directions")
        bd = cd = None
    else:
        if len(tangents) != vals.size:
            raise ValueError("tangents must align with shifts")
        bd, cd = tangents.b_dirs, tangents.c_dirs
    partners = conjugate_partners(vals)
    real = sys.real_flag and np.all(partners >= 0)
    if real and tangents is not None:
        for i, j in enumerate(partners):
            if j == i:
                ok = not np.any(bd[i].imag) and not np.any(cd[i].imag)
            else:
                ok = np.allclose(bd[j], bd[i].conj(), rtol=1e-10, atol=0) and np.allclose(
                    cd[j], cd[i].conj(), rtol=1e-10, atol=0)
            if not ok:
                real = False
                break

    facs = {}

    def fac(s):
        key = complex(s)
        if key not in facs:
            facs[key] = factor_shifted(sys.A, sys.E, key, count=count)
        return facs[key]

    cols = {side: [] for side in sides}
    done = np.zeros(vals.size, dtype=bool)
    for i in range(vals.size):
        if done[i]:
            continue
        j = partners[i]
        if real and j == i:
            f = fac(vals[i].real)
            if "right" in sides:
                cols["right"].append(f.solve(_rhs(sys.B, bd, i).real))
            if "left" in sides:
                cols["left"].append(f.solve_adjoint(_rhs(sys.C, cd, i).real))
            done[i] = True
        elif real:
            k = i if vals[i].imag > 0 else j
            f = fac(vals[k])
            if "right" in sides:
                x = f.solve(_rhs(sys.B, bd, k), weight=2)
                cols["right"] += [x.real, x.imag]
            if "left" in sides:
                y = f.solve_adjoint(_rhs(sys.C, cd, k), weight=2)
                cols["left"] += [y.real, y.imag]
            done[i] = done[j] = True
        else:
            f = fac(vals[i])
            if "right" in sides:
                cols["right"].append(f.solve(_rhs(sys.B, bd, i)))
            if "left" in sides:
                cols["left"].append(f.solve_adjoint(_rhs(sys.C, cd, i)))
            done[i] = True
    return {side: np.column_stack(c) for side, c in cols.items()}


def build_rk_basis(sys, shifts, side="right", tangents=None, rank_tol=RANK_TOL,
                   count=True, iter_index=0):
    """Orthonormal basis of the (tangential) rational Krylov space for `shifts`.

    ``side="right"`` spans ``(A - s_j E)^{-1} B b_j``; ``side="left"`` spans
    ``(A - s_j E)^{-H} C c_j``. Rank-deficient columns are deflated.
    """
    if side not in ("right", "left"):
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    M = rk_columns(sys, shifts, tangents, sides=(side,), count=count)[side]
    res = orth(M, rank_tol)
    if res.dropped:
        logger.info("build_rk_basis(%s): deflated columns %s", side, res.dropped)
    return RKBasis.single(res.Q, side, iter_index)


def build_rk_bases(sys, shifts, tangents=None, rank_tol=RANK_TOL, count=True, iter_index=0):
    """Right and left bases sharing one factorization per shift."""
    cols = rk_columns(sys, shifts, tangents, count=count)
    out = []
    for side in ("right", "left"):
        res = orth(cols[side], rank_tol)
        if res.dropped:
            logger.info("build_rk_bases(%s): deflated columns %s", side, res.dropped)
        out.append(RKBasis.single(res.Q, side, iter_index))
    return out[0], out[1]


def expand_basis(basis, new_block, iter_index, rank_tol=RANK_TOL):
    """Append the part of `new_block` orthogonal to `basis` as one block.

    Existing columns are untouched. If the whole block deflates, the basis is
    returned unchanged with ``stalled=True``.
    """
    new_block = np.asarray(new_block)
    if new_block.ndim == 1:
        new_block = new_block[:, None]
    if new_block.shape[0] != basis.Q.shape[0]:
        raise ValueError("new block has the wrong number of rows")
    Qn, kept = orth_against(basis.Q, new_block, rank_tol)
    if Qn.shape[1] == 0:
        logger.info("expand_basis: block %s fully deflated", iter_index)
        return replace(basis, stalled=True)
    Q = np.hstack([basis.Q.astype(Qn.dtype, copy=False), Qn])
    start = basis.ncols
    blocks = basis.blocks + ((iter_index, start, start + Qn.shape[1]),)
    return RKBasis(Q, blocks, basis.side, False)


def truncate_window(basis, tau, r=None, allow_degenerate=False):
    """Keep only the most recent ``tau - 1`` blocks, ready for the next expansion.

    After appending the incoming block the window holds `tau` blocks.
    ``tau == 1`` (drop everything) is only allowed with `allow_degenerate`.
    `r` is accepted for symmetry with the column-index form and is unused.
    """
    if tau < 1 or (tau == 1 and not allow_degenerate):
        raise ValueError(f"tau must be >= 2 (got {tau})")
    keep = tau - 1
    if len(basis.blocks) <= keep:
        return basis
    if keep == 0:
        return RKBasis(basis.Q[:, :0], (), basis.side)
    kept = basis.blocks[-keep:]
    offset = kept[0][1]
    blocks = tuple((it, a - offset, b - offset) for it, a, b in kept)
    return RKBasis(basis.Q[:, offset:].copy(), blocks, basis.side)


def shift_distance(S_new, S_old):
    """Relative change ``||S_new - S_old|| / ||S_new||`` after canonical sorting.

    Sets of different size are infinitely far apart.
    """
    a = np.asarray(S_new.values if isinstance(S_new, ShiftSet) else S_new, dtype=complex)
    b = np.asarray(S_old.values if isinstance(S_old, ShiftSet) else S_old, dtype=complex)
    if a.size != b.size:
        return np.inf
    a = a[canonical_order(a)]
    b = b[canonical_order(b)]
    nrm = np.linalg.norm(a)
    if nrm == 0.0:
        logger.warning("shift_distance: all-zero shift set")
        return np.inf
    return float(np.linalg.norm(a - b) / nrm)
