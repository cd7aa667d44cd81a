"""The classical IRKA fixed-point iteration (SISO and tangential MIMO)."""

import enum
import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import NonSimplePolesError, SingularPencilError
from .kernels import (
    SOLVE_COUNTER,
    canonical_order,
    random_orth_basis,
    small_gen_eig,
    smallest_eigs,
)
from .krylov import RKBasis, ShiftSet, TangentSet, build_rk_bases, conjugate_partners, shift_distance
from .lti import DescriptorSystem
from .records import ConvergenceRecord, IterationEntry

logger = logging.getLogger(__name__)

# Fixed-order bases only drop exactly repeated directions: a looser threshold
# would silently lower the model order when shifts cluster.
STRICT_RANK_TOL = 1e-14


class InitOption(enum.Enum):
    EIG = "eig"
    GIVEN = "given"
    RANDOM = "random"


@dataclass
class ReducedModel:
    """Petrov-Galerkin projection ``(W^H E V, W^H A V, W^H B, V^H C)``."""

    system: DescriptorSystem
    V: Optional[np.ndarray] = field(default=None, repr=False)
    W: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def order(self):
        return self.system.n

    @cached_property
    def _eig(self):
        A, E, _, _ = self.system.dense()
        return small_gen_eig(A, E)

    @property
    def poles(self):
        return self._eig[0]

    def pole_residues(self, simple_tol=1e-12):
        """Poles and rank-one residues ``R_i = l_i rho_i^H`` (p x m each).

        Returns ``(poles, left, right)`` with ``left[i] = l_i`` (p-vector) and
        ``right[i] = rho_i`` (m-vector).
        """
        vals, X = self._eig
        _check_simple(vals, simple_tol)
        A, E, B, C = self.system.dense()
        Y = np.linalg.solve(X, np.linalg.solve(E, B))  # rows: rho_i^H
        left = (C.conj().T @ X).T
        right = Y.conj()
        if self.system.real_flag:
            partners = conjugate_partners(vals)
            for i, j in enumerate(partners):
                if j > i and vals[i].imag > 0:
                    left[j], right[j] = left[i].conj(), right[i].conj()
                elif j > i:
                    left[i], right[i] = left[j].conj(), right[j].conj()
                elif j == i:
                    left[i], right[i] = left[i].real, right[i].real
        return vals, left, right

    @property
    def residue_dirs(self):
        return compute_residue_dirs(self)


def _check_simple(vals, tol):
    if vals.size < 2:
        return
    scale = max(np.abs(vals).max(), np.finfo(float).tiny)
    d = np.abs(vals[:, None] - vals[None, :])
    d[np.diag_indices_from(d)] = np.inf
    if d.min() <= tol * scale:
        raise NonSimplePolesError(
            f"reduced poles are not simple (min separation {d.min():.3e})"
        )


def project(sys, V, W):
    """Two-sided projection of `sys` onto ``range(V)``, ``range(W)``.

    If the bases differ in width (independent deflation), the leading
    ``min`` columns of each are used.
    """
    V = V.Q if isinstance(V, RKBasis) else np.asarray(V)
    W = W.Q if isinstance(W, RKBasis) else np.asarray(W)
    ell = min(V.shape[1], W.shape[1])
    V, W = V[:, :ell], W[:, :ell]
    WH = W.conj().T
    A_red = WH @ (sys.A @ V)
    E_red = WH @ (sys.E @ V)
    sv = np.linalg.svd(E_red, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= ell * np.finfo(float).eps * sv[0]:
        raise SingularPencilError(
            f"projected E is singular ({ell}x{ell}); the left and right bases "
            "do not match (check deflation on each side)"
        )
    red = DescriptorSystem(np.asarray(A_red), WH @ sys.B, V.conj().T @ sys.C, np.asarray(E_red))
    return ReducedModel(red, V, W)


def compute_residue_dirs(model):
    """Tangent directions from the pole/residue expansion of `model`.

    Row `i` belongs to the pole ``model.poles[i]``: ``b_dirs[i]`` is the right
    (input) factor and ``c_dirs[i]`` the left (output) factor of its residue,
    both normalized.
    """
    _, left, right = model.pole_residues()
    return TangentSet(right, left).normalized()


@dataclass
class IrkaConfig:
    r: int
    tol: float = 1e-8
    itmax: int = 300
    init_option: InitOption = InitOption.EIG
    seed: int = 0
    rank_tol: float = STRICT_RANK_TOL

    def __post_init__(self):
        self.init_option = InitOption(self.init_option)
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.itmax < 1:
            raise ValueError("itmax must be >= 1")


@dataclass
class ReductionResult:
    """Outcome of an IRKA or R-IRKA run."""

    shifts: ShiftSet
    V: RKBasis
    W: RKBasis
    model: Optional[ReducedModel]
    record: ConvergenceRecord
    tangents: Optional[TangentSet] = None
    V_acc: Optional[RKBasis] = None
    W_acc: Optional[RKBasis] = None

    @property
    def converged(self):
        return self.record.converged

    def __iter__(self):
        return iter((self.shifts, self.V, self.W, self.model, self.record))


def mirrored_shifts(model, mimo):
    """``-conj(poles)`` in canonical order, with matching tangents for MIMO."""
    if mimo:
        vals, left, right = model.pole_residues()
        tangents = TangentSet(right, left).normalized()
    else:
        vals, tangents = model.poles, None
    if np.any(vals.real >= 0):
        logger.debug("reduced model has %d unstable pole(s); mirroring anyway",
                       int(np.sum(vals.real >= 0)))
    S = -np.conj(vals)
    order = canonical_order(S)
    return ShiftSet(S[order]), (tangents.take(order) if tangents is not None else None)


def initial_bases(sys, k, option, seed):
    """Startup bases: eigenbasis (``W = V``) or two random orthonormal bases."""
    k = min(k, sys.n)
    if option is InitOption.EIG:
        V = smallest_eigs(sys.A, sys.E, k, seed=seed)
        return V, V
    rng = np.random.default_rng(seed)
    dtype_real = sys.real_flag
    V = random_orth_basis(sys.n, k, rng)
    W = random_orth_basis(sys.n, k, rng)
    if not dtype_real:
        V, W = V.astype(complex), W.astype(complex)
    return V, W


def irka(sys, cfg, init_shifts=None, init_tangents=None, count_solves=True):
    """Iterative rational Krylov algorithm.

    Each sweep projects, mirrors the reduced poles into new shifts (sorted),
    rebuilds the two rational Krylov bases and stops once the relative shift
    change drops below ``cfg.tol``. Hitting ``cfg.itmax`` is not an error: the
    last iterate is returned with status ``"itmax"``.
    """
    r = cfg.r
    mimo = sys.m > 1 or sys.p > 1
    record = ConvergenceRecord("IRKA", r)
    record.meta["init_option"] = cfg.init_option.value
    c0 = SOLVE_COUNTER.count
    t0 = time.perf_counter()

    tangents = None
    if cfg.init_option is InitOption.GIVEN:
        if init_shifts is None:
            raise ValueError("GIVEN start requires init_shifts")
        S0 = ShiftSet(init_shifts) if not isinstance(init_shifts, ShiftSet) else init_shifts
        order = S0.order()
        S_prev = ShiftSet(S0.values[order])
        if mimo:
            if init_tangents is None:
                tangents = TangentSet.ones(len(S_prev), sys.m, sys.p)
                record.meta["initial_tangents"] = "ones"
            else:
                tangents = init_tangents.take(order)
        V, W = build_rk_bases(sys, S_prev, tangents, cfg.rank_tol, count=count_solves)
    else:
        Vq, Wq = initial_bases(sys, r, cfg.init_option, cfg.seed)
        V, W = RKBasis.single(Vq, "right"), RKBasis.single(Wq, "left")
        S_prev = ShiftSet(np.ones(r))
    record.initial_shifts = S_prev.values.copy()

    shifts = S_prev
    record.status = "itmax"
    for k in range(1, cfg.itmax + 1):
        model = project(sys, V, W)
        shifts, tangents = mirrored_shifts(model, mimo)
        V, W = build_rk_bases(sys, shifts, tangents, cfg.rank_tol, count=count_solves, iter_index=k)
        if min(V.ncols, W.ncols) < len(shifts) and not record.meta.get("order_drop"):
            record.meta["order_drop"] = k
            logger.warning("IRKA: repeated shift directions at iteration %d; reduced order drops to %d",
                           k, min(V.ncols, W.ncols))
        chi = shift_distance(shifts, S_prev)
        record.append(IterationEntry(
            k, chi, shifts.values.copy(), V.ncols, W.ncols,
            SOLVE_COUNTER.count - c0, 0, time.perf_counter() - t0,
        ))
        # against the ones placeholder the first chi carries no information
        if chi < cfg.tol and (k > 1 or cfg.init_option is InitOption.GIVEN):
            record.status = "converged"
            break
        S_prev = shifts
    model = project(sys, V, W)
    record.ell_fin = min(V.ncols, W.ncols)
    if record.status != "converged":
        record.message = f"no convergence in {cfg.itmax} iterations (chi={record.chis[-1]:.3e})"
        logger.info("IRKA: %s", record.message)
    return ReductionResult(shifts, V, W, model, record, tangents)
