"""Reduced IRKA: accumulate rational Krylov blocks, run IRKA on the projected
problem, inject the resulting shifts, optionally keeping a sliding window."""

import enum
import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import H2MORError, SingularShiftError
from .irka import STRICT_RANK_TOL, InitOption, IrkaConfig, ReductionResult, initial_bases, irka, project
from .kernels import RANK_TOL, SOLVE_COUNTER, orth
from .krylov import (
    RKBasis,
    ShiftSet,
    build_rk_bases,
    conjugate_partners,
    expand_basis,
    shift_distance,
    truncate_window,
)
from .records import ConvergenceRecord, IterationEntry

logger = logging.getLogger(__name__)

__all__ = ["RirkaInit", "RirkaConfig", "rirka", "project", "shift_distance"]

_PERTURB = 1e-8


class RirkaInit(enum.Enum):
    EIG2R = "eig"
    GIVEN_BASES = "given"
    RANDOM2R = "random"


@dataclass
class RirkaConfig:
    r: int
    tol_outer: float = 1e-8
    tol_inner: float = 5e-9
    itmax_outer: int = 30
    itmax_inner: int = 300
    init_option: RirkaInit = RirkaInit.EIG2R
    tau: Optional[int] = None
    seed: int = 0
    rank_tol: float = RANK_TOL
    debug_allow_tau1: bool = False

    def __post_init__(self):
        self.init_option = RirkaInit(self.init_option)
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if not 0 < self.tol_inner <= self.tol_outer < 1:
            raise ValueError("need 0 < tol_inner <= tol_outer < 1")
        if self.itmax_outer < 1 or self.itmax_inner < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.tau is not None and self.tau < 2 and not (self.tau == 1 and self.debug_allow_tau1):
            raise ValueError("tau must be >= 2 (tau=1 needs debug_allow_tau1)")


def _split_blocks(Q, r, side):
    # the 2r-column startup basis counts as two r-blocks (ids -1 and 0)
    q = Q.shape[1]
    first = min(r, q)
    widths = [first, q - first] if q > first else [first]
    ids = [-1, 0] if len(widths) == 2 else [0]
    return RKBasis.from_blocks(Q, widths, ids, side)


def _perturbed(shifts, bad):
    vals = shifts.values.copy()
    partners = conjugate_partners(vals)
    for i, s in enumerate(vals):
        if s == bad or s == np.conj(bad):
            vals[i] = s + _PERTURB * (1 + abs(s))
    for i, j in enumerate(partners):
        if j > i:
            vals[j] = np.conj(vals[i])
    return ShiftSet(vals)


def _expand_from_shifts(sys, shifts, tangents, cfg, j):
    try:
        return build_rk_bases(sys, shifts, tangents, STRICT_RANK_TOL, count=True, iter_index=j), shifts
    except SingularShiftError as exc:
        logger.warning("shift %r hits the pencil spectrum; perturbing once", exc.shift)
        shifts = _perturbed(shifts, exc.shift)
        return build_rk_bases(sys, shifts, tangents, STRICT_RANK_TOL, count=True, iter_index=j), shifts


def rirka(sys, cfg, init_bases=None):
    """Reduced IRKA (full accumulation, or truncated when ``cfg.tau`` is set).

    Each outer step projects onto the accumulated bases, runs IRKA(r) on the
    small problem (eigen start first, warm start from the previous shifts
    afterwards), builds r new columns per side from those shifts against the
    original system, expands, and then tests the relative shift change.
    The returned model is the projection onto the last r-dimensional bases.
    """
    r = cfg.r
    method = "RIRKA" if cfg.tau is None else "TRIRKA"
    record = ConvergenceRecord(method, r)
    record.meta.update(init_option=cfg.init_option.value, tau=cfg.tau)
    c0 = SOLVE_COUNTER.count
    t0 = time.perf_counter()

    if cfg.init_option is RirkaInit.GIVEN_BASES:
        if init_bases is None:
            raise ValueError("GIVEN_BASES start requires init_bases=(V, W)")
        Vq, Wq = orth(init_bases[0]).Q, orth(init_bases[1]).Q
    else:
        opt = InitOption.EIG if cfg.init_option is RirkaInit.EIG2R else InitOption.RANDOM
        Vq, Wq = initial_bases(sys, 2 * r, opt, cfg.seed)
    V_acc, W_acc = _split_blocks(Vq, r, "right"), _split_blocks(Wq, r, "left")

    S_prev = ShiftSet(np.ones(r))
    record.initial_shifts = S_prev.values.copy()
    tangents = None
    shifts = S_prev
    V = W = None
    model = inner = None
    stalled_runs = 0
    record.status = "itmax"
    for j in range(1, cfg.itmax_outer + 1):
        try:
            hat = project(sys, V_acc, W_acc)
            inner_cfg = IrkaConfig(
                r=min(r, hat.order), tol=cfg.tol_inner, itmax=cfg.itmax_inner,
                init_option=InitOption.EIG if j == 1 else InitOption.GIVEN, seed=cfg.seed,
            )
            inner = irka(hat.system, inner_cfg,
                         init_shifts=None if j == 1 else S_prev,
                         init_tangents=None if j == 1 else tangents,
                         count_solves=False)
            shifts, tangents = inner.shifts, inner.tangents
            (V, W), shifts = _expand_from_shifts(sys, shifts, tangents, cfg, j)
        except H2MORError as exc:
            record.status = "error"
            record.message = f"outer iteration {j}: {exc}"
            logger.error("%s: %s", method, record.message)
            break
        if cfg.tau is not None:
            V_acc = truncate_window(V_acc, cfg.tau, r, allow_degenerate=cfg.debug_allow_tau1)
            W_acc = truncate_window(W_acc, cfg.tau, r, allow_degenerate=cfg.debug_allow_tau1)
        V_acc = expand_basis(V_acc, V.Q, j, cfg.rank_tol) if V_acc.ncols else RKBasis.single(V.Q, "right", j)
        W_acc = expand_basis(W_acc, W.Q, j, cfg.rank_tol) if W_acc.ncols else RKBasis.single(W.Q, "left", j)
        chi = shift_distance(shifts, S_prev)
        record.append(IterationEntry(
            j, chi, shifts.values.copy(), V_acc.ncols, W_acc.ncols,
            SOLVE_COUNTER.count - c0, inner.record.n_iters, time.perf_counter() - t0,
        ))
        if chi < cfg.tol_outer and j > 1:  # chi_1 is measured against the ones placeholder
            record.status = "converged"
            break
        stalled_runs = stalled_runs + 1 if (V_acc.stalled or W_acc.stalled) else 0
        if stalled_runs >= 2:
            record.status = "stagnation"
            record.message = f"expansion added no columns in two consecutive iterations (j={j})"
            logger.warning("%s: %s", method, record.message)
            break
        S_prev = shifts

    record.ell_fin = min(V_acc.ncols, W_acc.ncols)
    if inner is not None:
        record.meta["inner_status"] = inner.record.status
        if record.status == "converged" and not inner.converged:
            # outer shifts are stationary but not an IRKA fixed point of the projection
            logger.warning("%s: outer loop converged but the last inner IRKA ended with %r",
                           method, inner.record.status)
    if V is not None:
        try:
            model = project(sys, V, W)
        except H2MORError as exc:
            record.status = "error"
            record.message = f"final projection: {exc}"
    if record.status == "itmax":
        record.message = f"no convergence in {cfg.itmax_outer} outer iterations"
    return ReductionResult(shifts, V, W, model, record, tangents, V_acc, W_acc)
