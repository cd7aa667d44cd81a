"""H2 norms, the relative error sigma, and first-order optimality checks."""

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import trapezoid

from .errors import UnstableSystemError
from .irka import ReducedModel
from .kernels import DENSE_CAP, solve_lyapunov
from .lti import DescriptorSystem, eval_transfer

logger = logging.getLogger(__name__)

_TINY = 1e-300


class H2Method(enum.Enum):
    LYAPUNOV = "LyapunovDense"
    RESIDUE = "ResidueFormula"
    GRID = "FrequencyGrid"


@dataclass(frozen=True)
class H2Report:
    norm_full: float
    norm_error: float
    sigma: float
    method: H2Method
    approximate: bool = False
    convention: str = "frobenius"


def _as_system(x):
    return x.system if isinstance(x, ReducedModel) else x


def _check_stable(vals, what):
    if np.any(vals.real >= 0):
        raise UnstableSystemError(
            f"H2 norm undefined: {what} has {int(np.sum(vals.real >= 0))} pole(s) "
            "outside the open left half-plane"
        )


def h2_norm(sys, method=H2Method.LYAPUNOV, cap=DENSE_CAP):
    """H2 norm (Frobenius convention for MIMO) of a c-stable system.

    ``LYAPUNOV``: controllability Gramian of ``(E^{-1}A, E^{-1}B)``.
    ``RESIDUE``: double sum over the pole/residue expansion.
    """
    sys = _as_system(sys)
    method = H2Method(method)
    if sys.n > cap:
        raise ValueError(f"h2_norm: n={sys.n} exceeds dense cap {cap}; use sigma(..., grid=...)")
    A, E, B, C = sys.dense()
    if method is H2Method.LYAPUNOV:
        if sys.e_is_identity:
            F, G = A, B
        else:
            F, G = np.linalg.solve(E, A), np.linalg.solve(E, B)
        _check_stable(np.linalg.eigvals(F), "system")
        P = solve_lyapunov(F, G @ G.conj().T, cap=cap)
        val = np.trace(C.conj().T @ P @ C).real
        return float(np.sqrt(max(val, 0.0)))
    if method is H2Method.RESIDUE:
        vals, left, right = ReducedModel(sys).pole_residues()
        _check_stable(vals, "system")
        # ||h||^2 = sum_ij tr(R_i^H R_j) / (-conj(l_i) - l_j)
        G_left = left.conj() @ left.T
        G_right = right.conj() @ right.T
        gram = G_left * G_right.conj()  # tr(R_i^H R_j) = (l_i^H l_j)(rho_j^H rho_i)
        denom = -np.conj(vals)[:, None] - vals[None, :]
        val = np.sum(gram / denom).real
        return float(np.sqrt(max(val, 0.0)))
    raise ValueError(f"h2_norm does not support {method}")


def error_system(full, reduced):
    """Block-diagonal realization of ``h - h_red``."""
    full, red = _as_system(full), _as_system(reduced)
    Af, Ef, Bf, Cf = full.dense()
    Ar, Er, Br, Cr = red.dense()
    n, r = full.n, red.n
    dtype = np.result_type(Af, Ar, Ef, Er)
    A = np.zeros((n + r, n + r), dtype=dtype)
    E = np.zeros((n + r, n + r), dtype=dtype)
    A[:n, :n], A[n:, n:] = Af, Ar
    E[:n, :n], E[n:, n:] = Ef, Er
    B = np.vstack([Bf, Br])
    C = np.vstack([Cf, -Cr])
    return DescriptorSystem(A, B, C, E)


def _grid_norm2(sys, omegas):
    # trapezoid on a symmetric log grid: (1/2pi) * int ||h(iw)||_F^2 dw
    w = np.concatenate([-omegas[::-1], [0.0], omegas])
    f = np.array([np.linalg.norm(eval_transfer(sys, 1j * x).value) ** 2 for x in w])
    return float(trapezoid(f, w) / (2 * np.pi))


def default_grid(lo=1e-6, hi=1e6, num=2000):
    return np.logspace(np.log10(lo), np.log10(hi), num)


def sigma(full, reduced, method=H2Method.LYAPUNOV, cap=DENSE_CAP, grid=None):
    """Relative squared H2 error ``||h - h_red||^2 / ||h||^2``.

    Exact (dense) when the stacked error system fits under `cap`; otherwise a
    frequency-grid estimate flagged ``approximate``.
    """
    full_s, red_s = _as_system(full), _as_system(reduced)
    rvals = ReducedModel(red_s).poles
    if np.any(rvals.real >= 0):
        raise UnstableSystemError("H2 distance undefined: the reduced model is not stable")
    method = H2Method(method)
    if full_s.n + red_s.n <= cap and method is not H2Method.GRID:
        nf = h2_norm(full_s, method, cap)
        ne = h2_norm(error_system(full_s, red_s), method, cap)
        return H2Report(nf, ne, ne ** 2 / nf ** 2, method)
    omegas = default_grid() if grid is None else np.asarray(grid, dtype=float)
    logger.info("sigma: n=%d beyond dense cap, using a %d-point frequency grid", full_s.n, omegas.size)
    nf2 = _grid_norm2(full_s, omegas)
    ne2 = _grid_norm2(error_system_sparse(full_s, red_s), omegas)
    return H2Report(float(np.sqrt(nf2)), float(np.sqrt(ne2)), ne2 / nf2, H2Method.GRID, approximate=True)


def error_system_sparse(full, reduced):
    full, red = _as_system(full), _as_system(reduced)
    A = sp.block_diag([sp.csr_matrix(full.A), sp.csr_matrix(red.A)], format="csr")
    E = sp.block_diag([sp.csr_matrix(full.E), sp.csr_matrix(red.E)], format="csr")
    B = np.vstack([full.B, red.B])
    C = np.vstack([full.C, -red.C])
    return DescriptorSystem(A, B, C, E)


@dataclass(frozen=True)
class MLReport:
    """Per-pole interpolation residuals at the mirrored poles ``-conj(lambda_i)``."""

    poles: np.ndarray
    rho0: np.ndarray
    rho1: np.ndarray
    tangential: bool

    @property
    def max_residual(self):
        return float(max(self.rho0.max(), self.rho1.max()))

    def passes(self, t):
        return self.max_residual <= t


def _rel(num, den):
    return float(num / max(den, _TINY))


def check_meier_luenberger(full, reduced):
    """Value and derivative interpolation residuals at ``-conj(poles)``.

    SISO: plain relative residuals. MIMO: tangential residuals along the
    residue directions of each reduced pole (right and left for values,
    bitangential for derivatives), which is what the tangential first-order
    conditions require.
    """
    full_s = _as_system(full)
    model = reduced if isinstance(reduced, ReducedModel) else ReducedModel(reduced)
    vals, left, right = model.pole_residues()
    mimo = full_s.m > 1 or full_s.p > 1
    rho0 = np.zeros(vals.size)
    rho1 = np.zeros(vals.size)
    for i, lam in enumerate(vals):
        s = -np.conj(lam)
        h = eval_transfer(full_s, s, derivative=True)
        hr = eval_transfer(model.system, s, derivative=True)
        if not mimo:
            rho0[i] = _rel(abs(h.value - hr.value).item(), abs(h.value).item())
            rho1[i] = _rel(abs(h.derivative - hr.derivative).item(), abs(h.derivative).item())
            continue
        l, rho = left[i], right[i]
        dv = h.value - hr.value
        r_right = _rel(np.linalg.norm(dv @ rho), np.linalg.norm(h.value @ rho))
        r_left = _rel(np.linalg.norm(l.conj() @ dv), np.linalg.norm(l.conj() @ h.value))
        rho0[i] = max(r_right, r_left)
        dd = l.conj() @ (h.derivative - hr.derivative) @ rho
        rho1[i] = _rel(abs(dd), abs(l.conj() @ h.derivative @ rho))
    return MLReport(vals, rho0, rho1, mimo)


@dataclass(frozen=True)
class TransferTable:
    omega: np.ndarray
    magnitude: np.ndarray
    magnitude_other: np.ndarray = None
    error: np.ndarray = None


def sample_transfer(sys, omegas, other=None):
    """Magnitudes ``||h(i w)||_2`` on a frequency grid; with `other`, also
    its magnitude and the pointwise error ``||h(i w) - h_other(i w)||_2``."""
    sys = _as_system(sys)
    omegas = np.asarray(omegas, dtype=float)
    mag = np.empty(omegas.size)
    mag_o = np.empty(omegas.size) if other is not None else None
    err = np.empty(omegas.size) if other is not None else None
    other_s = _as_system(other) if other is not None else None
    for k, w in enumerate(omegas):
        h = eval_transfer(sys, 1j * w).value
        mag[k] = np.linalg.norm(h, 2)
        if other_s is not None:
            ho = eval_transfer(other_s, 1j * w).value
            mag_o[k] = np.linalg.norm(ho, 2)
            err[k] = np.linalg.norm(h - ho, 2)
    return TransferTable(omegas, mag, mag_o, err)
