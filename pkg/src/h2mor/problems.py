"""Benchmark systems: finite-difference elliptic operators, Matrix Market
directories, banded Toeplitz matrices and seeded random stable systems."""

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from ._kernels import stencil_triplets
from .errors import ProblemSpecError
from .lti import DescriptorSystem

KINDS = ("EllipticFD", "MatrixMarketDir", "Toeplitz", "Custom")

# operator id -> (spatial dimension, native points per dimension)
OPERATORS = {
    "L10000": (2, 100),
    "L10648": (3, 22),
    "L160000": (2, 400),
    "laplace2d": (2, 100),
    "laplace3d": (3, 22),
}


def _rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


def _diffusion(W, coef, axis, h, X):
    # (a u_d)_d with a at the two midpoints along axis d
    lo, hi = 2 * axis + 1, 2 * axis + 2
    shift = np.zeros(len(X))
    shift[axis] = h / 2
    a_minus = coef(*[x - s for x, s in zip(X, shift)])
    a_plus = coef(*[x + s for x, s in zip(X, shift)])
    W[lo] += a_minus / h**2
    W[hi] += a_plus / h**2
    W[0] -= (a_minus + a_plus) / h**2


def _advection(W, vel, axis, h, conservative, X):
    # centered first derivative; sign convention: operator term is -(v u)_d or -v u_d
    lo, hi = 2 * axis + 1, 2 * axis + 2
    if conservative:
        shift = np.zeros(len(X))
        shift[axis] = h
        v_minus = vel(*[x - s for x, s in zip(X, shift)])
        v_plus = vel(*[x + s for x, s in zip(X, shift)])
    else:
        v_minus = v_plus = vel(*X)
    W[hi] -= v_plus / (2 * h)
    W[lo] += v_minus / (2 * h)


def elliptic_matrix(operator_id, grid=None, convection=True):
    """Sparse FD matrix of one of the named operators on the unit square/cube.

    Zero Dirichlet boundary, uniform grid with `grid` interior points per
    dimension (h = 1/(grid+1)), lexicographic ordering with x fastest.
    """
    if operator_id not in OPERATORS:
        raise ProblemSpecError(f"unsupported operator {operator_id!r}; known: {sorted(OPERATORS)}")
    dim, native = OPERATORS[operator_id]
    N = native if grid is None else int(grid)
    h = 1.0 / (N + 1)
    pts = np.arange(1, N + 1) * h
    if dim == 2:
        Y, Xc = np.meshgrid(pts, pts, indexing="ij")
        X = (Xc[None], Y[None])  # shape (1, N, N) -> (nz, ny, nx)
        nz = 1
    else:
        Z, Y, Xc = np.meshgrid(pts, pts, pts, indexing="ij")
        X = (Xc, Y, Z)
        nz = N
    W = np.zeros((7, nz, N, N))
    one = lambda *x: np.ones_like(x[0])  # noqa: E731

    if operator_id == "L10000":
        _diffusion(W, lambda x, y: np.exp(-10 * x * y), 0, h, X)
        _diffusion(W, lambda x, y: np.exp(10 * x * y), 1, h, X)
        if convection:
            _advection(W, lambda x, y: 10 * (x + y), 0, h, True, X)
    elif operator_id == "L160000":
        coef = lambda x, y: np.exp(3 * x * y)  # noqa: E731
        _diffusion(W, coef, 0, h, X)
        _diffusion(W, coef, 1, h, X)
        if convection:
            _advection(W, lambda x, y: 1.0 / (x + y), 0, h, False, X)
    elif operator_id == "L10648":
        for axis in range(3):
            _diffusion(W, one, axis, h, X)
        if convection:
            _advection(W, lambda x, y, z: 10 * x, 0, h, False, X)
            _advection(W, lambda x, y, z: 1000 * y, 1, h, False, X)
            _advection(W, lambda x, y, z: 10 * np.ones_like(z), 2, h, False, X)
    else:  # pure Laplacians
        for axis in range(dim):
            _diffusion(W, one, axis, h, X)

    rows, cols, vals = stencil_triplets(W, N, N, nz)
    n = N * N * nz
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    A.sort_indices()
    return A


def random_io(n, m, p, seed_b=0, seed_c=10):
    """Standard-normal B (n x m) and C (n x p) from separate PCG64 streams."""
    return _rng(seed_b).standard_normal((n, m)), _rng(seed_c).standard_normal((n, p))


def gen_elliptic(operator_id, grid=None, seeds=(0, 10), m=2, p=2, convection=True):
    """Elliptic benchmark system with ``E = I`` and seeded random B, C."""
    A = elliptic_matrix(operator_id, grid, convection)
    B, C = random_io(A.shape[0], m, p, *seeds)
    name = operator_id if grid is None else f"{operator_id}@{grid}"
    return DescriptorSystem(A, B, C, None, name=name)


def toeplitz_matrix(n, band):
    """Sparse banded Toeplitz matrix; `band` maps diagonal offset -> value."""
    offsets = sorted(int(k) for k in band)
    diags = [np.full(n - abs(k), float(band[k] if k in band else band[str(k)])) for k in offsets]
    return sp.diags(diags, offsets, shape=(n, n), format="csr")


def default_toeplitz_band(n, nu=1.0, v=10.0):
    # centered 1-D convection-diffusion stencil -nu u'' ... on h = 1/(n+1)
    h = 1.0 / (n + 1)
    return {-1: nu / h**2 + v / (2 * h), 0: -2 * nu / h**2, 1: nu / h**2 - v / (2 * h)}


def random_stable_system(n, m=1, p=1, seed=0, n_pairs=None, nonnormality=0.1, e_random=False):
    """Dense real c-stable system with a mild non-normal perturbation.

    Poles: real ones log-spaced in [-100, -0.1] plus `n_pairs` complex pairs.
    """
    rng = _rng(seed)
    if n_pairs is None:
        n_pairs = n // 4
    n_pairs = min(n_pairs, n // 2)
    n_real = n - 2 * n_pairs
    D = np.zeros((n, n))
    D[np.arange(n_real), np.arange(n_real)] = -np.logspace(-1, 2, n_real) * rng.uniform(0.8, 1.2, n_real)
    for k in range(n_pairs):
        i = n_real + 2 * k
        a = -10 ** rng.uniform(-1, 1.5)
        b = 10 ** rng.uniform(-1, 1.5)
        D[i:i + 2, i:i + 2] = [[a, b], [-b, a]]
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    T = Q @ (np.eye(n) + nonnormality * rng.standard_normal((n, n)) / np.sqrt(n))
    A = T @ D @ np.linalg.inv(T)
    E = None
    if e_random:
        G = rng.standard_normal((n, n)) / np.sqrt(n)
        E = np.eye(n) + 0.1 * (G @ G.T)
        A = E @ A
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((n, p))
    return DescriptorSystem(A, B, C, E, name=f"random{n}")


def _read_mtx(path):
    try:
        M = scipy.io.mmread(str(path))
    except (ValueError, OSError) as exc:
        raise ProblemSpecError(f"cannot read Matrix Market file {path}: {exc}") from None
    return M


def load_matrix_market(directory, name=None):
    """Load ``A.mtx``, ``B.mtx``, ``C.mtx`` and optional ``E.mtx`` from `directory`.

    `C` may be stored ``n x p`` or, following the ``y = C x`` convention of
    most benchmark collections, ``p x n``; the latter is transposed.
    """
    d = Path(directory)
    files = {k: d / f"{k}.mtx" for k in "AEBC"}
    for k in "ABC":
        if not files[k].exists():
            raise ProblemSpecError(f"missing {files[k]}")
    A = _read_mtx(files["A"])
    A = sp.csr_matrix(A) if sp.issparse(A) else np.asarray(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ProblemSpecError(f"A must be square, got {A.shape}")
    E = None
    if files["E"].exists():
        E = _read_mtx(files["E"])
        E = sp.csr_matrix(E) if sp.issparse(E) else np.asarray(E)
        if E.shape != (n, n):
            raise ProblemSpecError(f"E has shape {E.shape}, expected {(n, n)}")
        if sp.issparse(E) != sp.issparse(A):
            E = sp.csr_matrix(E) if sp.issparse(A) else E.toarray()
    B = _read_mtx(files["B"])
    B = B.toarray() if sp.issparse(B) else np.asarray(B)
    C = _read_mtx(files["C"])
    C = C.toarray() if sp.issparse(C) else np.asarray(C)
    if B.shape[0] != n:
        raise ProblemSpecError(f"B has {B.shape[0]} rows, expected {n}")
    if C.shape[0] != n:
        if C.shape[1] == n:
            C = C.T
        else:
            raise ProblemSpecError(f"C has shape {C.shape}, incompatible with n={n}")
    return DescriptorSystem(A, B, C, E, name=name or d.name)


def save_matrix_market(sys, directory):
    """Write the system as ``A.mtx``, ``E.mtx``, ``B.mtx``, ``C.mtx`` (17 digits)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for key, M in (("A", sys.A), ("E", sys.E), ("B", sys.B), ("C", sys.C)):
        scipy.io.mmwrite(str(d / f"{key}.mtx"), sp.coo_matrix(M) if sp.issparse(M) else M, precision=17)
    return d


def select_siso(sys, b_col, c_col):
    """SISO system ``(E, A, B[:, b_col], C[:, c_col])`` (0-based columns)."""
    if not 0 <= b_col < sys.m:
        raise IndexError(f"b_col {b_col} out of range for m={sys.m}")
    if not 0 <= c_col < sys.p:
        raise IndexError(f"c_col {c_col} out of range for p={sys.p}")
    E = None if sys.e_is_identity else sys.E
    name = f"{sys.name}[{b_col},{c_col}]" if sys.name else ""
    return DescriptorSystem(sys.A, sys.B[:, [b_col]], sys.C[:, [c_col]], E, name=name)


@dataclass
class ProblemSpec:
    """Declarative description of a benchmark problem (JSON-serializable)."""

    name: str
    kind: str
    params: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=lambda: {"B": 0, "C": 10})

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProblemSpecError(f"unknown problem kind {self.kind!r}; expected one of {KINDS}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["name"], d["kind"], dict(d.get("params", {})), dict(d.get("seeds", {"B": 0, "C": 10})))
        except KeyError as exc:
            raise ProblemSpecError(f"problem spec is missing {exc}") from None

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def build(self):
        p = self.params
        sb, sc = self.seeds.get("B", 0), self.seeds.get("C", 10)
        if self.kind == "EllipticFD":
            sys = gen_elliptic(p.get("operator", self.name), p.get("grid"), (sb, sc),
                               p.get("m", 2), p.get("p", 2), p.get("convection", True))
        elif self.kind == "MatrixMarketDir":
            path = os.path.expandvars(os.path.expanduser(p["path"]))
            sys = load_matrix_market(path, name=self.name)
        elif self.kind == "Toeplitz":
            n = int(p.get("n", 200000))
            band = p.get("band") or default_toeplitz_band(n)
            A = toeplitz_matrix(n, band)
            B, C = random_io(n, p.get("m", 2), p.get("p", 2), sb, sc)
            sys = DescriptorSystem(A, B, C, name=self.name)
        else:
            sys = random_stable_system(int(p.get("n", 50)), p.get("m", 1), p.get("p", 1),
                                       seed=p.get("seed", sb), n_pairs=p.get("n_pairs"),
                                       nonnormality=p.get("nonnormality", 0.1),
                                       e_random=p.get("e_random", False))
        if "siso" in p:
            sys = select_siso(sys, *p["siso"])
        return sys
