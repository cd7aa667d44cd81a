import logging

import numpy as np
import pytest
from scipy.optimize import brentq

from h2mor import DescriptorSystem, eval_transfer
from h2mor.krylov import ShiftSet
from h2mor.problems import random_stable_system


@pytest.fixture(autouse=True)
def _quiet_logs():
    logging.getLogger("h2mor").setLevel(logging.ERROR)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def dense_transfer(sys, s):
    """Oracle: ``C^H (sE - A)^{-1} B`` by explicit inversion."""
    A, E, B, C = sys.dense()
    return C.conj().T @ np.linalg.inv(s * E - A) @ B


def dense_transfer_derivative(sys, s):
    A, E, B, C = sys.dense()
    R = np.linalg.inv(s * E - A)
    return -C.conj().T @ R @ E @ R @ B


def scalar_system(a, b=1.0, c=1.0, e=1.0):
    return DescriptorSystem([[-a]], [[b]], [[c]], [[e]])


@pytest.fixture
def siso50():
    return random_stable_system(50, 1, 1, seed=7)


@pytest.fixture
def mimo40():
    return random_stable_system(40, 2, 3, seed=11, e_random=True)


def random_closed_shifts(rng, r):
    """Conjugation-closed shifts in the right half-plane."""
    out = []
    while len(out) < r:
        if r - len(out) >= 2 and rng.random() < 0.5:
            z = rng.uniform(0.1, 10) + 1j * rng.uniform(0.1, 10)
            out += [z, np.conj(z)]
        else:
            out.append(rng.uniform(0.1, 10))
    return ShiftSet(out)


def hermite_residuals(sys, model, shifts):
    worst0 = worst1 = 0.0
    for s in shifts:
        h = eval_transfer(sys, s, derivative=True)
        hr = eval_transfer(model.system, s, derivative=True)
        worst0 = max(worst0, abs(h.value - hr.value).item() / abs(h.value).item())
        worst1 = max(worst1, abs(h.derivative - hr.derivative).item() / abs(h.derivative).item())
    return worst0, worst1


def scalar_fixed_point_oracle(a, g, s0, iters=2000):
    """r=1 IRKA on diag(a) with weights g_i = b_i c_i, in plain scalar arithmetic."""
    a = np.asarray(a, dtype=float)
    g = np.asarray(g, dtype=float)

    def next_shift(s):
        w = g / (a - s) ** 2
        return -float(np.sum(a * w) / np.sum(w))

    s = s0
    for _ in range(iters):
        s_new = next_shift(s)
        if abs(s_new - s) <= 1e-15 * abs(s_new):
            break
        s = s_new
    # refine as a root of s - next_shift(s) on a bracketing grid around s
    grid = np.linspace(0.9 * s, 1.1 * s, 201)
    f = np.array([x - next_shift(x) for x in grid])
    k = np.flatnonzero(np.sign(f[:-1]) != np.sign(f[1:]))
    if k.size:
        i = k[np.argmin(np.abs(grid[k] - s))]
        s = brentq(lambda x: x - next_shift(x), grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15)
    return s


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL/SKIP line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, status, detail):
        if not isinstance(status, str):
            status = "PASS" if status else "FAIL"
        line = f"criterion {number}: {status}  {detail}"
        lines.append(line)
        print(line)
        return status == "PASS"

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
