import math

import numpy as np
import pytest
import scipy.linalg as spla
from scipy.integrate import quad

from h2mor import DescriptorSystem
from h2mor.errors import UnstableSystemError
from h2mor.h2 import (
    H2Method,
    check_meier_luenberger,
    error_system,
    h2_norm,
    sample_transfer,
    sigma,
)
from h2mor.irka import IrkaConfig, ReducedModel, irka
from h2mor.problems import random_stable_system

from conftest import dense_transfer, scalar_system


def scipy_gramian_norm(sys):
    """Independent oracle: Gramian from scipy's Bartels-Stewart solver."""
    A, E, B, C = sys.dense()
    F, G = np.linalg.solve(E, A), np.linalg.solve(E, B)
    P = spla.solve_continuous_lyapunov(F, -G @ G.conj().T)
    return math.sqrt(np.trace(C.conj().T @ P @ C).real)


def quad_norm(sys):
    """Independent oracle: (1/pi) * int_0^inf |h(iw)|^2 dw for a real SISO system."""
    f = lambda w: abs(dense_transfer(sys, 1j * w)[0, 0]) ** 2
    val, _ = quad(f, 0, np.inf, limit=500, epsabs=0, epsrel=1e-12)
    return math.sqrt(val / math.pi)


@pytest.mark.parametrize("a, b, c, e", [(1.0, 1.0, 1.0, 1.0), (3.0, 2.0, -0.5, 1.0), (0.2, 1.5, 4.0, 2.5)])
def test_first_order_closed_form(a, b, c, e):
    # h(s) = cb / (e s + a)  =>  ||h||^2 = (cb)^2 / (2 a e)
    sys = scalar_system(a, b, c, e)
    ref = abs(b * c) / math.sqrt(2 * a * e)
    for method in H2Method.LYAPUNOV, H2Method.RESIDUE:
        assert h2_norm(sys, method) == pytest.approx(ref, rel=1e-14)


def test_block_diagonal_is_sum_of_squares():
    A = np.diag([-1.0, -4.0])
    B = np.diag([2.0, 1.0])
    C = np.diag([1.0, 3.0])
    sys = DescriptorSystem(A, B, C)
    ref = math.sqrt(4.0 / 2 + 9.0 / 8)
    assert h2_norm(sys) == pytest.approx(ref, rel=1e-14)
    assert h2_norm(sys, "ResidueFormula") == pytest.approx(ref, rel=1e-14)


def test_complex_pole_pair_against_quadrature():
    sys = DescriptorSystem([[0.0, 1.0], [-5.0, -0.4]], [[0.0], [1.0]], [[1.0], [0.5]])
    ref = quad_norm(sys)
    assert h2_norm(sys) == pytest.approx(ref, rel=1e-9)
    assert h2_norm(sys, "ResidueFormula") == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_lyapunov_matches_residue_and_scipy(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 40))
    m, p = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    sys = random_stable_system(n, m, p, seed=seed, e_random=bool(seed % 2))
    ly = h2_norm(sys, H2Method.LYAPUNOV)
    assert h2_norm(sys, H2Method.RESIDUE) == pytest.approx(ly, rel=1e-8)
    assert scipy_gramian_norm(sys) == pytest.approx(ly, rel=1e-10)


def test_unstable_system_raises():
    with pytest.raises(UnstableSystemError):
        h2_norm(scalar_system(-1.0))
    with pytest.raises(UnstableSystemError):
        h2_norm(scalar_system(-1.0), "ResidueFormula")


def test_error_system_transfer(siso50):
    red = scalar_system(2.0, 1.0, 0.3)
    err = error_system(siso50, red)
    s = 0.4 + 1.3j
    np.testing.assert_allclose(
        dense_transfer(err, s), dense_transfer(siso50, s) - dense_transfer(red, s), rtol=1e-12
    )


def test_sigma_of_identical_systems_is_zero(mimo40):
    rep = sigma(mimo40, mimo40)
    assert rep.sigma <= 1e-20
    assert not rep.approximate


def test_sigma_first_order_pair():
    # h = 1/(s+1), hr = 1/(s+2): ||h - hr||^2 = 1/2 + 1/4 - 2/3
    rep = sigma(scalar_system(1.0), scalar_system(2.0))
    assert rep.sigma == pytest.approx((0.5 + 0.25 - 2.0 / 3.0) / 0.5, rel=1e-13)


def test_sigma_rejects_unstable_reduced(siso50):
    with pytest.raises(UnstableSystemError):
        sigma(siso50, scalar_system(-0.5))


def test_sigma_grid_estimate_is_flagged():
    sys = random_stable_system(20, seed=2)
    red = irka(sys, IrkaConfig(4, itmax=50)).model
    exact = sigma(sys, red)
    approx = sigma(sys, red, method=H2Method.GRID, grid=np.logspace(-4, 4, 4000))
    assert approx.approximate and approx.method is H2Method.GRID
    assert approx.sigma == pytest.approx(exact.sigma, rel=1e-2)
    # beyond the dense cap the grid is chosen automatically
    auto = sigma(sys, red, cap=10, grid=np.logspace(-4, 4, 4000))
    assert auto.approximate


def test_ml_residuals_vanish_for_exact_model(siso50, mimo40):
    for sys in siso50, mimo40:
        rep = check_meier_luenberger(sys, ReducedModel(sys))
        assert rep.max_residual <= 1e-10
    assert check_meier_luenberger(mimo40, ReducedModel(mimo40)).tangential


def test_ml_flags_a_poor_model(siso50):
    rep = check_meier_luenberger(siso50, scalar_system(1.0))
    assert not rep.passes(1e-3)


def test_sample_transfer_first_order():
    tab = sample_transfer(scalar_system(1.0), [0.0, 1.0])
    np.testing.assert_allclose(tab.magnitude, [1.0, 1 / math.sqrt(2)], rtol=1e-15)
    assert tab.error is None


def test_sample_transfer_with_other():
    tab = sample_transfer(scalar_system(1.0), [0.0, 2.0], other=scalar_system(2.0))
    np.testing.assert_allclose(tab.magnitude_other, [0.5, 1 / math.sqrt(8)], rtol=1e-15)
    # 1/(s+1) - 1/(s+2) = 1/((s+1)(s+2))
    np.testing.assert_allclose(tab.error, [0.5, 1 / math.sqrt(5 * 8)], rtol=1e-14)
