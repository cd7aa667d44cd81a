import numpy as np
import pytest

from h2mor import DescriptorSystem, eval_transfer
from h2mor.h2 import check_meier_luenberger
from h2mor.irka import InitOption, IrkaConfig, ReducedModel, compute_residue_dirs, irka, project
from h2mor.kernels import SOLVE_COUNTER
from h2mor.krylov import ShiftSet, TangentSet, build_rk_bases
from h2mor.problems import random_stable_system

from conftest import hermite_residuals, random_closed_shifts, scalar_fixed_point_oracle, scalar_system


@pytest.mark.parametrize("seed", range(5))
def test_two_sided_projection_is_hermite(seed):
    rng = np.random.default_rng(seed)
    sys = random_stable_system(int(rng.integers(20, 61)), seed=seed)
    S = random_closed_shifts(rng, int(rng.integers(2, 7)))
    V, W = build_rk_bases(sys, S, count=False)
    r0, r1 = hermite_residuals(sys, project(sys, V, W), S)
    assert r0 <= 1e-8 and r1 <= 1e-6


def test_projection_identity():
    sys = random_stable_system(8, 2, 2, seed=1)
    model = project(sys, np.eye(8), np.eye(8))
    for s in (0.3, 2j):
        np.testing.assert_allclose(eval_transfer(model.system, s).value, eval_transfer(sys, s).value, rtol=1e-12)


def test_projection_onto_unit_vector():
    A = np.diag([-1.0, -2.0, -3.0])
    B = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    C = np.array([[7.0], [8.0], [9.0]])
    sys = DescriptorSystem(A, B, C)
    e1 = np.eye(3)[:, :1]
    red = project(sys, e1, e1).system
    np.testing.assert_array_equal(red.A, [[-1.0]])
    np.testing.assert_array_equal(red.E, [[1.0]])
    np.testing.assert_array_equal(red.B, B[:1])
    np.testing.assert_array_equal(red.C, C[:1])


def test_projection_interpolates_at_build_shifts():
    rng = np.random.default_rng(40)
    sys = random_stable_system(40, seed=40)
    S = ShiftSet([0.5, 1 + 1j, 1 - 1j, 4.0, 7 + 2j, 7 - 2j])
    V, W = build_rk_bases(sys, S, count=False)
    assert V.ncols == 6
    r0, _ = hermite_residuals(sys, project(sys, V, W), S)
    assert r0 <= 1e-8


def test_residues_scalar():
    model = ReducedModel(DescriptorSystem([[-2.0]], [[3.0]], [[4.0]], [[1.0]]))
    vals, left, right = model.pole_residues()
    assert vals[0] == pytest.approx(-2.0)
    assert (left[0] * right[0].conj())[0] == pytest.approx(12.0)
    dirs = compute_residue_dirs(model)
    np.testing.assert_allclose(dirs.b_dirs, [[1.0]])
    np.testing.assert_allclose(dirs.c_dirs, [[1.0]])


def test_residues_diagonal_mimo():
    A = np.diag([-1.0, -3.0])
    B = np.array([[1.0, 2.0], [3.0, -1.0]])
    C = np.array([[2.0, 0.5, 1.0], [-1.0, 4.0, 2.0]])
    vals, left, right = ReducedModel(DescriptorSystem(A, B, C)).pole_residues()
    np.testing.assert_allclose(vals, [-3.0, -1.0])
    # partial fractions: residue at a_i is C[i]^T B[i] (p x m)
    for k, i in enumerate([1, 0]):
        np.testing.assert_allclose(np.outer(left[k], right[k].conj()), np.outer(C[i], B[i]), rtol=1e-12)


def test_residue_expansion_reproduces_transfer(rng):
    sys = random_stable_system(7, 2, 3, seed=9, e_random=True)
    vals, left, right = ReducedModel(sys).pole_residues()
    for _ in range(5):
        s = complex(rng.standard_normal(), rng.standard_normal())
        H = sum(np.outer(l, r.conj()) / (s - lam) for lam, l, r in zip(vals, left, right))
        ref = eval_transfer(sys, s).value
        assert np.linalg.norm(H - ref) <= 1e-9 * np.linalg.norm(ref)


@pytest.mark.parametrize("a", [0.5, 2.0, 7.0])
def test_scalar_system_converges_immediately(a):
    res = irka(scalar_system(a), IrkaConfig(1, tol=1e-12))
    assert res.converged
    assert res.record.n_iters <= 2
    assert res.shifts.values[0] == pytest.approx(a, rel=1e-14)


def test_r1_diagonal_against_scalar_oracle():
    a = np.array([-1.0, -2.0, -5.0])
    sys = DescriptorSystem(np.diag(a), np.ones(3), np.ones(3))
    res = irka(sys, IrkaConfig(1, tol=1e-14))
    assert res.converged
    # Option 1 start: eigenvector of the smallest eigenvalue, i.e. s0 = 1
    s_ref = scalar_fixed_point_oracle(a, np.ones(3), 1.0)
    assert res.shifts.values[0].real == pytest.approx(s_ref, rel=1e-8)
    assert res.shifts.values[0].imag == 0.0


def test_converged_siso_satisfies_first_order_conditions(siso50):
    res = irka(siso50, IrkaConfig(4, tol=1e-12, itmax=500))
    assert res.converged
    ml = check_meier_luenberger(siso50, res.model)
    assert ml.passes(1e-6)
    S = np.sort_complex(res.shifts.values)
    P = np.sort_complex(-np.conj(res.model.poles))
    assert np.linalg.norm(S - P) <= 1e-10 * np.linalg.norm(S)


def test_perturbed_shifts_fail_first_order_check(siso50):
    res = irka(siso50, IrkaConfig(4, tol=1e-12, itmax=500))
    S = res.shifts.values + 1e-2
    V, W = build_rk_bases(siso50, ShiftSet(S), count=False)
    assert not check_meier_luenberger(siso50, project(siso50, V, W)).passes(1e-6)


def test_mimo_tangential_convergence(mimo40):
    res = irka(mimo40, IrkaConfig(5, tol=1e-10, itmax=500))
    assert res.converged
    assert res.tangents is not None and len(res.tangents) == 5
    ml = check_meier_luenberger(mimo40, res.model)
    assert ml.tangential
    assert ml.passes(1e-6)


def test_solve_accounting_option1(siso50):
    c0 = SOLVE_COUNTER.count
    res = irka(siso50, IrkaConfig(4, tol=1e-10))
    rec = res.record
    assert rec.xi_lin == 2 * 4 * rec.n_iters == SOLVE_COUNTER.count - c0
    assert rec.ell_fin == 4
    assert [e.cum_solves for e in rec.entries] == [8 * k for k in range(1, rec.n_iters + 1)]


def test_given_start_counts_startup_solves(siso50):
    S0 = ShiftSet([1.0, 2.0, 5.0])
    res = irka(siso50, IrkaConfig(3, tol=1e-10, init_option=InitOption.GIVEN), init_shifts=S0)
    assert res.record.xi_lin == 2 * 3 * (res.record.n_iters + 1)
    np.testing.assert_array_equal(res.record.initial_shifts, [1.0, 2.0, 5.0])


def test_given_start_requires_shifts(siso50):
    with pytest.raises(ValueError):
        irka(siso50, IrkaConfig(3, init_option="given"))


def test_given_start_mimo_defaults_to_ones(mimo40):
    res = irka(mimo40, IrkaConfig(2, itmax=3, init_option="given"), init_shifts=[1.0, 3.0])
    assert res.record.meta["initial_tangents"] == "ones"


def test_random_start_is_seeded(siso50):
    a = irka(siso50, IrkaConfig(3, init_option="random", seed=4, itmax=5))
    b = irka(siso50, IrkaConfig(3, init_option="random", seed=4, itmax=5))
    np.testing.assert_array_equal(a.shifts.values, b.shifts.values)


def test_itmax_is_a_status_not_an_error(siso50):
    res = irka(siso50, IrkaConfig(4, tol=1e-15, itmax=2))
    assert res.record.status == "itmax"
    assert res.record.n_iters == 2
    assert res.model is not None
    assert "no convergence" in res.record.message


def test_result_unpacks(siso50):
    shifts, V, W, model, record = irka(siso50, IrkaConfig(2, itmax=3))
    assert V.ncols == W.ncols == model.order == 2
    assert record.method == "IRKA"


@pytest.mark.parametrize("kw", [{"r": 0}, {"r": 2, "tol": 0.0}, {"r": 2, "tol": 1.0}, {"r": 2, "itmax": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IrkaConfig(**kw)


def test_tangent_set_ones():
    T = TangentSet.ones(3, 2, 4)
    np.testing.assert_allclose(np.linalg.norm(T.b_dirs, axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(T.c_dirs, axis=1), 1.0)
