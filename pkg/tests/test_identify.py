import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import sis_shift_objective
from sparse_compartments.derivatives import exact_derivatives
from sparse_compartments.dictionary import build_dictionary, eval_design
from sparse_compartments.identify import (
    CandidateSolution,
    IdentifyOptions,
    NullspaceBasis,
    SparsificationError,
    assemble_problem,
    build_constraint_matrix,
    build_projected_basis,
    constrained_least_squares,
    devectorize,
    identify_model,
    nullspace,
    sparsify,
    vectorize,
)
from sparse_compartments.lp import LpOptions
from sparse_compartments.simulate import Trajectory, integrate


def _problem(model, traj):
    return assemble_problem(model.dictionary, traj.states, exact_derivatives(model, traj).values)


def _stages(problem, rank_tol=1e-8):
    cand = constrained_least_squares(problem, rank_tol)
    block, _ = vectorize(problem.design, problem.targets)
    b = build_projected_basis(nullspace(block, rank_tol), nullspace(problem.constraint, rank_tol))
    return cand, block, b


def test_constraint_matrix_small():
    np.testing.assert_array_equal(build_constraint_matrix(2, 2), [[1, 0, 1, 0], [0, 1, 0, 1]])


def test_constraint_matrix_sir_shape(sir_model):
    c = build_constraint_matrix(10, 3)
    assert c.shape == (10, 30)
    assert np.all(c.sum(axis=1) == 3) and np.all(c.sum(axis=0) == 1)
    for i in range(10):
        assert set(np.flatnonzero(c[i])) == {i, i + 10, i + 20}
    w_vec = sir_model.coeffs.reshape(-1, order="F")
    assert not np.any(c @ w_vec)


def test_vectorize_single_row():
    block, y = vectorize([[1.0, 2.0]], [[3.0, 4.0]])
    np.testing.assert_array_equal(block, [[1, 2, 0, 0], [0, 0, 1, 2]])
    np.testing.assert_array_equal(y, [3, 4])


def test_vectorize_matches_dense_product():
    rng = np.random.default_rng(0)
    phi, w = rng.normal(size=(5, 3)), rng.normal(size=(3, 2))
    block, _ = vectorize(phi, np.zeros((5, 2)))
    w_vec = np.concatenate([w[:, 0], w[:, 1]])
    prod = phi @ w
    np.testing.assert_allclose(block @ w_vec, np.concatenate([prod[:, 0], prod[:, 1]]), atol=1e-14)


def test_vectorize_zero_targets():
    _, y = vectorize(np.ones((3, 2)), np.zeros((3, 4)))
    assert y.shape == (12,) and not np.any(y)


@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 4)), elements=st.floats(-10, 10)))
def test_devectorize_round_trip(w):
    _, w_vec = vectorize(np.zeros((w.shape[0], 1)), w)
    np.testing.assert_array_equal(devectorize(w_vec, w.shape[0], w.shape[1]), w)


def test_nullspace_identity():
    assert nullspace(np.eye(4), 1e-8).dim == 0


def test_nullspace_row_of_ones():
    basis = nullspace([[1.0, 1.0]], 1e-8)
    assert basis.dim == 1
    v = basis.columns[:, 0]
    np.testing.assert_allclose(np.abs(v), [2**-0.5, 2**-0.5], atol=1e-15)
    assert v[0] * v[1] < 0


def test_nullspace_zero_matrix():
    assert nullspace(np.zeros((3, 4)), 1e-8).dim == 4


def test_nullspace_tolerance_range():
    with pytest.raises(ValueError):
        nullspace(np.eye(2), 0.0)


@settings(max_examples=30, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-5, 5)))
def test_nullspace_basis_properties(a):
    basis = nullspace(a, 1e-8)
    n = basis.columns
    np.testing.assert_allclose(n.T @ n, np.eye(basis.dim), atol=1e-10)
    norm = np.linalg.norm(a, 2)
    for j in range(basis.dim):
        assert np.linalg.norm(a @ n[:, j]) <= 1e-8 * norm + 1e-300


def test_sis_design_rank(sis_model, sis_traj):
    phi = eval_design(sis_model.dictionary, sis_traj.states).values
    basis = nullspace(phi, 1e-8)
    # independent oracle: pivoted QR diagonal
    r = scipy.linalg.qr(phi, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(r))
    qr_rank = int(np.sum(diag > 1e-8 * diag[0]))
    assert basis.dim == 6 - qr_rank == 3
    # the three algebraic dependencies F (S + I - 1) = 0 lie in the computed nullspace
    for f in ([-1, 1, 1, 0, 0, 0], [0, -1, 0, 1, 1, 0], [0, 0, -1, 0, 1, 1]):
        v = np.array(f, float) / np.linalg.norm(f)
        np.testing.assert_allclose(basis.columns @ (basis.columns.T @ v), v, atol=1e-9)


def test_constrained_ls_sir(sir_model, sir_traj):
    cand = constrained_least_squares(_problem(sir_model, sir_traj))
    assert cand.residual_norm <= 1e-10
    assert cand.max_row_sum_violation <= 1e-10


def test_constrained_ls_zero_targets(sir_traj):
    d = build_dictionary(3, 2)
    cand = constrained_least_squares(assemble_problem(d, sir_traj.states, np.zeros((2001, 3))))
    assert not np.any(cand.w_vec)


def test_constrained_ls_sis_not_unique(sis_model, sis_traj):
    cand = constrained_least_squares(_problem(sis_model, sis_traj))
    assert cand.residual_norm <= 1e-10
    assert np.max(np.abs(devectorize(cand.w_vec, 6, 2) - sis_model.coeffs)) > 1e-3


def test_constrained_ls_underdetermined():
    d = build_dictionary(3, 2)
    states = np.array([[0.5, 0.3, 0.2], [0.4, 0.4, 0.2]])
    targets = np.array([[-0.1, 0.05, 0.05], [0.0, -0.1, 0.1]])
    cand = constrained_least_squares(assemble_problem(d, states, targets))
    assert cand.residual_norm <= 1e-12 and cand.max_row_sum_violation <= 1e-12


def test_projected_basis_empty_constraint_nullspace():
    nd = nullspace(np.zeros((2, 4)), 1e-8)
    nc = NullspaceBasis(np.zeros((4, 0)), 1e-8)
    assert build_projected_basis(nd, nc).shape == (4, 0)


def test_projected_basis_full_design_nullspace():
    nd = nullspace(np.zeros((3, 4)), 1e-8)
    nc = nullspace(build_constraint_matrix(2, 2), 1e-8)
    np.testing.assert_allclose(build_projected_basis(nd, nc), nc.columns, atol=1e-14)


def test_projected_basis_dimension_mismatch():
    with pytest.raises(ValueError):
        build_projected_basis(nullspace(np.zeros((1, 3)), 1e-8), nullspace(np.zeros((1, 4)), 1e-8))


def test_projected_basis_in_design_nullspace(sis_model, sis_traj):
    _, block, b = _stages(_problem(sis_model, sis_traj))
    assert b.shape == (12, 6)
    col_max = np.abs(block).max(axis=0)
    assert np.max(np.abs(block @ b)) <= 1e-10 * col_max.max()


def test_projected_basis_stays_conservative(sir_model, sir_traj):
    problem = _problem(sir_model, sir_traj)
    _, _, b = _stages(problem)
    assert np.max(np.abs(problem.constraint @ b)) <= 1e-12


def test_sparsify_empty_basis():
    cand = CandidateSolution(np.array([1.0, -2.0]), 0.0, 0.0)
    out = sparsify(cand, np.zeros((2, 0)))
    np.testing.assert_array_equal(out.w_vec, cand.w_vec)
    assert out.lp_status == "optimal" and out.l1_norm == 3.0


def test_sparsify_sir_recovers_truth(sir_model, sir_traj):
    cand, _, b = _stages(_problem(sir_model, sir_traj))
    out = sparsify(cand, b)
    assert out.lp_status == "optimal"
    np.testing.assert_allclose(devectorize(out.w_vec, 10, 3), sir_model.coeffs, atol=1e-8)
    assert out.l1_norm == pytest.approx(np.abs(out.w_vec).sum(), rel=1e-12)


def test_sparsify_uncompressed_basis_agrees(sir_model, sir_traj):
    cand, _, b = _stages(_problem(sir_model, sir_traj))
    out = sparsify(cand, b, compress_basis=False)
    assert out.z.shape == (20,)
    np.testing.assert_allclose(devectorize(out.w_vec, 10, 3), sir_model.coeffs, atol=1e-8)


def test_sparsify_sis_minimizer(sis_model, sis_traj):
    cand, _, b = _stages(_problem(sis_model, sis_traj))
    out = sparsify(cand, b)
    w = devectorize(out.w_vec, 6, 2)
    d = sis_model.dictionary
    expected = np.zeros(6)
    expected[d.index((1, 1))] = -1.5
    expected[d.index((0, 2))] = 0.5
    np.testing.assert_allclose(w[:, 0], expected, atol=1e-6)
    np.testing.assert_allclose(w[:, 1], -w[:, 0], atol=1e-12)
    assert out.l1_norm == pytest.approx(4.0, abs=1e-6)
    # independent route: the three-parameter shift family solved by scipy
    res = scipy.optimize.minimize(lambda p: sis_shift_objective(*p), [0.1, 0.1, 0.1], method="Powell",
                                  options={"xtol": 1e-10, "ftol": 1e-12})
    assert 2 * res.fun == pytest.approx(4.0, abs=1e-6)
    assert sis_shift_objective(0.0, 0.0, 0.5) == 2.0


def test_sparsify_reports_lp_failure(sir_model, sir_traj):
    cand, _, b = _stages(_problem(sir_model, sir_traj))
    out = sparsify(cand, b, LpOptions(max_iterations=1))
    assert out.lp_status == "iteration_limit"
    np.testing.assert_array_equal(out.w_vec, cand.w_vec)


@settings(max_examples=40, deadline=None)
@given(
    arrays(float, 6, elements=st.floats(-3, 3)),
    arrays(float, (6, 3), elements=st.floats(-2, 2)),
)
def test_sparsify_never_increases_l1(w, b):
    cand = CandidateSolution(w, 0.0, 0.0)
    out = sparsify(cand, b)
    assert out.lp_status == "optimal"
    assert out.l1_norm <= np.abs(w).sum() + 1e-9
    # the correction stays in range(B)
    corr = out.w_vec - w
    proj = b @ np.linalg.lstsq(b, corr, rcond=None)[0]
    np.testing.assert_allclose(proj, corr, atol=1e-8)


@pytest.mark.parametrize("method", ["exact", "fd"])
def test_residual_preserved(sir_model, sir_traj, method):
    res = identify_model(sir_traj, sir_model.dictionary, method, truth=sir_model)
    block, y = vectorize(res.problem.design, res.problem.targets)
    before = np.linalg.norm(y - block @ res.candidate.w_vec)
    after = np.linalg.norm(y - block @ res.sparse.w_vec)
    assert after <= before + 1e-8 * np.linalg.norm(y)
    assert res.sparse.l1_norm <= np.abs(res.candidate.w_vec).sum() + 1e-9


def test_identify_model_sir_exact(sir_model, sir_traj):
    model, sparse, cand = identify_model(sir_traj, sir_model.dictionary, "exact", truth=sir_model)
    est = integrate(model, sir_traj.states[0], 100.0, 0.05)
    assert np.sqrt(np.mean((est.states - sir_traj.states) ** 2)) <= 1e-6
    assert model.compartments == ("S", "I", "R")


def test_identify_model_sir_fd(sir_model, sir_traj):
    res = identify_model(sir_traj, sir_model.dictionary, "fd")
    est = integrate(res.model, sir_traj.states[0], 100.0, 0.05)
    assert np.sqrt(np.mean((est.states - sir_traj.states) ** 2)) <= 1e-2
    assert res.design_nullity == 12 and res.constraint_nullity == 20


def test_identify_constant_trajectory():
    tr = Trajectory(np.arange(50) * 0.1, np.tile([0.7, 0.2, 0.1], (50, 1)), 0.1)
    res = identify_model(tr, build_dictionary(3, 2), "fd")
    np.testing.assert_allclose(res.model.coeffs, 0.0, atol=1e-12)


def test_identify_dimension_mismatch(sir_traj):
    with pytest.raises(ValueError):
        identify_model(sir_traj, build_dictionary(2, 2), "fd")


def test_identify_raises_on_lp_failure(sir_model, sir_traj):
    opts = IdentifyOptions(lp=LpOptions(max_iterations=1))
    with pytest.raises(SparsificationError):
        identify_model(sir_traj, sir_model.dictionary, "exact", opts, truth=sir_model)
