import numpy as np
import pytest

from sparse_compartments.derivatives import derivatives, exact_derivatives, fd_derivatives
from sparse_compartments.dictionary import build_dictionary
from sparse_compartments.simulate import SIR_X0, ModelSpec, Trajectory, integrate, make_sir


def test_exact_zero_model(sir_traj):
    m = ModelSpec(build_dictionary(3, 2), np.zeros((10, 3)))
    d = exact_derivatives(m, sir_traj)
    assert d.method == "exact" and d.values.shape == (2001, 3)
    assert not np.any(d.values)


def test_exact_sir_by_hand():
    tr = Trajectory(np.array([0.0, 1.0]), np.array([[0.5, 0.5, 0.0], [0.2, 0.3, 0.5]]), 1.0)
    d = exact_derivatives(make_sir(0.2, 0.1), tr)
    np.testing.assert_allclose(d.values[0], [-0.05, 0.0, 0.05], atol=1e-15)
    np.testing.assert_allclose(d.values[1], [-0.2 * 0.06, 0.2 * 0.06 - 0.03, 0.03], atol=1e-15)
    np.testing.assert_array_equal(d.aligned_rows, [0, 1])


def test_exact_rows_sum_to_zero(sir_model, sir_traj):
    d = exact_derivatives(sir_model, sir_traj)
    assert np.max(np.abs(d.values.sum(axis=1))) < 1e-15


def test_exact_dimension_mismatch(sir_traj):
    with pytest.raises(ValueError):
        exact_derivatives(ModelSpec(build_dictionary(2, 2), np.zeros((6, 2))), sir_traj)


def test_fd_constant():
    tr = Trajectory(np.arange(4) * 0.1, np.ones((4, 2)), 0.1)
    d = fd_derivatives(tr)
    assert d.values.shape == (3, 2) and not np.any(d.values)
    assert d.method == "forward_difference"
    np.testing.assert_array_equal(d.aligned_rows, [0, 1, 2])


def test_fd_two_points():
    d = fd_derivatives(Trajectory(np.array([0.0, 0.5]), np.array([[0.0], [1.0]]), 0.5))
    np.testing.assert_array_equal(d.values, [[2.0]])


def test_fd_exact_on_linear_data():
    t = np.arange(11) * 0.25
    d = fd_derivatives(Trajectory(t, 3 * t, 0.25))
    np.testing.assert_array_equal(d.values, np.full((10, 1), 3.0))


def test_fd_row_sums_conservative(sir_traj):
    d = fd_derivatives(sir_traj)
    assert np.max(np.abs(d.values.sum(axis=1))) <= 1e-12 * np.max(np.abs(sir_traj.states))


def test_fd_first_order():
    m = make_sir(0.2, 0.1)
    gaps = []
    for dt in (0.05, 0.025):
        tr = integrate(m, SIR_X0, 100.0, dt, 1e-10, 1e-12)
        gaps.append(np.max(np.abs(fd_derivatives(tr).values - exact_derivatives(m, tr).values[:-1])))
    assert 1.5 <= gaps[0] / gaps[1] <= 2.5


def test_dispatch(sir_model, sir_traj):
    assert derivatives(sir_traj, "fd").method == "forward_difference"
    assert derivatives(sir_traj, "exact", sir_model).method == "exact"
    with pytest.raises(ValueError):
        derivatives(sir_traj, "exact")
    with pytest.raises(ValueError):
        derivatives(sir_traj, "centered")
