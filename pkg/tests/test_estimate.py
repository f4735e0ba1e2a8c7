import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import OU_BOX, THETA_OU
from mfl import oracles
from mfl.errors import SingularMatrixError, UnsupportedModelError
from mfl.estimate import (
    LINEAR_SOLVE,
    QUASI_NEWTON,
    assemble_normal_equations,
    mle_linear,
    mle_numeric,
    standardized_error,
)
from mfl.likelihood import FisherMatrix, empirical_fisher, score_discrete
from mfl.models import DoubleLayer, GenLinear, McKeanOU, NonlinearF, ParamBox
from mfl.simulate import InitialLaw, ParticlePaths, TimeGrid, simulate_particles

WIDE_OU = McKeanOU(ParamBox([-20.0, -20.0, 0.0], [-0.01, 20.0, 20.0]))


def ou_paths(N=2000, m=100, seed=1, theta=THETA_OU):
    # mean 0 start: at mean 1 the flow is stationary in mean and theta_1, theta_3 are not separable
    return simulate_particles(McKeanOU(OU_BOX), theta, N, TimeGrid(1.0, m),
                              InitialLaw("gaussian", mean=0.0, var=0.5), seed)


def test_normal_equations_match_oracle():
    paths = ou_paths(N=30, m=20)
    eq = assemble_normal_equations(McKeanOU(OU_BOX), paths)
    A, B = oracles.normal_equations("mckean_ou", paths.data[:, :, 0], paths.grid.dt, 1.0, None, None)
    np.testing.assert_allclose(eq.A, A, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(eq.B, B, rtol=1e-12, atol=1e-14)


def test_normal_matrix_is_empirical_fisher():
    # for drift linear in theta the gradient does not depend on theta
    paths = ou_paths(N=50, m=30)
    ou = McKeanOU(OU_BOX)
    eq = assemble_normal_equations(ou, paths)
    np.testing.assert_allclose(eq.A, empirical_fisher(ou, THETA_OU, paths).matrix, rtol=1e-12)


def test_nonlinear_family_rejected_by_linear_solver():
    model = NonlinearF(ParamBox([0.2], [3.0]))
    paths = simulate_particles(model, [1.0], 20, TimeGrid(1.0, 10), InitialLaw("gaussian", var=1.0), 0)
    with pytest.raises(UnsupportedModelError):
        mle_linear(model, paths)


def test_singular_normal_matrix_raises():
    # all particles at one point for all time: x, 1 and x - mean are collinear
    data = np.zeros((5, 11))
    paths = ParticlePaths(data, TimeGrid(1.0, 10))
    with pytest.raises(SingularMatrixError):
        mle_linear(McKeanOU(OU_BOX), paths)


def test_single_particle_corner_is_singular():
    # N = 1: x - mean(x) vanishes identically, so theta_3 is not identified
    paths = ou_paths(N=1, m=50)
    with pytest.raises(SingularMatrixError):
        mle_linear(McKeanOU(OU_BOX), paths)


def test_linear_mle_zeroes_score():
    paths = ou_paths()
    res = mle_linear(WIDE_OU, paths)
    assert res.method == LINEAR_SOLVE and res.converged
    score = score_discrete(WIDE_OU, res.theta_hat, paths)
    assert np.max(np.abs(score)) / paths.N < 1e-10


def test_linear_mle_near_truth():
    res = mle_linear(WIDE_OU, ou_paths(N=2000, m=200))
    assert np.max(np.abs(res.theta_hat - THETA_OU)) < 0.5


def test_numeric_agrees_with_linear():
    paths = ou_paths()
    lin = mle_linear(WIDE_OU, paths)
    num = mle_numeric(WIDE_OU, paths, n_starts=3)
    assert num.method == QUASI_NEWTON
    np.testing.assert_allclose(num.theta_hat, lin.theta_hat, atol=1e-6)
    assert num.loglik == pytest.approx(lin.loglik, abs=1e-10)


def test_gen_linear_numeric_agrees_with_linear():
    model = GenLinear(ParamBox([-10.0, -10.0], [10.0, 10.0]), f="tanh", g="gaussian")
    paths = simulate_particles(model, [0.5, -1.0], 200, TimeGrid(1.0, 50), InitialLaw("gaussian", var=1.0), 2)
    lin = mle_linear(model, paths)
    num = mle_numeric(model, paths, n_starts=2)
    np.testing.assert_allclose(num.theta_hat, lin.theta_hat, atol=1e-6)


def test_out_of_box_solution_is_clipped_and_flagged():
    # a tight box that excludes the unconstrained optimum in theta_2
    model = McKeanOU(ParamBox([-3.0, 1.5, -0.1], [-0.2, 5.0, 3.0]))
    res = mle_linear(model, ou_paths())
    assert not res.converged
    assert res.theta_hat[1] == 1.5
    assert res.boundary_flags() == "010"
    assert "clipped" in res.message


def test_numeric_reports_active_bounds():
    model = McKeanOU(ParamBox([-3.0, 1.5, -0.1], [-0.2, 5.0, 3.0]))
    res = mle_numeric(model, ou_paths(), n_starts=2)
    # theta_2 is pinned at its lower bound; the flags mark every bound whose gradient pushes outward
    assert res.boundary_active[1] and res.theta_hat[1] == 1.5
    grad = score_discrete(model, res.theta_hat, ou_paths()) / 2000
    free = ~res.boundary_active
    assert np.all(np.abs(grad[free]) < 1e-6)
    assert res.converged


def test_translation_equivariance():
    # shifting every path by c maps (t1, t2, t3) to (t1, t2 - t1 c, t3)
    paths = ou_paths()
    c = 0.7
    shifted = ParticlePaths(paths.data + c, paths.grid)
    a = mle_linear(WIDE_OU, paths).theta_hat
    b = mle_linear(WIDE_OU, shifted).theta_hat
    np.testing.assert_allclose(b, [a[0], a[1] - a[0] * c, a[2]], atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.permutations(range(12)))
def test_particle_relabelling_invariance(perm):
    paths = ou_paths(N=12, m=20, seed=3)
    permuted = ParticlePaths(paths.data[list(perm)], paths.grid)
    a = mle_linear(WIDE_OU, paths).theta_hat
    b = mle_linear(WIDE_OU, permuted).theta_hat
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_double_layer_numeric_mle():
    box = ParamBox([0.5, 0.3, 0.5, 1.5], [2.0, 0.8, 2.0, 3.0])
    model = DoubleLayer(box)
    theta = np.array([1.0, 0.5, 1.0, 2.0])
    paths = simulate_particles(model, theta, 300, TimeGrid(1.0, 50), InitialLaw("gaussian", var=1.0), 5)
    res = mle_numeric(model, paths, n_starts=4)
    assert box.contains(res.theta_hat)
    truth = float(np.sum(score_discrete(model, theta, paths) ** 2))  # finite at the truth
    assert np.isfinite(truth)
    from mfl.likelihood import log_likelihood_discrete
    assert res.loglik >= log_likelihood_discrete(model, theta, paths).normalized - 1e-9
    assert res.converged or res.boundary_active.any()


def test_standardized_error_examples():
    fisher = FisherMatrix(np.diag([4.0, 9.0]))
    z = standardized_error([1.5, 2.0], [1.0, 2.0], 100, fisher)
    np.testing.assert_allclose(z, [10.0 * 2.0 * 0.5, 0.0])
    mat = np.array([[2.0, 1.0], [1.0, 2.0]])
    z = standardized_error([1.0, 1.0], [0.0, 0.0], 1, mat)
    np.testing.assert_allclose(z, [np.sqrt(3.0), np.sqrt(3.0)])


def test_standardized_error_rejects_degenerate_fisher():
    with pytest.raises(SingularMatrixError):
        standardized_error([1.0, 1.0], [0.0, 0.0], 10, np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_error_sharpens_with_N():
    # median error norm should drop by about half per fourfold N
    med = []
    for N in (250, 1000, 4000):
        errs = [np.linalg.norm(mle_linear(WIDE_OU, ou_paths(N=N, m=100, seed=100 + r)).theta_hat - THETA_OU)
                for r in range(20)]
        med.append(np.median(errs))
    ratios = [med[1] / med[0], med[2] / med[1]]
    assert all(0.3 <= r <= 0.8 for r in ratios), ratios
