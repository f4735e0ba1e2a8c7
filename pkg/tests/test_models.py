import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import OU_BOX, all_families
from mfl import oracles
from mfl.errors import DomainError, ShapeError
from mfl.models import (
    DiffusionSpec,
    DoubleLayer,
    EmpiricalMeasure,
    GenLinear,
    McKeanOU,
    NonlinearF,
    ParamBox,
    drift_eval,
    drift_grad_theta,
    kernel_convolve,
    make_model,
    validate_theta,
)
from mfl.kernels import get_kernel

WIDE_OU = ParamBox([0.5, -10.0, -1.0], [2.0, 10.0, 0.4])


def test_ou_drift_without_interaction():
    model = McKeanOU(ParamBox([0.5, 0.0, -1.0], [2.0, 10.0, 0.0]))
    assert drift_eval(model, [1, 5, 0], 0.0, [2.0], [[-3.0], [9.0]])[0] == pytest.approx(7.0)


def test_ou_drift_at_measure_mean():
    # x at the mean of nu: only theta_1 x + theta_2 remains
    model = McKeanOU(ParamBox([0.5, -1.0, 1.5], [1.0, 1.0, 3.0]))
    assert drift_eval(model, [1, 0, 2], 0.0, [2.0], [[2.0]])[0] == pytest.approx(2.0)


def test_gen_linear_hand_convolution():
    model = GenLinear(ParamBox([0.0, 0.0], [2.0, 2.0]), f="identity", g="identity")
    assert drift_eval(model, [1, 1], 0.0, [1.0], [[0.0], [2.0]])[0] == pytest.approx(1.0)


def test_ou_gradient_by_hand():
    model = McKeanOU(ParamBox([0.5, -5.0, 1.5], [1.0, 5.0, 5.0]))
    nu = [[0.0], [2.0]]
    g = drift_grad_theta(model, [0.7, 1, 2], 0.0, [3.0], nu)
    np.testing.assert_allclose(g, [[3.0, 1.0, -2.0]])
    g2 = drift_grad_theta(model, [0.9, 0, 4], 0.0, [3.0], nu)
    np.testing.assert_array_equal(g, g2)


def test_double_layer_gradient_vanishes_at_origin():
    model = DoubleLayer(ParamBox([0.5, 0.3, 0.5, 1.5], [2.0, 0.8, 2.0, 3.0]))
    g = drift_grad_theta(model, [1, 0.5, 1, 2], 0.0, [0.0], [[0.0]])
    np.testing.assert_array_equal(g, np.zeros((1, 4)))


def test_kernel_convolve_examples():
    gauss = get_kernel("gaussian")
    assert kernel_convolve(gauss, [[1.5]], [0.2]) == pytest.approx(np.exp(-1.3**2))
    assert kernel_convolve(gauss, [[-1.0], [1.0]], [0.0]) == pytest.approx(np.exp(-1.0))
    assert kernel_convolve(get_kernel("zero"), [[1.0], [3.0]], [0.0]) == 0.0
    assert kernel_convolve(lambda u: np.exp(-u * u), [[-1.0], [1.0]], [0.0]) == pytest.approx(np.exp(-1.0))


def test_empty_measure_rejected():
    with pytest.raises(DomainError):
        EmpiricalMeasure(np.zeros((0, 1)))


def test_validate_reports():
    model = McKeanOU(ParamBox([0.5, -1.0, 2.0], [1.0, 1.0, 3.0]))
    assert validate_theta(model, [0.7, 0.0, 2.5]).ok
    report = validate_theta(model, [0.7, 0.0, 0.7])
    assert not report.ok
    assert any("theta_3" in v for v in report.violations)


def test_double_layer_equal_ranges_rejected():
    with pytest.raises(DomainError, match="theta_2 and theta_4"):
        DoubleLayer(ParamBox([0.5, 0.5, 0.5, 0.5], [2.0, 2.0, 2.0, 2.0]))
    model = DoubleLayer(ParamBox([0.5, 0.5, 0.5, 1.5], [2.0, 1.0, 2.0, 3.0]))
    assert not validate_theta(model, [1, 1, 1, 1]).ok


def test_ou_box_constraints():
    with pytest.raises(DomainError, match="contains 0"):
        McKeanOU(ParamBox([-1.0, 0.0, 1.0], [1.0, 1.0, 2.0]))
    with pytest.raises(DomainError, match="intersect"):
        McKeanOU(ParamBox([-2.0, 0.0, -1.5], [-1.0, 1.0, 2.0]))


def test_domain_and_shape_errors():
    model = McKeanOU(OU_BOX)
    with pytest.raises(DomainError):
        drift_eval(model, [5.0, 0.0, 0.0], 0.0, [0.0], [[0.0]])
    with pytest.raises(ShapeError):
        drift_eval(model, [-1.0, 0.0], 0.0, [0.0], [[0.0]])
    with pytest.raises(ShapeError):
        drift_eval(model, [-1.0, 0.0, 0.5], 0.0, [0.0, 1.0], [[0.0]])
    with pytest.raises(KeyError):
        make_model("nope", OU_BOX)


def test_diffusion_root():
    sigma = np.array([[1.0, 0.0], [0.5, 2.0]])
    spec = DiffusionSpec(sigma)
    np.testing.assert_allclose(spec.c_inv_sqrt @ spec.c @ spec.c_inv_sqrt.T, np.eye(2), atol=1e-12)
    lo, hi = spec.eig_bounds
    assert 0 < lo <= hi


def test_param_box_edges_and_clip():
    box = ParamBox([0.0, 0.0], [1.0, 2.0])
    assert len(list(box.edges())) == 4
    clipped, active = box.clip([-1.0, 1.0])
    np.testing.assert_array_equal(clipped, [0.0, 1.0])
    np.testing.assert_array_equal(active, [True, False])
    with pytest.raises(DomainError):
        ParamBox([1.0], [0.0])


@pytest.mark.parametrize("model,theta", all_families(), ids=lambda v: getattr(v, "family", ""))
def test_drift_matches_loop_oracle(model, theta):
    rng = np.random.default_rng(0)
    atoms = rng.standard_normal((7, 1))
    x = rng.standard_normal((5, 1))
    kw = {}
    if model.family == "gen_linear":
        kw = {"f": "tanh", "g": "gaussian"}
    got = model.drift(theta, 0.0, x, atoms)[:, 0]
    ref = [oracles.drift(model.family, list(theta), float(xi), list(atoms[:, 0]), **kw) for xi in x[:, 0]]
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gradient_vs_finite_differences(seed):
    rng = np.random.default_rng(seed)
    for model, _ in all_families():
        lo, hi = model.box.lower, model.box.upper
        theta = lo + (hi - lo) * (0.05 + 0.9 * rng.random(model.p))
        x = rng.standard_normal((1, 1)) * 2
        atoms = rng.standard_normal((int(rng.integers(1, 6)), 1))
        g = model.grad(theta, 0.0, x, atoms)[0, 0]
        fd = np.empty(model.p)
        for k in range(model.p):
            e = np.zeros(model.p)
            e[k] = 1e-5
            fd[k] = (model.drift(theta + e, 0.0, x, atoms) - model.drift(theta - e, 0.0, x, atoms))[0, 0] / 2e-5
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1.0)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_linear_families_affine_in_theta(a, b, seed):
    rng = np.random.default_rng(seed)
    atoms = rng.standard_normal((4, 1))
    x = rng.standard_normal((3, 1))
    for model, _ in all_families()[:2]:
        t1, t2 = rng.standard_normal(model.p), rng.standard_normal(model.p)
        lhs = model.drift_grad(a * t1 + b * t2, 0.0, x, atoms, False)[0]
        rhs = a * model.drift_grad(t1, 0.0, x, atoms, False)[0] + b * model.drift_grad(t2, 0.0, x, atoms, False)[0]
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    atoms = rng.standard_normal((9, 1))
    x = rng.standard_normal((4, 1))
    perm = rng.permutation(9)
    for model, theta in all_families():
        np.testing.assert_allclose(model.drift(theta, 0.0, x, atoms), model.drift(theta, 0.0, x, atoms[perm]),
                                   rtol=1e-12, atol=1e-14)


def test_lipschitz_in_space_is_finite():
    atoms = np.linspace(-2, 2, 11)[:, None]
    x = np.linspace(-5, 5, 401)[:, None]
    for model, theta in all_families():
        b = model.drift(theta, 0.0, x, atoms)[:, 0]
        slopes = np.abs(np.diff(b)) / np.diff(x[:, 0])
        assert np.isfinite(slopes.max()) and slopes.max() < 50


def test_double_layer_higher_dimension():
    model = DoubleLayer(ParamBox([0.5, 0.3, 0.5, 1.5], [2.0, 0.8, 2.0, 3.0]), d=2)
    rng = np.random.default_rng(1)
    atoms = rng.standard_normal((6, 2))
    x = rng.standard_normal((3, 2))
    theta = np.array([1.0, 0.5, 1.0, 2.0])
    b = model.drift(theta, 0.0, x, atoms)
    ref = np.zeros_like(b)
    for i in range(3):
        for y in atoms:
            r = x[i] - y
            r2 = r @ r
            ref[i] += 2 * r * (theta[0] * theta[1] * np.exp(-theta[1] * r2) - theta[2] * theta[3] * np.exp(-theta[3] * r2))
    np.testing.assert_allclose(b, ref / 6, rtol=1e-12)


def test_nonlinear_measure_flag():
    assert not NonlinearF(ParamBox([0.2], [3.0])).measure_linear
    assert McKeanOU(OU_BOX).linear
