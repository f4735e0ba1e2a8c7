"""Discretised Girsanov log-likelihood, score and Fisher information.

All drift and measure evaluations use the left endpoint of each step (Ito
convention).  The log-likelihood is the sum over particles; divide by ``N``
(``LikelihoodValue.normalized``) for the per-particle scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from mfl._linalg import degeneracy_threshold, is_degenerate
from mfl.errors import DomainError, NumericError, ShapeError
from mfl.simulate import OUMoments, ou_mean, ou_variance

EMPIRICAL = "empirical_over_N"
LIMIT = "limit"


@dataclass(frozen=True)
class FisherMatrix:
    matrix: np.ndarray
    kind: str = EMPIRICAL

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ShapeError(f"Fisher matrix must be square, got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise NumericError("Fisher matrix has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(mat))))
        if np.max(np.abs(mat - mat.T)) > 1e-12 * scale:
            raise NumericError("Fisher matrix is not symmetric")
        mat = 0.5 * (mat + mat.T)
        if np.linalg.eigvalsh(mat)[0] < -1e-10 * scale:
            raise NumericError("Fisher matrix is not positive semi-definite")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    @property
    def p(self):
        return self.matrix.shape[0]

    @property
    def det(self):
        return float(np.linalg.det(self.matrix))

    @property
    def threshold(self):
        return float(degeneracy_threshold(self.matrix))

    @property
    def degenerate(self):
        return is_degenerate(self.matrix)

    def eigvals(self):
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class LikelihoodValue:
    value: float
    theta: tuple
    N: int
    m: int

    @property
    def normalized(self):
        return self.value / self.N

    def __float__(self):
        return float(self.value)


def _terms(model, theta, paths, want_grad):
    if paths.d != model.d:
        raise ShapeError(f"paths are {paths.d}-dimensional, model is {model.d}-dimensional")
    b, g = model.path_terms(theta, paths.data, paths.grid.times, want_grad)
    return b, g, paths.increments()


def _finite(value, what):
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite {what}")
    return value


def _loglik_value(model, theta, paths):
    b, _, dx = _terms(model, theta, paths, want_grad=False)
    diff = model.diffusion
    dt = paths.grid.dt
    if diff.is_identity:
        val = np.sum(b * dx) - 0.5 * dt * np.sum(b * b)
    else:
        cb = b @ diff.c_inv
        sb = b @ diff.c_inv_sqrt
        val = np.sum(cb * dx) - 0.5 * dt * np.sum(sb * sb)
    return float(_finite(val, "log-likelihood"))


def log_likelihood_discrete(model, theta, paths):
    """``sum_i sum_j (c^{-1} b)^T dX - |c^{-1/2} b|^2 dt / 2`` at the left endpoints."""
    theta = model.check(theta)
    return LikelihoodValue(_loglik_value(model, theta, paths), tuple(theta), paths.N, paths.m)


def _score(model, theta, paths):
    b, g, dx = _terms(model, theta, paths, want_grad=True)
    resid = dx - b * paths.grid.dt
    if not model.diffusion.is_identity:
        resid = resid @ model.diffusion.c_inv
    return _finite(np.einsum("imkq,imk->q", g, resid), "score")


def score_discrete(model, theta, paths):
    """Exact theta-gradient of ``log_likelihood_discrete``."""
    theta = model.check(theta)
    return _score(model, theta, paths)


def loglik_and_score(model, theta, paths):
    """Value and gradient from one pass over the paths (no validation)."""
    b, g, dx = _terms(model, theta, paths, want_grad=True)
    dt = paths.grid.dt
    diff = model.diffusion
    if diff.is_identity:
        val = np.sum(b * dx) - 0.5 * dt * np.sum(b * b)
        resid = dx - b * dt
    else:
        sb = b @ diff.c_inv_sqrt
        val = np.sum((b @ diff.c_inv) * dx) - 0.5 * dt * np.sum(sb * sb)
        resid = (dx - b * dt) @ diff.c_inv
    grad = np.einsum("imkq,imk->q", g, resid)
    return float(_finite(val, "log-likelihood")), _finite(grad, "score")


def log_likelihood_ratio(model, theta, theta2, paths):
    """``loglik(theta2) - loglik(theta)`` on the same data."""
    theta = model.check(theta)
    theta2 = model.check(theta2)
    return _loglik_value(model, theta2, paths) - _loglik_value(model, theta, paths)


def _gram(model, g):
    """``sum_k grad(c^{-1/2} b)^k grad(c^{-1/2} b)^{k,T}`` for each leading index."""
    if not model.diffusion.is_identity:
        g = np.einsum("lk,...kq->...lq", model.diffusion.c_inv_sqrt, g)
    return g


def empirical_fisher(model, theta, paths):
    """``(1/N) sum_i sum_j sum_k dt grad(c^{-1/2} b)^k grad(c^{-1/2} b)^{k,T}`` along the data."""
    theta = model.check(theta)
    _, g, _ = _terms(model, theta, paths, want_grad=True)
    g = _gram(model, g)
    mat = np.einsum("imkq,imkr->qr", g, g) * paths.grid.dt / paths.N
    return FisherMatrix(mat, EMPIRICAL)


def limit_fisher(model, theta, flow):
    """Quadrature of the limit information along a measure flow.

    Trapezoid in time over the flow grid, atom average in space; each
    slice's drift uses that slice as the measure argument.
    """
    theta = model.check(theta)
    if flow.atoms.shape[2] != model.d:
        raise ShapeError("flow dimension does not match the model")
    times = flow.grid.times
    slices = np.empty((times.size, model.p, model.p))
    for j, t in enumerate(times):
        atoms = flow.atoms[j]
        g = _gram(model, model.grad(theta, t, atoms, atoms))
        slices[j] = np.einsum("ikq,ikr->qr", g, g) / atoms.shape[0]
    return FisherMatrix(trapezoid(slices, times, axis=0), LIMIT)


def ou_limit_moments(theta, mean0, var0, grid):
    mom = OUMoments(tuple(theta), mean0, var0)
    return ou_mean(mom, grid.times), ou_variance(mom, grid.times)


def ou_limit_fisher(theta, mean0, var0, grid):
    """Closed-form McKean-OU limit information, trapezoid in time on ``grid``.

    With ``phi = (x, 1, -(x - mean))`` the Gaussian moments give
    ``E[phi phi^T] = [[m2, m1, -Var], [m1, 1, 0], [-Var, 0, Var]]``.
    """
    theta = np.asarray(theta, dtype=float)
    if theta[0] == 0.0 or theta[0] == theta[2]:
        raise DomainError("McKean-OU limit information needs theta_1 != 0 and theta_1 != theta_3")
    means, variances = ou_limit_moments(theta, mean0, var0, grid)
    t = grid.times
    int_m1 = trapezoid(means, t)
    int_m1sq = trapezoid(means**2, t)
    int_var = trapezoid(variances, t)
    horizon = trapezoid(np.ones_like(t), t)
    mat = np.array(
        [
            [int_var + int_m1sq, int_m1, -int_var],
            [int_m1, horizon, 0.0],
            [-int_var, 0.0, int_var],
        ]
    )
    return FisherMatrix(mat, LIMIT)


def ou_fisher_determinant(theta, mean0, var0, grid):
    """``int Var dt * (T int m1^2 dt - (int m1 dt)^2)`` with the same trapezoid rule."""
    means, variances = ou_limit_moments(theta, mean0, var0, grid)
    t = grid.times
    horizon = trapezoid(np.ones_like(t), t)
    return float(trapezoid(variances, t) * (horizon * trapezoid(means**2, t) - trapezoid(means, t) ** 2))
