"""Maximum likelihood estimation.

Linear-in-theta families solve the normal equations ``A theta = B`` exactly.
Other families maximise the discrete log-likelihood over the parameter box
with L-BFGS-B from several deterministic starting points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from mfl._linalg import require_nondegenerate, sym_power
from mfl.errors import ShapeError, UnsupportedModelError
from mfl.likelihood import FisherMatrix, loglik_and_score
from mfl.rng import generator

LINEAR_SOLVE = "linear_solve"
QUASI_NEWTON = "quasi_newton"


@dataclass(frozen=True)
class NormalEquations:
    A: np.ndarray
    B: np.ndarray
    N: int
    m: int

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if np.max(np.abs(A - A.T)) > 1e-12 * max(1.0, float(np.max(np.abs(A)))):
            raise ShapeError("normal matrix is not symmetric")
        object.__setattr__(self, "A", 0.5 * (A + A.T))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float))


@dataclass(frozen=True)
class EstimateResult:
    theta_hat: np.ndarray
    method: str
    converged: bool
    iterations: int
    score_norm: float
    boundary_active: np.ndarray
    loglik: float = float("nan")  # normalised by N
    message: str = ""

    def boundary_flags(self):
        return "".join("1" if f else "0" for f in self.boundary_active)


def assemble_normal_equations(model, paths):
    """``A = (1/N) sum phi^T c^{-1} phi dt`` and ``B = (1/N) sum phi^T c^{-1} dX`` at left endpoints."""
    if not model.linear:
        raise UnsupportedModelError(
            f"{model.family} is not linear in theta; use mle_numeric"
        )
    phi = model.path_terms(np.zeros(model.p), paths.data, paths.grid.times, want_grad=True)[1]
    dx = paths.increments()
    if not model.diffusion.is_identity:
        cphi = np.einsum("lk,imlq->imkq", model.diffusion.c_inv, phi)
    else:
        cphi = phi
    A = np.einsum("imkq,imkr->qr", cphi, phi) * paths.grid.dt / paths.N
    B = np.einsum("imkq,imk->q", cphi, dx) / paths.N
    return NormalEquations(A, B, paths.N, paths.m)


def mle_linear(model, paths):
    """Solve the normal equations; a solution outside the box is clipped and flagged."""
    eq = assemble_normal_equations(model, paths)
    require_nondegenerate(eq.A, "normal matrix A")
    theta = cho_solve(cho_factor(eq.A), eq.B)
    clipped, active = model.box.clip(theta)
    outside = bool(np.any(clipped != theta))
    score = eq.B - eq.A @ clipped
    loglik = float(clipped @ eq.B - 0.5 * clipped @ eq.A @ clipped)
    return EstimateResult(
        theta_hat=clipped,
        method=LINEAR_SOLVE,
        converged=not outside,
        iterations=1,
        score_norm=float(np.linalg.norm(score)),
        boundary_active=active if outside else np.zeros(model.p, dtype=bool),
        loglik=loglik,
        message="solution outside the box, clipped" if outside else "",
    )


def _projected_gradient(theta, grad, box):
    """Projected ascent direction norm: ``|theta - clip(theta + grad)|``."""
    return theta - np.clip(theta + grad, box.lower, box.upper)


def _starts(box, theta_init, n_starts, seed):
    starts = [np.asarray(theta_init, dtype=float), box.center]
    gen = generator(seed, "multistart")
    corners = list(box.corners())
    order = gen.permutation(len(corners))
    centre = box.center
    for k in order:
        if len(starts) >= n_starts:
            break
        starts.append(centre + 0.9 * (corners[k] - centre))
    while len(starts) < n_starts:
        starts.append(box.lower + (box.upper - box.lower) * gen.random(box.p))
    return starts[:n_starts]


def mle_numeric(model, paths, theta_init=None, n_starts=8, seed=0, max_iter=500, rtol=1e-8):
    """Multi-start bound-constrained maximisation of the normalised log-likelihood.

    Stops when the projected gradient norm is at most ``rtol * (1 + |value|)``
    or after ``max_iter`` iterations.  The best start wins; ties go to the
    lowest start index.
    """
    box = model.box
    if theta_init is None:
        theta_init = box.center
    theta_init = model.check(theta_init)
    N = paths.N

    def objective(theta):
        val, grad = loglik_and_score(model, theta, paths)
        return -val / N, -grad / N

    init_val = -objective(theta_init)[0]
    bounds = list(zip(box.lower, box.upper))
    best = None
    for idx, start in enumerate(_starts(box, theta_init, n_starts, seed)):
        tol = rtol * (1.0 + abs(objective(start)[0]))
        res = minimize(
            objective, start, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-15, "maxls": 50},
        )
        theta = np.clip(res.x, box.lower, box.upper)
        val = -objective(theta)[0]
        if best is None or val > best[0]:
            best = (val, theta, int(res.nit), idx)
    val, theta, nit, idx = best
    grad = loglik_and_score(model, theta, paths)[1] / N
    pg = _projected_gradient(theta, grad, box)
    pg_norm = float(np.linalg.norm(pg))
    active = ((theta <= box.lower) & (grad < 0)) | ((theta >= box.upper) & (grad > 0))
    converged = pg_norm <= rtol * (1.0 + abs(val))
    message = f"best of {n_starts} starts: start {idx}"
    if val <= init_val and not converged:
        message = "no start improved on the initial point"
    return EstimateResult(
        theta_hat=theta,
        method=QUASI_NEWTON,
        converged=bool(converged),
        iterations=nit,
        score_norm=pg_norm,
        boundary_active=active,
        loglik=float(val),
        message=message,
    )


def standardized_error(theta_hat, theta_star, N, fisher):
    """``sqrt(N) I^{1/2} (theta_hat - theta_star)`` with the symmetric root of ``I``."""
    mat = fisher.matrix if isinstance(fisher, FisherMatrix) else np.asarray(fisher, dtype=float)
    require_nondegenerate(mat, "Fisher information")
    diff = np.asarray(theta_hat, dtype=float) - np.asarray(theta_star, dtype=float)
    return np.sqrt(N) * (sym_power(mat, 0.5) @ diff)
