"""Monte Carlo checks of the asymptotic theory and the non-degeneracy criteria.

Each experiment draws replication ``r`` from the random streams
``(seed, <experiment>, r, particle)`` and aggregates in replication order,
so reports are identical for any thread count.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from mfl._linalg import is_degenerate, sym_power
from mfl.errors import (
    DomainError,
    ExperimentError,
    MflError,
    PreconditionError,
    UnsupportedModelError,
)
from mfl.estimate import mle_linear, mle_numeric, standardized_error
from mfl.likelihood import FisherMatrix, _loglik_value, limit_fisher, ou_limit_fisher
from mfl.models import DoubleLayer, EmpiricalMeasure, McKeanOU
from mfl.parallel import map_reps
from mfl.rng import generator
from mfl.simulate import (
    OUMoments,
    gaussian_quantile_atoms,
    limit_flow,
    ou_mean,
    ou_variance,
    reference_flow,
    simulate_particles,
    simulate_product,
)
from mfl.stats import gaussian_risk, ks_test, loss_values, wasserstein1_empirical

KS_LEVEL = 0.01
KS_MIN = 8
COV_TOL = 0.25
RISK_BAND = (0.8, 1.3)
KL_RATIO_MAX = 3.0
MAX_FAILURE_FRACTION = 0.2


def limit_information(model, theta, grid, init, seed=0, N_ref=10_000):
    """Limit Fisher information: closed form for McKean-OU, reference cloud otherwise."""
    if isinstance(model, McKeanOU):
        mean0, var0 = init.moments()
        return ou_limit_fisher(theta, mean0, var0, grid)
    flow = reference_flow(model, theta, N_ref, grid, init, seed, min_atoms=1)
    return limit_fisher(model, theta, flow)


def _require_information(fisher):
    if is_degenerate(fisher.matrix):
        raise PreconditionError(
            f"limit information is degenerate (det={fisher.det:.3e}, "
            f"threshold={fisher.threshold:.3e}); for McKean-OU check that "
            "mean(mu_0) + theta_2/theta_1 != 0"
        )


# -- LAN -----------------------------------------------------------------------

@dataclass(frozen=True)
class LanReport:
    u: np.ndarray
    theta_local: np.ndarray
    zeta: np.ndarray
    mean: float
    var: float
    predicted_mean: float
    predicted_var: float
    ks_stat: float
    ks_pvalue: float
    pass_mean: bool
    pass_ks: bool
    degenerate: bool = False

    @property
    def passed(self):
        return self.pass_mean and self.pass_ks

    @property
    def standardized(self):
        norm = float(np.linalg.norm(self.u))
        if norm == 0.0:
            return np.zeros_like(self.zeta)
        return (self.zeta + 0.5 * norm**2) / norm


def _max_feasible_u(theta, direction, box):
    steps = []
    for k, v in enumerate(direction):
        if v > 0:
            steps.append((box.upper[k] - theta[k]) / v)
        elif v < 0:
            steps.append((box.lower[k] - theta[k]) / v)
    return min(steps) if steps else np.inf


def lan_experiment(model, theta, u, N, grid, R, seed, init, fisher=None, threads=None, N_ref=10_000):
    """Distribution of the log-likelihood ratio at the local alternative ``theta + (N I)^{-1/2} u``."""
    theta = model.check(theta)
    u = np.asarray(u, dtype=float).ravel()
    if u.size != model.p:
        raise DomainError(f"u must have length {model.p}")
    if R < 2:
        raise DomainError("LAN experiment needs R >= 2")
    if fisher is None:
        fisher = limit_information(model, theta, grid, init, seed, N_ref)
    _require_information(fisher)
    scale = sym_power(N * fisher.matrix, -0.5)
    unorm = float(np.linalg.norm(u))
    if unorm == 0.0:
        zeta = np.zeros(R)
        return LanReport(u, theta.copy(), zeta, 0.0, 0.0, 0.0, 0.0, float("nan"), float("nan"),
                         True, True, degenerate=True)
    local = theta + scale @ u
    if not model.validate(local).ok:
        limit = _max_feasible_u(theta, scale @ (u / unorm), model.box)
        raise DomainError(
            f"local parameter leaves the box; the largest feasible |u| in this direction is {limit:.6g}"
        )

    def one(r):
        paths = simulate_particles(model, theta, N, grid, init, seed, rep=r, stream="lan")
        return _loglik_value(model, local, paths) - _loglik_value(model, theta, paths)

    zeta = np.array(map_reps(one, R, threads))
    mean = float(zeta.mean())
    var = float(zeta.var(ddof=1))
    stat, pval = ks_test((zeta + 0.5 * unorm**2) / unorm)
    pass_mean = abs(mean + 0.5 * unorm**2) <= 3.0 * unorm / np.sqrt(R)
    return LanReport(u, local, zeta, mean, var, -0.5 * unorm**2, unorm**2, stat, pval,
                     bool(pass_mean), bool(pval >= KS_LEVEL))


# -- normality and risk ---------------------------------------------------------

@dataclass(frozen=True)
class StandardizedRuns:
    z: np.ndarray  # (successful reps, p)
    reps: np.ndarray
    converged: np.ndarray
    failures: int
    fisher: FisherMatrix


def standardized_runs(model, theta_star, N, grid, R, seed, init, method="linear",
                      stream="normality", fisher=None, threads=None, N_ref=10_000):
    """Simulate, estimate and standardise ``R`` independent replications."""
    theta_star = model.check(theta_star)
    if method not in ("linear", "numeric"):
        raise DomainError(f"unknown estimation method {method!r}")
    if fisher is None:
        fisher = limit_information(model, theta_star, grid, init, seed, N_ref)
    _require_information(fisher)

    def one(r):
        try:
            paths = simulate_particles(model, theta_star, N, grid, init, seed, rep=r, stream=stream)
            if method == "linear":
                est = mle_linear(model, paths)
            else:
                est = mle_numeric(model, paths, seed=seed + r)
            return standardized_error(est.theta_hat, theta_star, N, fisher), est.converged
        except MflError:
            return None

    results = map_reps(one, R, threads)
    ok = [r for r, res in enumerate(results) if res is not None]
    failures = R - len(ok)
    if failures > MAX_FAILURE_FRACTION * R:
        raise ExperimentError(f"{failures} of {R} replications failed to produce an estimate")
    z = np.array([results[r][0] for r in ok]).reshape(len(ok), model.p)
    conv = np.array([results[r][1] for r in ok], dtype=bool)
    return StandardizedRuns(z, np.array(ok), conv, failures, fisher)


@dataclass(frozen=True)
class NormalityReport:
    runs: StandardizedRuns
    ks_stats: np.ndarray
    ks_pvalues: np.ndarray
    cov: np.ndarray
    cov_error: float
    cov_tol: float = COV_TOL

    @property
    def z(self):
        return self.runs.z

    @property
    def passed(self):
        if np.any(np.isnan(self.ks_pvalues)):
            return False
        return bool(np.all(self.ks_pvalues >= KS_LEVEL) and self.cov_error <= self.cov_tol)


def normality_experiment(model, theta_star, N, grid, R, seed, init, method="linear",
                         fisher=None, threads=None, N_ref=10_000):
    """Standardised MLE errors against ``N(0, I_p)``: per-coordinate KS and covariance error."""
    runs = standardized_runs(model, theta_star, N, grid, R, seed, init, method,
                             "normality", fisher, threads, N_ref)
    p = model.p
    if runs.z.shape[0] >= KS_MIN:
        tests = [ks_test(runs.z[:, k]) for k in range(p)]
    else:
        tests = [(np.nan, np.nan)] * p  # too few runs for KS; the report still carries the rows
    cov = np.atleast_2d(np.cov(runs.z, rowvar=False))
    err = float(np.linalg.norm(cov - np.eye(p)) / np.sqrt(p))
    return NormalityReport(runs, np.array([t[0] for t in tests]), np.array([t[1] for t in tests]),
                           cov, err)


@dataclass(frozen=True)
class RiskReport:
    loss: str
    losses: np.ndarray
    empirical: float
    se: float
    bound: float
    band: tuple = RISK_BAND

    @property
    def ratio(self):
        return self.empirical / self.bound

    @property
    def passed(self):
        return bool(self.band[0] <= self.ratio <= self.band[1])


def risk_experiment(model, theta_star, loss, N, grid, R, seed, init, method="linear", c=1.0,
                    fisher=None, threads=None, N_ref=10_000):
    """Empirical risk of the standardised MLE against the Gaussian bound ``E w(xi)``."""
    bound = gaussian_risk(loss, model.p, c)
    runs = standardized_runs(model, theta_star, N, grid, R, seed, init, method,
                             "risk", fisher, threads, N_ref)
    vals = loss_values(loss, runs.z, c)
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return RiskReport(loss, vals, float(vals.mean()), se, bound)


# -- non-degeneracy and identifiability ------------------------------------------

@dataclass(frozen=True)
class NondegeneracyVerdict:
    nondegenerate: bool
    min_value: float
    threshold: float
    n_segments: int
    n_directions: int
    witness: tuple | None = None  # (theta, theta_prime, z)
    segment_minima: np.ndarray = field(default=None, repr=False)


def _x_grid(mu0, n_x):
    atoms = mu0.atoms
    sd = atoms.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    lo = atoms.min(axis=0) - 3 * sd
    hi = atoms.max(axis=0) + 3 * sd
    if mu0.d == 1:
        return np.linspace(lo[0], hi[0], n_x)[:, None]
    centre = atoms.mean(axis=0)
    lines = []
    for k in range(mu0.d):
        pts = np.tile(centre, (n_x, 1))
        pts[:, k] = np.linspace(lo[k], hi[k], n_x)
        lines.append(pts)
    return np.vstack(lines)


def _sphere_directions(p, count, gen):
    if p == 1:
        return np.ones((1, 1))
    if p == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    z = gen.standard_normal((count, p))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _canonical_sign(z):
    nz = np.flatnonzero(np.abs(z) > 1e-12)
    return -z if nz.size and z[nz[0]] < 0 else z


def segment_gradient(model, theta_a, theta_b, x, atoms, n_lambda=16):
    """``int_0^1 c^{-1/2} grad_theta b(theta_a + l (theta_b - theta_a); 0, x, atoms) dl``."""
    nodes, weights = leggauss(n_lambda)
    lam = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    acc = np.zeros((x.shape[0], model.d, model.p))
    for l, w in zip(lam, weights):
        acc += w * model.grad(theta_a + l * (theta_b - theta_a), 0.0, x, atoms)
    if not model.diffusion.is_identity:
        acc = np.einsum("lk,nkq->nlq", model.diffusion.c_inv_sqrt, acc)
    return acc


def nondegeneracy_t0(model, box, mu0, n_pairs=32, n_directions=64, n_x=101, n_lambda=16,
                     seed=0, threshold=1e-10):
    """Search for a segment and unit direction along which the time-zero gradient vanishes.

    For each segment (random pairs in ``box`` plus every box edge) and each
    direction ``z`` (a sphere grid plus the least-informative direction of
    the segment's Gram matrix), the statistic is
    ``max_x sum_j (G_seg^j(x)^T z)^2`` over an x-grid covering the atoms of
    ``mu0`` plus three standard deviations.  The verdict is non-degenerate
    when every statistic exceeds ``threshold``; otherwise the smallest one is
    returned as a witness.
    """
    if not isinstance(mu0, EmpiricalMeasure):
        mu0 = EmpiricalMeasure(mu0)
    gen = generator(seed, "nondegeneracy")
    width = box.upper - box.lower
    pairs = [(box.lower + width * gen.random(box.p), box.lower + width * gen.random(box.p))
             for _ in range(n_pairs)]
    pairs.extend(box.edges())
    base_dirs = _sphere_directions(model.p, n_directions, gen)
    x = _x_grid(mu0, n_x)
    best = (np.inf, None)
    minima = np.empty(len(pairs))
    for idx, (a, b) in enumerate(pairs):
        g = segment_gradient(model, a, b, x, mu0.atoms, n_lambda)
        gram = np.einsum("nkq,nkr->qr", g, g)
        eig_dir = np.linalg.eigh(gram)[1][:, 0]
        dirs = np.vstack([base_dirs, _canonical_sign(eig_dir)])
        proj = np.einsum("nkq,zq->znk", g, dirs)
        stat = np.max(np.sum(proj**2, axis=2), axis=1)
        k = int(np.argmin(stat))
        minima[idx] = stat[k]
        if stat[k] < best[0]:
            best = (float(stat[k]), (a.copy(), b.copy(), _canonical_sign(dirs[k])))
    ok = best[0] > threshold
    return NondegeneracyVerdict(ok, best[0], threshold, len(pairs), len(base_dirs) + 1,
                                None if ok else best[1], minima)


def fourier_grad_potential(theta, xi, d=1):
    """Fourier transform of the double-layer force at frequencies ``xi`` (shape ``(n, d)`` or radial ``(n,)``)."""
    t1, t2, t3, t4 = (float(v) for v in theta)
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = np.column_stack([xi, np.zeros((xi.size, d - 1))])
    r2 = np.sum(xi**2, axis=1)
    radial = np.pi ** (d / 2) * (t1 * t2 ** (-d / 2) * np.exp(-r2 / (4 * t2))
                                 - t3 * t4 ** (-d / 2) * np.exp(-r2 / (4 * t4)))
    return 1j * xi * radial[:, None]


def identifiability_fourier_check(model, theta, theta2, xi):
    """``max_xi |F(grad U_theta)(xi) - F(grad U_theta2)(xi)|``; positive means distinguishable."""
    if not isinstance(model, DoubleLayer):
        raise UnsupportedModelError("the Fourier identifiability check applies to the double-layer model")
    for name, th in (("theta", theta), ("theta'", theta2)):
        report = model.validate(th)
        if not report.ok:
            raise DomainError(f"{name} invalid: " + "; ".join(report.violations))
    diff = fourier_grad_potential(theta, xi, model.d) - fourier_grad_potential(theta2, xi, model.d)
    return float(np.max(np.linalg.norm(diff, axis=1)))


# -- propagation of chaos -----------------------------------------------------------

@dataclass(frozen=True)
class RateReport:
    levels: np.ndarray
    distances: np.ndarray  # (levels, R)
    medians: np.ndarray
    slope: float
    intercept: float
    metric: str
    reference: str
    reference_atoms: int
    band: tuple | None = None

    @property
    def passed(self):
        ok = self.slope < 0
        if self.band is not None:
            ok = ok and self.band[0] <= self.slope <= self.band[1]
        return bool(ok)


def chaos_rate(model, theta, levels, grid, R, seed, init, N_ref=None, band=None, threads=None):
    """Median distance between ``mu^N_T`` and the mean-field reference, and its log-log slope in ``N``.

    In ``d = 1`` the distance is the exact W1 to the reference atoms (Gaussian
    quantiles for McKean-OU with a Gaussian start, a reference cloud
    otherwise).  For ``d > 1`` it is the synchronous-coupling bound
    ``(1/N) sum_i |X_T^i - Xbar_T^i|`` against particles driven by the
    reference flow.
    """
    theta = model.check(theta)
    levels = np.array(sorted(set(int(n) for n in levels)))
    if levels.size < 3:
        raise DomainError("chaos rate needs at least three distinct N levels")
    if model.d == 1:
        metric = "w1"
        if isinstance(model, McKeanOU) and init.is_gaussian:
            mean0, var0 = init.moments()
            mom = OUMoments(tuple(theta), mean0, var0)
            n_ref = int(N_ref or 100_000)
            ref = gaussian_quantile_atoms(ou_mean(mom, grid.T), ou_variance(mom, grid.T), n_ref)
            reference = "gaussian_quantiles"
        else:
            n_ref = int(N_ref or 10 * levels.max())
            flow = reference_flow(model, theta, n_ref, grid, init, seed, min_atoms=1)
            ref = flow.atoms[-1, :, 0]
            reference = "particle_cloud"
    else:
        metric = "coupling"
        n_ref = int(N_ref or 10 * levels.max())
        flow = limit_flow(model, theta, grid, init, seed, N_ref=n_ref, min_atoms=1)
        reference = "particle_cloud"

    def distance(level, r):
        paths = simulate_particles(model, theta, level, grid, init, seed, rep=r, stream="chaos")
        if metric == "w1":
            return wasserstein1_empirical(paths.data[:, -1, 0], ref)
        prod = simulate_product(model, theta, level, grid, init, seed, flow, rep=r, stream="chaos")
        return float(np.mean(np.linalg.norm(paths.data[:, -1] - prod.data[:, -1], axis=1)))

    dist = np.array([map_reps(lambda r, n=n: distance(n, r), R, threads) for n in levels])
    med = np.median(dist, axis=1)
    if np.any(med <= 0):
        raise ExperimentError("degenerate level: median distance is zero")
    slope, intercept = np.polyfit(np.log(levels), np.log(med), 1)
    return RateReport(levels, dist, med, float(slope), float(intercept), metric, reference, n_ref,
                      None if band is None else tuple(band))


# -- KL proxy -------------------------------------------------------------------------

@dataclass(frozen=True)
class KLEstimate:
    N: int
    value: float
    se: float
    samples: np.ndarray


def kl_proxy(model, theta, N, grid, R, seed, init, flow=None, threads=None, N_ref=10_000):
    """Monte Carlo estimate of ``(1/2) sum_i sum_j dt |c^{-1/2}(b(X^i, mu^N) - b(X^i, mu))|^2``.

    Particles follow the product (mean-field) dynamics driven by ``flow``;
    only drifts linear in the measure are supported.
    """
    if not model.measure_linear:
        raise UnsupportedModelError(f"{model.family} is not linear in the measure argument")
    theta = model.check(theta)
    if flow is None:
        flow = limit_flow(model, theta, grid, init, seed, N_ref=N_ref, min_atoms=1)
    dt = grid.dt
    times = grid.times
    root = None if model.diffusion.is_identity else model.diffusion.c_inv_sqrt

    def one(r):
        paths = simulate_product(model, theta, N, grid, init, seed, flow, rep=r, stream="kl")
        total = 0.0
        for j in range(grid.m):
            xj = paths.data[:, j]
            diff = model.drift(theta, times[j], xj, xj) - model.drift(theta, times[j], xj, flow.atoms[j])
            if root is not None:
                diff = diff @ root
            total += np.sum(diff * diff)
        return 0.5 * dt * total

    samples = np.array(map_reps(one, R, threads))
    se = float(samples.std(ddof=1) / np.sqrt(R)) if R > 1 else float("nan")
    return KLEstimate(int(N), float(samples.mean()), se, samples)


@dataclass(frozen=True)
class KLReport:
    estimates: tuple

    @property
    def values(self):
        return np.array([e.value for e in self.estimates])

    @property
    def ratio(self):
        v = self.values
        return float(v.max() / v.min()) if v.min() > 0 else float("inf")

    @property
    def passed(self):
        return bool(self.ratio <= KL_RATIO_MAX)


def kl_experiment(model, theta, levels, grid, R, seed, init, threads=None, N_ref=10_000):
    """KL proxy at several ``N``, sharing one reference flow."""
    theta = model.check(theta)
    flow = limit_flow(model, theta, grid, init, seed, N_ref=N_ref, min_atoms=1)
    return KLReport(tuple(kl_proxy(model, theta, n, grid, R, seed, init, flow, threads)
                          for n in levels))
