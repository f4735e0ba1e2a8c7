"""Euler-Maruyama simulation of the N-particle system and mean-field references.

Particle ``i`` of replication ``rep`` reads its initial position and then its
Brownian increments from the stream ``(seed, stream, rep, i)``.  Two runs with
the same seed therefore share noise particle by particle, whatever ``N`` is,
and the synchronous coupling is just the same noise fed to two parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from mfl.errors import DomainError, ShapeError, SimulationBlowUpError
from mfl.models import EmpiricalMeasure, McKeanOU
from mfl.rng import generator


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0 = t_0 < ... < t_m = T``."""

    T: float
    m: int
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise DomainError(f"horizon must be positive, got {self.T}")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"step count must be a positive integer, got {self.m}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "m", int(self.m))
        times = np.linspace(0.0, self.T, self.m + 1)
        times.flags.writeable = False
        object.__setattr__(self, "times", times)

    @property
    def dt(self):
        return self.T / self.m


@dataclass(frozen=True)
class InitialLaw:
    """Law of the initial positions: ``point`` (mean), ``gaussian`` (mean, var) or ``uniform`` (low, high).

    Gaussian and uniform laws are isotropic product laws in ``d > 1``.
    """

    kind: str = "point"
    mean: float = 0.0
    var: float = 0.0
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in ("point", "gaussian", "uniform"):
            raise DomainError(f"unknown initial law {self.kind!r}")
        if self.kind == "gaussian" and self.var < 0:
            raise DomainError("gaussian initial law needs var >= 0")
        if self.kind == "uniform" and not self.low < self.high:
            raise DomainError("uniform initial law needs low < high")

    def sample(self, gen, d):
        if self.kind == "point":
            return np.full(d, float(self.mean))
        if self.kind == "gaussian":
            return self.mean + np.sqrt(self.var) * gen.standard_normal(d)
        return self.low + (self.high - self.low) * gen.random(d)

    def moments(self):
        """Mean and variance of one coordinate."""
        if self.kind == "uniform":
            return 0.5 * (self.low + self.high), (self.high - self.low) ** 2 / 12.0
        if self.kind == "point":
            return float(self.mean), 0.0
        return float(self.mean), float(self.var)

    @property
    def is_gaussian(self):
        return self.kind in ("point", "gaussian")

    def to_dict(self):
        if self.kind == "point":
            return {"kind": "point", "mean": self.mean}
        if self.kind == "gaussian":
            return {"kind": "gaussian", "mean": self.mean, "var": self.var}
        return {"kind": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class ParticlePaths:
    """Observed positions ``data[i, j, k]`` of particle ``i`` at ``grid.times[j]``."""

    data: np.ndarray
    grid: TimeGrid
    seed: int = 0
    rep: int = 0
    model: str = ""
    theta: tuple = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[1] != self.grid.m + 1:
            raise ShapeError(
                f"path array must be (N, {self.grid.m + 1}, d), got {data.shape}"
            )
        if data.shape[0] == 0:
            raise DomainError("paths need at least one particle")
        if not np.all(np.isfinite(data)):
            raise DomainError("paths contain non-finite values")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))

    @property
    def N(self):
        return self.data.shape[0]

    @property
    def m(self):
        return self.grid.m

    @property
    def d(self):
        return self.data.shape[2]

    def measure(self, j):
        return EmpiricalMeasure(self.data[:, j, :])

    def increments(self):
        return np.diff(self.data, axis=1)


@dataclass(frozen=True)
class MeasureFlow:
    """One empirical measure per grid time, stored as ``atoms[j]`` of shape ``(n, d)``."""

    grid: TimeGrid
    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 2:
            atoms = atoms[:, :, None]
        if atoms.ndim != 3 or atoms.shape[0] != self.grid.m + 1:
            raise ShapeError(
                f"flow needs {self.grid.m + 1} time slices of shape (n, d), got {atoms.shape}"
            )
        atoms.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)

    @property
    def n_atoms(self):
        return self.atoms.shape[1]

    def measure(self, j):
        return EmpiricalMeasure(self.atoms[j])


@dataclass(frozen=True)
class OUMoments:
    """Parameter and initial moments for the closed-form McKean-OU marginals."""

    theta: tuple
    mean0: float
    var0: float

    def __post_init__(self):
        theta = tuple(float(v) for v in np.asarray(self.theta, dtype=float).ravel())
        if len(theta) != 3:
            raise ShapeError("McKean-OU moments need theta of length 3")
        object.__setattr__(self, "theta", theta)


def ou_mean(mom, t):
    """Mean of the McKean-OU marginal at time ``t``."""
    t1, t2, _ = mom.theta
    if t1 == 0.0:
        raise DomainError("closed-form mean needs theta_1 != 0")
    t = np.asarray(t, dtype=float)
    shift = t2 / t1
    out = -shift + (mom.mean0 + shift) * np.exp(t1 * t)
    return float(out) if out.ndim == 0 else out


def ou_variance(mom, t):
    """Variance of the McKean-OU marginal at time ``t``.

    The centred process solves ``dY = (theta_1 - theta_3) Y dt + dB``, so
    ``Var(t) = e^{2at} Var_0 + (e^{2at} - 1) / (2a)`` with ``a = theta_1 - theta_3``.
    """
    t1, _, t3 = mom.theta
    a = t1 - t3
    if a == 0.0:
        raise DomainError("closed-form variance needs theta_1 != theta_3")
    t = np.asarray(t, dtype=float)
    out = np.exp(2 * a * t) * mom.var0 + np.expm1(2 * a * t) / (2 * a)
    return float(out) if out.ndim == 0 else out


def ou_second_moment(mom, t):
    """Raw second moment ``Var(t) + mean(t)^2`` of the McKean-OU marginal."""
    return ou_variance(mom, t) + np.square(ou_mean(mom, t))


# -- particle simulation ---------------------------------------------------

def draw_noise(N, grid, d, init, seed, rep=0, stream="simulate"):
    """Initial positions ``(N, d)`` and standard normal increments ``(N, m, d)``."""
    if N < 1:
        raise DomainError(f"need at least one particle, got N={N}")
    x0 = np.empty((N, d))
    noise = np.empty((N, grid.m, d))
    for i in range(N):
        gen = generator(seed, stream, rep, i)
        x0[i] = init.sample(gen, d)
        noise[i] = gen.standard_normal((grid.m, d))
    return x0, noise


def _euler(model, theta, x0, noise, grid, flow=None):
    N, d = x0.shape
    data = np.empty((N, grid.m + 1, d))
    data[:, 0] = x0
    dt = grid.dt
    scale = np.sqrt(dt) * model.diffusion.sigma.T
    times = grid.times
    # overflow is detected below and reported as a blow-up, so silence numpy's warning
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(grid.m):
            xj = data[:, j]
            atoms = xj if flow is None else flow.atoms[j]
            b = model.drift(theta, times[j], xj, atoms)
            nxt = xj + b * dt + noise[:, j] @ scale
            if not np.all(np.isfinite(nxt)):
                bad = np.flatnonzero(~np.all(np.isfinite(nxt), axis=1))[0]
                raise SimulationBlowUpError(j + 1, bad)
            data[:, j + 1] = nxt
    return data


def _paths(model, theta, data, grid, seed, rep):
    return ParticlePaths(data, grid, seed=seed, rep=rep, model=model.family, theta=tuple(theta))


def simulate_particles(model, theta, N, grid, init, seed, rep=0, stream="simulate"):
    """Simulate the interacting system with the empirical measure in the drift."""
    theta = model.check(theta)
    x0, noise = draw_noise(N, grid, model.d, init, seed, rep, stream)
    return _paths(model, theta, _euler(model, theta, x0, noise, grid), grid, seed, rep)


def coupled_simulate(model, theta, theta2, N, grid, init, seed, rep=0, stream="simulate"):
    """Two systems driven by the same initial positions and Brownian increments."""
    theta = model.check(theta)
    theta2 = model.check(theta2)
    x0, noise = draw_noise(N, grid, model.d, init, seed, rep, stream)
    first = _paths(model, theta, _euler(model, theta, x0, noise, grid), grid, seed, rep)
    second = _paths(model, theta2, _euler(model, theta2, x0, noise, grid), grid, seed, rep)
    return first, second


def simulate_product(model, theta, N, grid, init, seed, flow, rep=0, stream="simulate"):
    """Independent particles whose drift uses the reference flow instead of their own measure."""
    theta = model.check(theta)
    if flow.grid.m != grid.m or flow.grid.T != grid.T:
        raise ShapeError("flow grid does not match the simulation grid")
    x0, noise = draw_noise(N, grid, model.d, init, seed, rep, stream)
    return _paths(model, theta, _euler(model, theta, x0, noise, grid, flow), grid, seed, rep)


def reference_flow(model, theta, N_ref, grid, init, seed, min_atoms=1000, rep=0):
    """Large particle cloud standing in for the mean-field marginals."""
    if N_ref < min_atoms:
        raise DomainError(f"reference cloud needs at least {min_atoms} atoms, got {N_ref}")
    paths = simulate_particles(model, theta, N_ref, grid, init, seed, rep=rep, stream="reference")
    return MeasureFlow(grid, np.swapaxes(paths.data, 0, 1))


def gaussian_quantile_atoms(mean, var, n):
    """``n`` equal-weight atoms at the midpoint quantiles of ``N(mean, var)``."""
    u = (np.arange(n) + 0.5) / n
    z = ndtri(u)
    z = 0.5 * (z - z[::-1])  # exact antisymmetry keeps the atom mean at `mean`
    return mean + np.sqrt(var) * z


def ou_gaussian_flow(theta, init, grid, n_atoms=2001):
    """Exact McKean-OU marginals as Gaussian quantile clouds (Gaussian initial laws only)."""
    if not init.is_gaussian:
        raise DomainError("closed-form McKean-OU flow needs a point or Gaussian initial law")
    mean0, var0 = init.moments()
    mom = OUMoments(tuple(theta), mean0, var0)
    means = ou_mean(mom, grid.times)
    variances = ou_variance(mom, grid.times)
    atoms = np.stack([gaussian_quantile_atoms(mu, v, n_atoms) for mu, v in zip(means, variances)])
    return MeasureFlow(grid, atoms[:, :, None])


def limit_flow(model, theta, grid, init, seed, N_ref=10_000, n_atoms=2001, min_atoms=1000):
    """Closed-form flow for McKean-OU with a Gaussian start, a reference cloud otherwise."""
    if isinstance(model, McKeanOU) and init.is_gaussian:
        return ou_gaussian_flow(theta, init, grid, n_atoms)
    return reference_flow(model, theta, N_ref, grid, init, seed, min_atoms=min_atoms)
