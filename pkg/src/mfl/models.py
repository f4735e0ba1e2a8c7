"""Parametric drift families, diffusion coefficient and parameter boxes.

Four families are provided, all written as ``b(theta; t, x, nu)`` with ``nu``
an empirical measure given by its atoms:

``McKeanOU`` (p=3, d=1)
    ``theta1 * x + theta2 - theta3 * (x - mean(nu))``.
``GenLinear`` (p=2, d=1)
    ``theta1 * f(x) + theta2 * (g * nu)(x)``.
``DoubleLayer`` (p=4, any d)
    ``(grad U_theta * nu)(x)`` with
    ``U_theta(x) = -theta1 exp(-theta2 |x|^2) + theta3 exp(-theta4 |x|^2)``.
``NonlinearF`` (p=1, d=1)
    ``F(theta * (g * nu)(x))``.

The batched methods on the model classes take evaluation points ``x`` of
shape ``(n, d)`` and atoms of shape ``(N, d)`` and skip validation; the
module-level functions are the checked single-point entry points.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from mfl import kernels
from mfl.errors import DomainError, ShapeError, UnsupportedModelError


def _as_vector(values, name="theta"):
    arr = np.array(values, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries: {arr}")
    return arr


@dataclass(frozen=True)
class ParamBox:
    """Compact parameter set ``prod_k [lower_k, upper_k]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _as_vector(self.lower, "lower")
        hi = _as_vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise ShapeError(f"box bounds differ in length: {lo.size} vs {hi.size}")
        if np.any(lo > hi):
            bad = np.flatnonzero(lo > hi).tolist()
            raise DomainError(f"box has lower > upper in coordinates {bad}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def p(self):
        return self.lower.size

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def interval(self, k):
        return float(self.lower[k]), float(self.upper[k])

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def outside(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.flatnonzero((theta < self.lower) | (theta > self.upper)).tolist()

    def clip(self, theta):
        """Project onto the box; returns the projection and per-coordinate active flags."""
        theta = np.asarray(theta, dtype=float)
        clipped = np.clip(theta, self.lower, self.upper)
        active = (clipped <= self.lower) | (clipped >= self.upper)
        return clipped, active

    def corners(self):
        for bits in itertools.product((0, 1), repeat=self.p):
            yield np.where(np.array(bits, dtype=bool), self.upper, self.lower)

    def edges(self):
        """All pairs of corners that differ in exactly one coordinate."""
        for k in range(self.p):
            for bits in itertools.product((0, 1), repeat=self.p - 1):
                b = np.array(bits[:k] + (0,) + bits[k:], dtype=bool)
                a = np.where(b, self.upper, self.lower)
                c = a.copy()
                c[k] = self.upper[k]
                yield a, c

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class DiffusionSpec:
    """Constant diffusion matrix ``sigma`` and the derived ``c = sigma sigma^T`` roots.

    ``c_inv_sqrt`` is the symmetric positive root of ``c^{-1}``.
    """

    sigma: np.ndarray
    c: np.ndarray = field(init=False, repr=False)
    c_inv: np.ndarray = field(init=False, repr=False)
    c_inv_sqrt: np.ndarray = field(init=False, repr=False)
    eig_bounds: tuple = field(init=False, repr=False)

    def __post_init__(self):
        sigma = np.atleast_2d(np.array(self.sigma, dtype=float))
        if sigma.shape[0] != sigma.shape[1]:
            raise ShapeError(f"sigma must be square, got shape {sigma.shape}")
        if not np.all(np.isfinite(sigma)):
            raise DomainError("sigma has non-finite entries")
        c = sigma @ sigma.T
        c = 0.5 * (c + c.T)
        w, v = np.linalg.eigh(c)
        if w[0] <= 0.0 or w[0] < 1e-14 * w[-1]:
            raise DomainError(f"c = sigma sigma^T is not positive definite (eigenvalues {w})")
        c_inv = (v / w) @ v.T
        c_inv_sqrt = (v / np.sqrt(w)) @ v.T
        for name, arr in (("sigma", sigma), ("c", c), ("c_inv", 0.5 * (c_inv + c_inv.T)),
                          ("c_inv_sqrt", 0.5 * (c_inv_sqrt + c_inv_sqrt.T))):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "eig_bounds", (float(w[0]), float(w[-1])))

    @classmethod
    def identity(cls, d=1):
        return cls(np.eye(d))

    @classmethod
    def from_value(cls, value, d=1):
        """Scalar (isotropic), vector (diagonal) or full ``d x d`` matrix."""
        arr = np.array(value, dtype=float)
        if arr.ndim == 0:
            return cls(float(arr) * np.eye(d))
        if arr.ndim == 1:
            return cls(np.diag(arr))
        return cls(arr)

    @property
    def d(self):
        return self.sigma.shape[0]

    @property
    def is_identity(self):
        return bool(np.array_equal(self.sigma, np.eye(self.d)))


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform atomic measure ``(1/N) sum_j delta_{atoms_j}``."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2:
            raise ShapeError(f"atoms must be (N, d), got shape {atoms.shape}")
        if atoms.shape[0] == 0:
            raise DomainError("empirical measure needs at least one atom")
        if not np.all(np.isfinite(atoms)):
            raise DomainError("empirical measure has non-finite atoms")
        atoms.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)

    @property
    def N(self):
        return self.atoms.shape[0]

    @property
    def d(self):
        return self.atoms.shape[1]

    def mean(self):
        return self.atoms.mean(axis=0)

    def var(self):
        return self.atoms.var(axis=0)

    def abs_moment(self, r):
        return float(np.mean(np.linalg.norm(self.atoms, axis=1) ** r))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


class DriftModel:
    """Base class of the drift families.

    Subclasses implement ``drift_grad`` on batches; everything else is
    derived from it.
    """

    family = ""
    p = 0
    linear = False
    measure_linear = True

    def __init__(self, box, d=1, diffusion=None):
        if not isinstance(box, ParamBox):
            box = ParamBox(*box)
        if box.p != self.p:
            raise ShapeError(f"{self.family} needs a box of dimension {self.p}, got {box.p}")
        self.box = box
        self.d = int(d)
        if diffusion is None:
            diffusion = DiffusionSpec.identity(self.d)
        elif not isinstance(diffusion, DiffusionSpec):
            diffusion = DiffusionSpec.from_value(diffusion, self.d)
        if diffusion.d != self.d:
            raise ShapeError(f"diffusion is {diffusion.d}-dimensional, model is {self.d}-dimensional")
        self.diffusion = diffusion
        problems = self.box_violations(box)
        if problems:
            raise DomainError(f"invalid {self.family} box: " + "; ".join(problems))

    # -- constraints -----------------------------------------------------
    def box_violations(self, box):
        return []

    def point_violations(self, theta):
        return []

    def validate(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.p:
            return ValidationReport((f"theta has length {theta.size}, {self.family} needs {self.p}",))
        problems = []
        if not np.all(np.isfinite(theta)):
            problems.append("theta has non-finite entries")
        for k in self.box.outside(theta):
            lo, hi = self.box.interval(k)
            problems.append(f"theta_{k + 1}={theta[k]:.17g} outside [{lo:.17g}, {hi:.17g}]")
        problems.extend(self.point_violations(theta))
        return ValidationReport(tuple(problems))

    def check(self, theta):
        theta = _as_vector(theta)
        report = self.validate(theta)
        if not report.ok:
            if theta.size != self.p:
                raise ShapeError(report.violations[0])
            raise DomainError("; ".join(report.violations))
        return theta

    # -- evaluation ------------------------------------------------------
    def drift_grad(self, theta, t, x, atoms, want_grad=True):
        raise NotImplementedError

    def drift(self, theta, t, x, atoms):
        return self.drift_grad(theta, t, x, atoms, want_grad=False)[0]

    def grad(self, theta, t, x, atoms):
        return self.drift_grad(theta, t, x, atoms, want_grad=True)[1]

    def path_terms(self, theta, data, times, want_grad=True):
        """Drift and gradient at every left endpoint of a path array.

        ``data`` has shape ``(N, m+1, d)``; the measure at step ``j`` is the
        empirical measure of ``data[:, j]``.  Returns ``b`` with shape
        ``(N, m, d)`` and ``G`` with shape ``(N, m, d, p)`` (or ``None``).
        """
        n, m1, d = data.shape
        m = m1 - 1
        b = np.empty((n, m, d))
        g = np.empty((n, m, d, self.p)) if want_grad else None
        for j in range(m):
            xj = data[:, j, :]
            bj, gj = self.drift_grad(theta, times[j], xj, xj, want_grad)
            b[:, j] = bj
            if want_grad:
                g[:, j] = gj
        return b, g

    def features(self, t, x, atoms):
        """theta-independent gradient rows of a linear family, shape ``(n, d, p)``."""
        if not self.linear:
            raise UnsupportedModelError(f"{self.family} is not linear in theta")
        return self.drift_grad(np.zeros(self.p), t, x, atoms, want_grad=True)[1]

    def describe(self):
        out = {"family": self.family, "d": self.d, "box": self.box.to_dict(),
               "sigma": self.diffusion.sigma.tolist()}
        out.update(self._extra())
        return out

    def _extra(self):
        return {}

    def __repr__(self):
        extra = "".join(f", {k}={v!r}" for k, v in self._extra().items())
        return f"{type(self).__name__}(box={self.box.to_dict()}, d={self.d}{extra})"


def _intervals_overlap(a, b):
    return a[0] <= b[1] and b[0] <= a[1]


class McKeanOU(DriftModel):
    family = "mckean_ou"
    p = 3
    linear = True

    def __init__(self, box, diffusion=None):
        super().__init__(box, d=1, diffusion=diffusion)

    def box_violations(self, box):
        problems = []
        lo1, hi1 = box.interval(0)
        if lo1 <= 0.0 <= hi1:
            problems.append(f"theta_1 interval [{lo1}, {hi1}] contains 0")
        if _intervals_overlap(box.interval(0), box.interval(2)):
            problems.append("theta_1 and theta_3 intervals intersect")
        return problems

    def point_violations(self, theta):
        problems = []
        if theta[0] == 0.0:
            problems.append("theta_1 must be nonzero (non-degeneracy constraint on the limit information)")
        if theta[0] == theta[2]:
            problems.append("theta_1 must differ from theta_3")
        return problems

    def drift_grad(self, theta, t, x, atoms, want_grad=True):
        x = x[:, 0]
        centred = x - atoms[:, 0].mean()
        b = (theta[0] * x + theta[1] - theta[2] * centred)[:, None]
        if not want_grad:
            return b, None
        g = np.stack([x, np.ones_like(x), -centred], axis=-1)[:, None, :]
        return b, g

    def path_terms(self, theta, data, times, want_grad=True):
        x = data[:, :-1, 0]
        centred = x - x.mean(axis=0)
        b = (theta[0] * x + theta[1] - theta[2] * centred)[..., None]
        if not want_grad:
            return b, None
        g = np.stack([x, np.ones_like(x), -centred], axis=-1)[:, :, None, :]
        return b, g


class GenLinear(DriftModel):
    family = "gen_linear"
    p = 2
    linear = True

    def __init__(self, box, f="identity", g="gaussian", diffusion=None):
        self.f = kernels.get_kernel(f) if isinstance(f, str) else f
        self.g = kernels.get_kernel(g) if isinstance(g, str) else g
        super().__init__(box, d=1, diffusion=diffusion)

    def drift_grad(self, theta, t, x, atoms, want_grad=True):
        x = x[:, 0]
        fx = self.f(x)
        gx = kernels.conv_scalar(x, atoms[:, 0], self.g)
        b = (theta[0] * fx + theta[1] * gx)[:, None]
        if not want_grad:
            return b, None
        return b, np.stack([fx, gx], axis=-1)[:, None, :]

    def _extra(self):
        return {"f": self.f.name, "g": self.g.name}


class DoubleLayer(DriftModel):
    family = "double_layer"
    p = 4

    def box_violations(self, box):
        problems = []
        if np.any(box.lower <= 0.0):
            problems.append("box must lie in (0, inf)^4")
        if _intervals_overlap(box.interval(1), box.interval(3)):
            problems.append("theta_2 and theta_4 intervals intersect")
        return problems

    def point_violations(self, theta):
        problems = []
        if np.any(theta <= 0.0):
            problems.append("all parameters must be positive")
        if theta[1] == theta[3]:
            problems.append("theta_2 must differ from theta_4")
        return problems

    def drift_grad(self, theta, t, x, atoms, want_grad=True):
        return kernels.double_layer(x, atoms, theta, want_grad)


class NonlinearF(DriftModel):
    family = "nonlinear_f"
    p = 1
    measure_linear = False

    def __init__(self, box, link="tanh", g="gaussian", diffusion=None):
        self.link = kernels.get_kernel(link) if isinstance(link, str) else link
        self.g = kernels.get_kernel(g) if isinstance(g, str) else g
        super().__init__(box, d=1, diffusion=diffusion)

    def box_violations(self, box):
        if box.lower[0] <= 0.0:
            return ["box must lie in (0, inf)"]
        return []

    def point_violations(self, theta):
        if theta[0] <= 0.0:
            return ["theta must be positive"]
        return []

    def drift_grad(self, theta, t, x, atoms, want_grad=True):
        s = kernels.conv_scalar(x[:, 0], atoms[:, 0], self.g)
        arg = theta[0] * s
        b = self.link(arg)[:, None]
        if not want_grad:
            return b, None
        return b, (s * self.link.deriv(arg))[:, None, None]

    def _extra(self):
        return {"link": self.link.name, "g": self.g.name}


FAMILIES = {cls.family: cls for cls in (McKeanOU, GenLinear, DoubleLayer, NonlinearF)}


def make_model(family, box, **options):
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise KeyError(f"unknown model family {family!r}; known: {sorted(FAMILIES)}") from None
    return cls(box, **options)


# -- checked single-point operations ---------------------------------------

def _point_and_measure(model, x, nu):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.d:
        raise ShapeError(f"x has dimension {x.size}, model has d={model.d}")
    if not np.all(np.isfinite(x)):
        raise DomainError("x has non-finite entries")
    if not isinstance(nu, EmpiricalMeasure):
        nu = EmpiricalMeasure(nu)
    if nu.d != model.d:
        raise ShapeError(f"measure has dimension {nu.d}, model has d={model.d}")
    return x[None, :], nu


def drift_eval(model, theta, t, x, nu):
    """``b(theta; t, x, nu)`` as a ``d``-vector."""
    theta = model.check(theta)
    xb, nu = _point_and_measure(model, x, nu)
    return model.drift(theta, t, xb, nu.atoms)[0]


def drift_grad_theta(model, theta, t, x, nu):
    """``d x p`` matrix whose row ``j`` is the theta-gradient of ``b^j``."""
    theta = model.check(theta)
    xb, nu = _point_and_measure(model, x, nu)
    return model.grad(theta, t, xb, nu.atoms)[0]


def kernel_convolve(kernel, nu, x):
    """``(kernel * nu)(x) = (1/N) sum_j kernel(x - y_j)``.

    ``kernel`` is any vectorised callable; registry kernels on the real line
    go through the interaction backend.
    """
    if not isinstance(nu, EmpiricalMeasure):
        nu = EmpiricalMeasure(nu)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != nu.d:
        raise ShapeError(f"x has dimension {x.size}, measure has d={nu.d}")
    if isinstance(kernel, kernels.Kernel) and nu.d == 1:
        return float(kernels.conv_scalar(x, nu.atoms[:, 0], kernel)[0])
    diffs = x[None, :] - nu.atoms
    vals = np.asarray(kernel(diffs[:, 0] if nu.d == 1 else diffs), dtype=float)
    return vals.mean(axis=0) if vals.ndim > 1 else float(vals.mean())


def validate_theta(model, theta):
    """Box membership plus family constraints, as a report naming each violation."""
    return model.validate(theta)
