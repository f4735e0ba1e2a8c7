"""Statistical utilities: Kolmogorov-Smirnov test, 1-d Wasserstein distance, Gaussian risk."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln, ndtr
from scipy.stats import chi2

from mfl.errors import DomainError, ShapeError

KS_TERMS = 100


def kolmogorov_sf(lam):
    """``P(K > lam)`` for the Kolmogorov distribution, series truncated at 100 terms.

    Below ``lam = 1`` the alternating series cancels badly, so the CDF is
    taken from the equivalent theta-function series instead.
    """
    if lam <= 0.0:
        return 1.0
    k = np.arange(1, KS_TERMS + 1)
    if lam < 1.0:
        cdf = math.sqrt(2.0 * math.pi) / lam * np.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * lam**2)).sum()
        return float(min(1.0, max(0.0, 1.0 - cdf)))
    terms = (-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * lam**2)
    return float(min(1.0, max(0.0, 2.0 * terms.sum())))


def ks_test(sample, cdf=ndtr):
    """One-sample KS statistic against ``cdf`` (standard normal by default) and asymptotic p-value."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n < 8:
        raise DomainError(f"KS test needs at least 8 observations, got {n}")
    f = cdf(x)
    i = np.arange(1, n + 1)
    stat = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return stat, kolmogorov_sf(math.sqrt(n) * stat)


def wasserstein1_1d(a, b):
    """W1 between two equal-size equal-weight samples on the line, via order statistics."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size != b.size:
        raise ShapeError(f"samples differ in size: {a.size} vs {b.size}")
    if a.size == 0:
        raise DomainError("empty samples")
    return float(np.mean(np.abs(a - b)))


def wasserstein1_empirical(a, b):
    """W1 between two equal-weight samples of any sizes: ``int |F_a - F_b| dx``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise DomainError("empty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    pts = np.concatenate([a, b])
    pts.sort(kind="mergesort")
    fa = np.searchsorted(a, pts[:-1], side="right") / a.size
    fb = np.searchsorted(b, pts[:-1], side="right") / b.size
    return float(np.sum(np.abs(fa - fb) * np.diff(pts)))


# -- losses ------------------------------------------------------------------

def _rowwise(z):
    z = np.asarray(z, dtype=float)
    return z[None, :] if z.ndim == 1 else z


LOSSES = {
    "squared_norm": lambda z, c: np.sum(_rowwise(z) ** 2, axis=1),
    "abs_first": lambda z, c: np.abs(_rowwise(z)[:, 0]),
    "indicator": lambda z, c: (np.linalg.norm(_rowwise(z), axis=1) > c).astype(float),
    "one": lambda z, c: np.ones(_rowwise(z).shape[0]),
    "abs_norm": lambda z, c: np.linalg.norm(_rowwise(z), axis=1),
    "max_abs": lambda z, c: np.max(np.abs(_rowwise(z)), axis=1),
}


def loss_values(name, z, c=1.0):
    try:
        w = LOSSES[name]
    except KeyError:
        raise KeyError(f"unknown loss {name!r}; known: {sorted(LOSSES)}") from None
    return w(z, c)


def gaussian_risk(name, p, c=1.0):
    """``E w(xi)`` for ``xi ~ N(0, I_p)``."""
    if name not in LOSSES:
        raise KeyError(f"unknown loss {name!r}; known: {sorted(LOSSES)}")
    if p < 1:
        raise DomainError("dimension must be positive")
    if name == "squared_norm":
        return float(p)
    if name == "abs_first":
        return math.sqrt(2.0 / math.pi)
    if name == "indicator":
        return float(chi2.sf(c * c, p)) if c > 0 else 1.0
    if name == "one":
        return 1.0
    if name == "abs_norm":
        return float(math.sqrt(2.0) * math.exp(gammaln((p + 1) / 2) - gammaln(p / 2)))
    # max_abs: E max_k |xi_k| = int_0^inf 1 - (2 Phi(t) - 1)^p dt
    val, _ = integrate.quad(lambda t: 1.0 - (2.0 * ndtr(t) - 1.0) ** p, 0.0, np.inf,
                            epsabs=1e-10, epsrel=1e-8)
    return float(val)
