"""Slow reference implementations written with explicit loops.

They share no code with the vectorised paths: kernels are re-derived with
``math`` and every sum is a Python loop.  Used by the test suite and the
acceptance checks (one-dimensional, scalar diffusion only).
"""
import math

import numpy as np

_KERNELS = {
    "zero": lambda u: 0.0,
    "one": lambda u: 1.0,
    "identity": lambda u: u,
    "gaussian": lambda u: math.exp(-u * u),
    "tanh": math.tanh,
}


def _conv(g, x, atoms):
    total = 0.0
    for y in atoms:
        total += g(x - y)
    return total / len(atoms)


def features(family, x, atoms, f="identity", g="gaussian"):
    """The feature row ``phi(x, nu)`` of a linear family, so that ``b = phi . theta``."""
    if family == "mckean_ou":
        mean = sum(atoms) / len(atoms)
        return [x, 1.0, -(x - mean)]
    if family == "gen_linear":
        return [_KERNELS[f](x), _conv(_KERNELS[g], x, atoms)]
    raise ValueError(f"no feature map for {family}")


def drift(family, theta, x, atoms, f="identity", g="gaussian", link="tanh"):
    if family in ("mckean_ou", "gen_linear"):
        phi = features(family, x, atoms, f, g)
        return sum(a * b for a, b in zip(phi, theta))
    if family == "double_layer":
        t1, t2, t3, t4 = theta
        total = 0.0
        for y in atoms:
            r = x - y
            total += 2 * t1 * t2 * r * math.exp(-t2 * r * r) - 2 * t3 * t4 * r * math.exp(-t4 * r * r)
        return total / len(atoms)
    if family == "nonlinear_f":
        return _KERNELS[link](theta[0] * _conv(_KERNELS[g], x, atoms))
    raise ValueError(f"unknown family {family}")


def loglik(family, theta, data, dt, c=1.0, **kernels):
    """``sum_i sum_j b c^{-1} dX - (1/2) b c^{-1} b dt`` with ``data`` of shape ``(N, m+1)``."""
    data = np.asarray(data, dtype=float)
    N, steps = data.shape[0], data.shape[1] - 1
    total = 0.0
    for j in range(steps):
        atoms = [float(data[k, j]) for k in range(N)]
        for i in range(N):
            b = drift(family, theta, float(data[i, j]), atoms, **kernels)
            dx = float(data[i, j + 1] - data[i, j])
            total += b * dx / c - 0.5 * b * b * dt / c
    return total


def normal_equations(family, data, dt, c=1.0, f="identity", g="gaussian"):
    """Dense ``A``, ``B`` assembled entry by entry, each divided by ``N``."""
    data = np.asarray(data, dtype=float)
    N, steps = data.shape[0], data.shape[1] - 1
    p = 3 if family == "mckean_ou" else 2
    A = [[0.0] * p for _ in range(p)]
    B = [0.0] * p
    for j in range(steps):
        atoms = [float(data[k, j]) for k in range(N)]
        for i in range(N):
            phi = features(family, float(data[i, j]), atoms, f, g)
            dx = float(data[i, j + 1] - data[i, j])
            for a in range(p):
                B[a] += phi[a] * dx / c
                for b in range(p):
                    A[a][b] += phi[a] * phi[b] * dt / c
    return np.array(A) / N, np.array(B) / N


def solve(A, B):
    """Gaussian elimination with partial pivoting."""
    n = len(B)
    M = [list(map(float, A[r])) + [float(B[r])] for r in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        M[col], M[piv] = M[piv], M[col]
        for r in range(col + 1, n):
            fac = M[r][col] / M[col][col]
            for k in range(col, n + 1):
                M[r][k] -= fac * M[col][k]
    out = [0.0] * n
    for r in range(n - 1, -1, -1):
        s = M[r][n] - sum(M[r][k] * out[k] for k in range(r + 1, n))
        out[r] = s / M[r][r]
    return np.array(out)


def wasserstein1(a, b):
    """``int |F_a(x) - F_b(x)| dx`` by walking the merged sample."""
    a, b = sorted(a), sorted(b)
    pts = sorted(a + b)
    total = 0.0
    ia = ib = 0
    for k in range(len(pts) - 1):
        while ia < len(a) and a[ia] <= pts[k]:
            ia += 1
        while ib < len(b) and b[ib] <= pts[k]:
            ib += 1
        total += abs(ia / len(a) - ib / len(b)) * (pts[k + 1] - pts[k])
    return total
