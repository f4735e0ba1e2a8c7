"""Named scalar kernels and the interaction backend.

Kernels used by the generalised-linear and nonlinear drift families come
from a fixed registry so that configuration files never carry code.  The
pairwise sums over the empirical measure are the hot loop of the package;
they run in the compiled ``_ckernels`` extension when it is importable and
in numpy otherwise.  ``MFL_BACKEND=python`` forces the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from mfl import _pykernels

KERNEL_CODES = {"zero": 0, "identity": 1, "gaussian": 2, "tanh": 3, "one": 4}


def _select_backend():
    if os.environ.get("MFL_BACKEND", "").lower() == "python":
        return _pykernels, "python"
    try:
        from mfl import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


_impl, BACKEND = _select_backend()


@dataclass(frozen=True)
class Kernel:
    """A real function of one real variable with its derivative."""

    name: str
    code: int
    func: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]

    def __call__(self, u):
        return self.func(np.asarray(u, dtype=float))


def _tanh_deriv(u):
    return 1.0 - np.tanh(u) ** 2


REGISTRY = {
    "zero": Kernel("zero", 0, lambda u: np.zeros_like(u), lambda u: np.zeros_like(u)),
    "identity": Kernel("identity", 1, lambda u: u * 1.0, lambda u: np.ones_like(u)),
    "gaussian": Kernel(
        "gaussian", 2, lambda u: np.exp(-u * u), lambda u: -2.0 * u * np.exp(-u * u)
    ),
    "tanh": Kernel("tanh", 3, np.tanh, _tanh_deriv),
    "one": Kernel("one", 4, lambda u: np.ones_like(u), lambda u: np.zeros_like(u)),
}


def get_kernel(name: str) -> Kernel:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown kernel {name!r}; known: {sorted(REGISTRY)}") from None


def conv_scalar(x, atoms, kernel: Kernel, backend=None):
    """``(1/N) sum_j kernel(x_i - atoms_j)`` for 1-d points ``x`` and ``atoms``."""
    impl = backend or _impl
    return impl.conv_scalar(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(atoms, dtype=np.float64),
        kernel.code,
    )


def double_layer(x, atoms, theta, want_grad=True, backend=None):
    """Double-layer force ``(1/N) sum_j grad U_theta(x_i - y_j)`` and its theta-gradient."""
    impl = backend or _impl
    t1, t2, t3, t4 = (float(v) for v in theta)
    return impl.double_layer(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(atoms, dtype=np.float64),
        t1, t2, t3, t4, bool(want_grad),
    )
