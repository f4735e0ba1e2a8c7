"""Pure numpy implementation of the pairwise-interaction kernels.

Used when the compiled ``mfl._ckernels`` extension is not available, and as
the reference the compiled version is tested against.
"""
import numpy as np

# evaluation points processed per block; bounds the (block, atoms) temporaries
_BLOCK_ELEMS = 1 << 21

_KERNEL_FUNCS = {
    0: lambda u: np.zeros_like(u),
    1: lambda u: u,
    2: lambda u: np.exp(-u * u),
    3: np.tanh,
    4: lambda u: np.ones_like(u),
}


def _blocks(n, natoms):
    step = max(1, _BLOCK_ELEMS // max(natoms, 1))
    for start in range(0, n, step):
        yield start, min(n, start + step)


def conv_scalar(x, y, code):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty(x.shape[0])
    if code == 0:
        out[:] = 0.0
        return out
    func = _KERNEL_FUNCS[code]
    for s, e in _blocks(x.shape[0], y.shape[0]):
        out[s:e] = func(x[s:e, None] - y[None, :]).mean(axis=1)
    return out


def double_layer(x, y, th1, th2, th3, th4, want_grad=True):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = x.shape
    drift = np.empty((n, d))
    grad = np.empty((n, d, 4)) if want_grad else None
    for s, e in _blocks(n, y.shape[0] * d):
        diff = x[s:e, None, :] - y[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        e2 = np.exp(-th2 * r2)
        e4 = np.exp(-th4 * r2)
        a = 2.0 * th1 * th2 * e2 - 2.0 * th3 * th4 * e4
        drift[s:e] = np.einsum("ij,ijk->ik", a, diff) / y.shape[0]
        if want_grad:
            coef = np.stack(
                [
                    2.0 * th2 * e2,
                    2.0 * th1 * (1.0 - th2 * r2) * e2,
                    -2.0 * th4 * e4,
                    -2.0 * th3 * (1.0 - th4 * r2) * e4,
                ],
                axis=-1,
            )
            grad[s:e] = np.einsum("ijq,ijk->ikq", coef, diff) / y.shape[0]
    return drift, grad
