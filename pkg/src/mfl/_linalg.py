"""Small symmetric-matrix helpers shared by the likelihood and estimation code."""
import numpy as np

from mfl.errors import SingularMatrixError

# a matrix is degenerate when det < DEGENERACY_RTOL * (trace / p) ** p
DEGENERACY_RTOL = 1e-12


def degeneracy_threshold(mat):
    mat = np.asarray(mat, dtype=float)
    p = mat.shape[0]
    return DEGENERACY_RTOL * (np.trace(mat) / p) ** p


def is_degenerate(mat):
    mat = np.asarray(mat, dtype=float)
    tr = np.trace(mat)
    if not np.isfinite(tr) or tr <= 0.0:
        return True
    return bool(np.linalg.det(mat) < degeneracy_threshold(mat))


def condition_number(mat):
    w = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    if w[0] <= 0.0:
        return np.inf
    return float(w[-1] / w[0])


def require_nondegenerate(mat, what="matrix"):
    if is_degenerate(mat):
        raise SingularMatrixError(
            f"{what} is degenerate", det=float(np.linalg.det(mat)), cond=condition_number(mat)
        )


def sym_power(mat, power):
    """``mat ** power`` for a symmetric PSD matrix via its eigendecomposition.

    Negative powers require a nondegenerate matrix; tiny negative eigenvalues
    from round-off are clipped to zero for nonnegative powers.
    """
    mat = 0.5 * (np.asarray(mat, dtype=float) + np.asarray(mat, dtype=float).T)
    w, v = np.linalg.eigh(mat)
    if power < 0:
        require_nondegenerate(mat)
    else:
        w = np.clip(w, 0.0, None)
    root = (v * w**power) @ v.T
    return 0.5 * (root + root.T)
