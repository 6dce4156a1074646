"""Input checking helpers shared by the model, solvers and estimators."""

import numpy as np

from .exceptions import AsymmetricMatrix, DimensionMismatch, NotPSD

SYM_RTOL = 1e-12
PSD_RTOL = 1e-12


def as_matrix(x, name, shape=None):
    """Return ``x`` as a finite 2-D float array, optionally of a given shape."""
    arr = np.atleast_2d(np.asarray(x, dtype=float))
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix, got ndim={arr.ndim}")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return arr


def as_vector(x, name, size=None):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got ndim={arr.ndim}")
    if size is not None and arr.shape[0] != size:
        raise DimensionMismatch(f"{name} has length {arr.shape[0]}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return arr


def check_symmetric(M, name, rtol=SYM_RTOL):
    scale = max(np.linalg.norm(M), 1.0)
    if np.linalg.norm(M - M.T) > rtol * scale:
        raise AsymmetricMatrix(name)
    return M


def check_psd(M, name, definite=False, rtol=PSD_RTOL):
    """Symmetry plus an eigenvalue floor of ``-rtol * ||M||``.

    With ``definite=True`` the smallest eigenvalue must be strictly positive.
    """
    check_symmetric(M, name)
    lam = np.linalg.eigvalsh(M) if M.size else np.zeros(1)
    lam_min = float(lam.min())
    floor = -rtol * float(np.abs(lam).max())
    if definite and lam_min <= 0.0:
        raise NotPSD(name, lam_min, definite=True)
    if lam_min < floor:
        raise NotPSD(name, lam_min)
    return M
