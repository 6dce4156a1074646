"""Symmetric square roots and thresholded pseudo-inverses."""

import numpy as np

PINV_RTOL = 1e-12


def symmetrize(M):
    return 0.5 * (M + M.T)


def psd_sqrt(M):
    """Principal square root of a symmetric PSD matrix.

    Negative eigenvalues are clipped to zero, so rank-deficient inputs are
    fine. Returns ``(root, min_eigenvalue)`` so callers can decide whether the
    clipped mass was acceptable.
    """
    M = symmetrize(np.asarray(M, dtype=float))
    lam, U = np.linalg.eigh(M)
    lam_min = float(lam.min()) if lam.size else 0.0
    lam = np.where(lam > 0.0, lam, 0.0)
    root = (U * np.sqrt(lam)) @ U.T
    return symmetrize(root), lam_min


def psd_inv_sqrt(M, rtol=PINV_RTOL):
    """Pseudo-inverse square root; eigenvalues below ``rtol * lam_max`` count as zero."""
    M = symmetrize(np.asarray(M, dtype=float))
    lam, U = np.linalg.eigh(M)
    lam_max = lam.max() if lam.size else 0.0
    keep = lam > rtol * lam_max if lam_max > 0 else np.zeros_like(lam, dtype=bool)
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / np.sqrt(lam[keep])
    return symmetrize((U * inv) @ U.T)


def range_projector(M, rtol=PINV_RTOL):
    """Orthogonal projector onto the range of a symmetric PSD matrix."""
    lam, U = np.linalg.eigh(symmetrize(np.asarray(M, dtype=float)))
    lam_max = lam.max() if lam.size else 0.0
    if lam_max <= 0:
        return np.zeros_like(M, dtype=float)
    Uk = U[:, lam > rtol * lam_max]
    return Uk @ Uk.T


def thin_svd_pinv(delta, rtol=PINV_RTOL):
    """Thin SVD of ``delta`` with singular values below ``rtol * s_max`` dropped.

    Returns ``(U, s, Vt)`` restricted to the retained rank.
    """
    U, s, Vt = np.linalg.svd(delta, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0], s[:0], Vt[:0]
    keep = s > rtol * s[0]
    return U[:, keep], s[keep], Vt[keep]

