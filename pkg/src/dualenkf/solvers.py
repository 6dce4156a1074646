"""Right-hand side of the anomaly-gain equation and its solvers.

Every variant in the family propagates anomalies as ``C_t^T (X - m)``, where
C_t solves the quadratic matrix equation

    C^T Sigma C = Gamma(gamma1, gamma2)

Gamma is built from the current covariance and gain. The solvers below pick
different (non-unique) solutions, or approximate ones, and always report the
Frobenius residual ``||C^T Sigma C - Gamma||``.
"""

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._linalg import psd_inv_sqrt, psd_sqrt, symmetrize, thin_svd_pinv
from .exceptions import DegenerateEnsemble, IndefiniteGamma, NotScalarObservation, ValidationError
from .kalman import riccati_step

METHODS = ("stochastic", "denkf", "ensrf_scalar", "sqrt_general", "eakf_svd")

# eigenvalue floors for Gamma, relative to ||Gamma||_2
GAMMA_WARN_RTOL = 1e-10
GAMMA_ERROR_RTOL = 1e-8


@dataclass(frozen=True)
class GammaPair:
    """Noise-copy scalings: gamma1 on process noise, gamma2 on measurement noise."""

    gamma1: float = 1.0
    gamma2: float = 1.0

    def __post_init__(self):
        for name in ("gamma1", "gamma2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value)):
                raise ValidationError(name, "must be a finite number")
            if not 0.0 <= value <= 1.0:
                raise ValidationError(name, f"{value} outside [0, 1]")
            object.__setattr__(self, name, float(value))


class CtSolution(NamedTuple):
    C: np.ndarray
    residual: float
    method: str


class EtkfTransform(NamedTuple):
    W: np.ndarray
    subspace_residual: float
    out_of_range: float  # ||Gamma - Pi Gamma Pi||_F, mass the ensemble cannot represent


def _fro(M):
    return float(np.linalg.norm(M, "fro"))


def gamma_rhs(Sigma, K, model, gammas, t=0):
    """Gamma = (A - b G) Sigma (A - b G)^T - k G Sigma G^T + (1 - gamma1^2) Q.

    G = A K H, b = (1 + gamma2^2) / 2 and k = ((1 - gamma2^2) / 2)^2. This
    coefficient makes Gamma + gamma1^2 Q + gamma2^2 A K R K^T A^T equal the
    Riccati update for every gamma; it coincides with ((1 - gamma2) / 2)^2 at
    gamma2 in {0, 1}.
    """
    A, H, Q, _ = model.at(t)
    g1, g2 = gammas.gamma1, gammas.gamma2
    G = A @ K @ H
    B = A - 0.5 * (1.0 + g2**2) * G
    k = (0.5 * (1.0 - g2**2)) ** 2
    out = B @ Sigma @ B.T - k * (G @ Sigma @ G.T) + (1.0 - g1**2) * Q
    return symmetrize(out)


def rhs_consistency(Sigma, K, model, gammas, t=0):
    """||Gamma + gamma1^2 Q + gamma2^2 A K R K^T A^T - Riccati(Sigma)||_F."""
    A, _, Q, R = model.at(t)
    Gamma = gamma_rhs(Sigma, K, model, gammas, t)
    AK = A @ K
    total = Gamma + gammas.gamma1**2 * Q + gammas.gamma2**2 * (AK @ R @ AK.T)
    return _fro(total - riccati_step(Sigma, model, t))


def ct_residual(C, Sigma, Gamma):
    return _fro(C.T @ Sigma @ C - Gamma)


def solve_stochastic(Sigma, K, model, t=0):
    """Closed form for gamma = (1, 1): C = (I - H^T K^T) A^T."""
    A, H, _, _ = model.at(t)
    C = (np.eye(A.shape[0]) - H.T @ K.T) @ A.T
    Gamma = gamma_rhs(Sigma, K, model, GammaPair(1.0, 1.0), t)
    return CtSolution(C, ct_residual(C, Sigma, Gamma), "stochastic")


def solve_denkf(Sigma, K, model, t=0):
    """Half-gain approximation for gamma = (1, 0): C = (A - A K H / 2)^T.

    Drops the -1/4 G Sigma G^T term, so the residual is exactly that term.
    """
    A, H, _, _ = model.at(t)
    C = (A - 0.5 * A @ K @ H).T
    Gamma = gamma_rhs(Sigma, K, model, GammaPair(1.0, 0.0), t)
    return CtSolution(C, ct_residual(C, Sigma, Gamma), "denkf")


def ensrf_alpha(s):
    """Root of s a^2 - 2 a + 1 = 0 continuous with a = 1/2 at s = 0."""
    return 1.0 / (1.0 + math.sqrt(max(1.0 - s, 0.0)))


def solve_ensrf_scalar(Sigma, K, model, t=0):
    """Reduced-gain square root for a single observation, gamma = (1, 0).

    Returns ``(alpha, CtSolution)`` with C = (A - alpha A K H)^T.
    """
    A, H, _, R = model.at(t)
    if H.shape[0] != 1:
        raise NotScalarObservation(f"ensrf_scalar needs m = 1, got m = {H.shape[0]}")
    hsh = (H @ Sigma @ H.T).item()
    s = hsh / (hsh + float(R[0, 0]))
    alpha = ensrf_alpha(s)
    C = (A - alpha * A @ K @ H).T
    Gamma = gamma_rhs(Sigma, K, model, GammaPair(1.0, 0.0), t)
    return alpha, CtSolution(C, ct_residual(C, Sigma, Gamma), "ensrf_scalar")


def solve_ensrf_serial(Sigma, K, model, t=0):
    """Serial scalar EnSRF for diagonal R, folded into one C_t.

    Observations are absorbed one at a time in index order; each contributes
    a factor (I - alpha_i K_i H_i) and C^T = A * prod(factors).
    """
    A, H, _, R = model.at(t)
    if H.shape[0] == 1:
        return solve_ensrf_scalar(Sigma, K, model, t)[1]
    if np.any(R - np.diag(np.diag(R))):
        raise NotScalarObservation("serial ensrf_scalar needs a diagonal R")
    n = A.shape[0]
    M = np.eye(n)
    S = np.array(Sigma, dtype=float)
    for i in range(H.shape[0]):
        h = H[i : i + 1]
        hsh = (h @ S @ h.T).item()
        denom = hsh + float(R[i, i])
        k = S @ h.T / denom
        alpha = ensrf_alpha(hsh / denom)
        M = (np.eye(n) - alpha * k @ h) @ M
        S = symmetrize((np.eye(n) - k @ h) @ S)
    C = (A @ M).T
    Gamma = gamma_rhs(Sigma, K, model, GammaPair(1.0, 0.0), t)
    return CtSolution(C, ct_residual(C, Sigma, Gamma), "ensrf_scalar")


def gamma_sqrt(Gamma):
    """Principal square root of Gamma, enforcing the existence condition."""
    root, lam_min = psd_sqrt(Gamma)
    scale = float(np.linalg.norm(Gamma, 2)) if Gamma.size else 0.0
    if lam_min < -GAMMA_ERROR_RTOL * scale:
        raise IndefiniteGamma(lam_min)
    if lam_min < -GAMMA_WARN_RTOL * scale:
        warnings.warn(f"Gamma: clipped eigenvalue {lam_min:.3e}", RuntimeWarning, stacklevel=3)
    return root


def solve_sqrt_general(Sigma, Gamma, L=None):
    """C = Sigma^{-1/2} L Gamma^{1/2} with symmetric roots; L defaults to I.

    Sigma^{-1/2} is the pseudo-inverse root, so C^T Sigma C = Gamma holds
    exactly only when range(Gamma) lies inside range(Sigma).
    """
    Sigma = np.asarray(Sigma, dtype=float)
    Gamma = symmetrize(np.asarray(Gamma, dtype=float))
    G_half = gamma_sqrt(Gamma)
    S_inv_half = psd_inv_sqrt(Sigma)
    C = S_inv_half @ G_half if L is None else S_inv_half @ L @ G_half
    return CtSolution(C, ct_residual(C, Sigma, Gamma), "sqrt_general")


def inverse_sqrt_from_anomalies(delta):
    """sqrt(N-1) U S^+ U^T from the thin SVD of the n x N anomaly matrix.

    This is the inverse square root of the sample covariance on the span of
    the ensemble.
    """
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    U, s, _ = thin_svd_pinv(delta)
    if s.size == 0:
        raise DegenerateEnsemble("all anomaly singular values are zero")
    N = delta.shape[1]
    return math.sqrt(N - 1) * (U / s) @ U.T


def solve_eakf_svd(delta, Gamma, L=None, Sigma=None):
    """Square-root solve with Sigma^{-1/2} taken from the anomaly SVD.

    The residual is measured against ``Sigma`` if given, otherwise against the
    sample covariance of ``delta``.
    """
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    Gamma = symmetrize(np.asarray(Gamma, dtype=float))
    G_half = gamma_sqrt(Gamma)
    S_inv_half = inverse_sqrt_from_anomalies(delta)
    C = S_inv_half @ G_half if L is None else S_inv_half @ L @ G_half
    if Sigma is None:
        Sigma = delta @ delta.T / (delta.shape[1] - 1)
    return CtSolution(C, ct_residual(C, Sigma, Gamma), "eakf_svd")


def etkf_transform(delta, Gamma):
    """Right-multiplying N x N transform W with (1/(N-1)) delta W W^T delta^T = Pi Gamma Pi.

    W is the symmetric PSD root of M = (N-1) delta^+ Gamma delta^{+T}. Since
    delta^+ maps into the row space of delta, W annihilates the ones vector and
    the transformed anomalies stay centred.
    """
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    Gamma = symmetrize(np.asarray(Gamma, dtype=float))
    gamma_sqrt(Gamma)  # existence check only
    U, s, Vt = thin_svd_pinv(delta)
    if s.size == 0:
        raise DegenerateEnsemble("all anomaly singular values are zero")
    N = delta.shape[1]
    pinv = (Vt.T / s) @ U.T  # N x n
    M = symmetrize((N - 1) * pinv @ Gamma @ pinv.T)
    W, _ = psd_sqrt(M)
    # clipped round-off eigenvalues leak ~sqrt(eps) outside the row space
    P = Vt.T @ Vt
    W = symmetrize(P @ W @ P)
    Pi = U @ U.T
    projected = Pi @ Gamma @ Pi
    sub = _fro(delta @ W @ W.T @ delta.T / (N - 1) - projected)
    return EtkfTransform(W, sub, _fro(Gamma - projected))


def solve_ct(method, Sigma, K, model, gammas, t=0, delta=None):
    """Dispatch to a solver by tag. ``delta`` is needed only for eakf_svd."""
    if method == "stochastic":
        return solve_stochastic(Sigma, K, model, t)
    if method == "denkf":
        return solve_denkf(Sigma, K, model, t)
    if method == "ensrf_scalar":
        return solve_ensrf_serial(Sigma, K, model, t)
    Gamma = gamma_rhs(Sigma, K, model, gammas, t)
    if method == "sqrt_general":
        return solve_sqrt_general(Sigma, Gamma)
    if method == "eakf_svd":
        if delta is None:
            raise ValueError("eakf_svd needs the anomaly matrix")
        return solve_eakf_svd(delta, Gamma, Sigma=Sigma)
    raise ValueError(f"unknown solver {method!r}")
