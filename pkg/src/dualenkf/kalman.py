"""Exact Kalman filter: the ground truth for every ensemble variant."""

from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from ._linalg import symmetrize
from ._validation import as_vector
from .exceptions import NumericalError, SingularInnovation

COND_MAX = 1e14


class GaussianBelief(NamedTuple):
    mean: np.ndarray
    cov: np.ndarray


class GainSchedule(NamedTuple):
    gains: np.ndarray  # (T, n, m): K_0 .. K_{T-1}
    covs: np.ndarray  # (T+1, n, n): Sigma_0 .. Sigma_T

    @property
    def horizon(self):
        return self.gains.shape[0]


def _innovation_factor(Sigma, H, R):
    S = symmetrize(H @ Sigma @ H.T + R)
    if np.linalg.cond(S) > COND_MAX:
        raise SingularInnovation(f"innovation covariance condition number {np.linalg.cond(S):.3e} exceeds {COND_MAX:.0e}")
    try:
        return sla.cho_factor(S)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovation(str(exc)) from exc


def kalman_gain(Sigma, model, t=0):
    """K = Sigma H^T (H Sigma H^T + R)^{-1}, via a Cholesky solve."""
    _, H, _, R = model.at(t)
    Sigma = np.asarray(Sigma, dtype=float)
    fac = _innovation_factor(Sigma, H, R)
    return sla.cho_solve(fac, H @ Sigma).T


def riccati_step(Sigma, model, t=0):
    """One step of the covariance recursion, symmetrized."""
    A, H, Q, R = model.at(t)
    Sigma = np.asarray(Sigma, dtype=float)
    fac = _innovation_factor(Sigma, H, R)
    HSA = H @ Sigma @ A.T
    out = A @ Sigma @ A.T + Q - HSA.T @ sla.cho_solve(fac, HSA)
    return symmetrize(out)


def kf_mean_step(belief, z, model, t=0):
    """m' = A (m + K (z - H m))."""
    A, H, _, _ = model.at(t)
    K = kalman_gain(belief.cov, model, t)
    m = belief.mean
    return A @ (m + K @ (z - H @ m))


def run_kf(model, observations):
    """Filter a (T, m) observation array.

    Returns the predictive beliefs N(m_t, Sigma_t) of X_t given Z_{0:t-1}
    for t = 0..T, and the gain schedule.
    """
    obs = np.asarray(observations, dtype=float).reshape(-1, model.m)
    T = obs.shape[0]
    n, m = model.n, model.m
    gains = np.empty((T, n, m))
    covs = np.empty((T + 1, n, n))
    beliefs = [GaussianBelief(model.m0.copy(), symmetrize(model.Sigma0.copy()))]
    covs[0] = beliefs[0].cov
    for t in range(T):
        prev = beliefs[-1]
        z = as_vector(obs[t], "observation", m)
        try:
            A, H, _, _ = model.at(t)
            K = kalman_gain(prev.cov, model, t)
            mean = A @ (prev.mean + K @ (z - H @ prev.mean))
            cov = riccati_step(prev.cov, model, t)
        except NumericalError as exc:
            raise exc.with_step(t)
        gains[t] = K
        covs[t + 1] = cov
        beliefs.append(GaussianBelief(mean, cov))
    return beliefs, GainSchedule(gains, covs)


def riccati_schedule(model, horizon):
    """Gain schedule without data (the covariance recursion ignores Z)."""
    _, schedule = run_kf(model, np.zeros((horizon, model.m)))
    return schedule
