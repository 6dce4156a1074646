"""Estimation/control duality: backward dual processes and batch estimators.

A linear functional a^T X_T is estimated by a batch formula whose weights are
driven by two backward recursions,

    y_t   = (I - H^T K_t^T) A^T y_{t+1},   y_T   = a   (closed loop of the dual LQ problem)
    eta_t = C_t eta_{t+1},                 eta_T = a   (anomaly channel)

with transition products Phi_{T,t} a = y_t and Psi_{T,t} a = eta_t. Products
are ordered so that the smaller index multiplies on the left.
"""

from typing import NamedTuple

import numpy as np

from .ensemble import exact_anomalies, propagate_members
from .exceptions import DimensionMismatch
from .kalman import run_kf
from .model import NoiseStreams, Substream, draw_copies, simulate_truth
from .solvers import solve_ct


class DualControls(NamedTuple):
    a: np.ndarray
    b: np.ndarray
    u: np.ndarray  # (T, m)
    c: np.ndarray
    v: np.ndarray  # (T, n)
    w: np.ndarray  # (T, m)
    gamma1: float
    gamma2: float


class TransitionProducts(NamedTuple):
    phi: np.ndarray  # (T+1, n, n), phi[t] = Phi_{T,t}
    psi: np.ndarray  # (T+1, n, n), psi[t] = Psi_{T,t}


class NoiseCopies(NamedTuple):
    x0: np.ndarray  # realised copy of X_0
    xi: np.ndarray  # (T, n)
    zeta: np.ndarray  # (T, m)


def _check_horizon(schedule, T):
    if schedule.gains.shape[0] < T:
        raise DimensionMismatch(f"gain schedule covers {schedule.gains.shape[0]} steps, need {T}")


def backward_dual(model, schedule, a, T):
    """Optimal dual trajectory: u_t = -K_t^T A^T y_{t+1}, y_t = A^T y_{t+1} + H^T u_t.

    Returns ``(y, u, b)`` with y of shape (T+1, n), u of shape (T, m), b = y_0.
    """
    _check_horizon(schedule, T)
    a = np.asarray(a, dtype=float)
    y = np.empty((T + 1, model.n))
    u = np.empty((T, model.m))
    y[T] = a
    for t in range(T - 1, -1, -1):
        A, H, _, _ = model.at(t)
        Ay = A.T @ y[t + 1]
        u[t] = -schedule.gains[t].T @ Ay
        y[t] = Ay + H.T @ u[t]
    return y, u, y[0].copy()


def propagate_dual(model, a, u):
    """Dual state y for an arbitrary control sequence ``u`` (T, m)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    T = u.shape[0]
    y = np.empty((T + 1, model.n))
    y[T] = a
    for t in range(T - 1, -1, -1):
        A, H, _, _ = model.at(t)
        y[t] = A.T @ y[t + 1] + H.T @ u[t]
    return y


def dual_cost(model, y, u):
    """y_0^T Sigma0 y_0 + sum_t (y_{t+1}^T Q y_{t+1} + u_t^T R u_t)."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1, model.m)
    if y.shape[0] != u.shape[0] + 1:
        raise DimensionMismatch("y must have one more entry than u")
    cost = float(y[0] @ model.Sigma0 @ y[0])
    for t in range(u.shape[0]):
        _, _, Q, R = model.at(t)
        cost += float(y[t + 1] @ Q @ y[t + 1] + u[t] @ R @ u[t])
    return cost


def build_transitions(model, schedule, C_list, T):
    C_list = list(C_list)
    if len(C_list) < T:
        raise DimensionMismatch(f"need {T} C_t matrices, got {len(C_list)}")
    _check_horizon(schedule, T)
    n = model.n
    phi = np.empty((T + 1, n, n))
    psi = np.empty((T + 1, n, n))
    phi[T] = psi[T] = np.eye(n)
    for t in range(T - 1, -1, -1):
        A, H, _, _ = model.at(t)
        closed = (np.eye(n) - H.T @ schedule.gains[t].T) @ A.T
        phi[t] = closed @ phi[t + 1]
        psi[t] = C_list[t] @ psi[t + 1]
    return TransitionProducts(phi, psi)


def optimal_controls(a, model, schedule, transitions, gammas):
    """The weights (b, u, c, v, w) that solve both moment objectives."""
    a = np.asarray(a, dtype=float)
    phi, psi = transitions
    T = phi.shape[0] - 1
    u = np.empty((T, model.m))
    v = np.empty((T, model.n))
    w = np.empty((T, model.m))
    for t in range(T):
        A = model.at(t).A
        K = schedule.gains[t]
        y_next = phi[t + 1] @ a
        eta_next = psi[t + 1] @ a
        u[t] = -K.T @ A.T @ y_next
        v[t] = gammas.gamma1 * eta_next
        w[t] = gammas.gamma2 * K.T @ A.T @ eta_next
    return DualControls(a, phi[0] @ a, u, psi[0] @ a, v, w, gammas.gamma1, gammas.gamma2)


def batch_estimate(a, transitions, schedule, observations, copies, model, gammas):
    """Closed-form optimal estimator S~_T for the functional a^T X_T.

    a^T ( Phi_0^T m0 + sum Phi_{t+1}^T A K_t Z_t + Psi_0^T (X~0 - m0)
          + gamma1 sum Psi_{t+1}^T xi~_t + gamma2 sum Psi_{t+1}^T A K_t zeta~_t )
    """
    phi, psi = transitions
    T = phi.shape[0] - 1
    Z = np.asarray(observations, dtype=float).reshape(-1, model.m)
    if Z.shape[0] < T or copies.xi.shape[0] < T or copies.zeta.shape[0] < T:
        raise DimensionMismatch(f"data and noise copies must cover {T} steps")
    x = phi[0].T @ model.m0 + psi[0].T @ (copies.x0 - model.m0)
    for t in range(T):
        AK = model.at(t).A @ schedule.gains[t]
        x += phi[t + 1].T @ (AK @ Z[t])
        x += psi[t + 1].T @ (gammas.gamma1 * copies.xi[t] + gammas.gamma2 * (AK @ copies.zeta[t]))
    return float(np.asarray(a, dtype=float) @ x)


def augmented_estimate(controls, observations, copies, model):
    """The parametrised estimator evaluated directly from its weights:

    b^T m0 - sum u_t^T Z_t + c^T (X~0 - m0) + sum v_t^T xi~_t + sum w_t^T zeta~_t
    """
    T = controls.u.shape[0]
    Z = np.asarray(observations, dtype=float).reshape(-1, model.m)[:T]
    s = controls.b @ model.m0 - np.sum(controls.u * Z) + controls.c @ (copies.x0 - model.m0)
    s += np.sum(controls.v * copies.xi[:T]) + np.sum(controls.w * copies.zeta[:T])
    return float(s)


def second_moment_identity(controls, model, schedule):
    """|c^T Sigma0 c + sum v^T Q v + sum w^T R w - a^T Sigma_T a|."""
    T = controls.u.shape[0]
    total = float(controls.c @ model.Sigma0 @ controls.c)
    for t in range(T):
        _, _, Q, R = model.at(t)
        total += float(controls.v[t] @ Q @ controls.v[t] + controls.w[t] @ R @ controls.w[t])
    a = controls.a
    return abs(total - float(a @ schedule.covs[T] @ a))


class EquivalenceRun(NamedTuple):
    deviation: float
    scale: float
    recursive: np.ndarray  # (T+1, n) member trajectory
    C_list: list


def verify_batch_recursive(model, variant, T, seed, replicate=0, observations=None):
    """Compare the recursive member against the batch estimator.

    One member is run through the recursive update with the exact conditional
    mean m_t in place of the ensemble mean; its C_t sequence is then fed to the
    batch formula. Every horizon 0..T and every basis direction is checked.
    Returns an :class:`EquivalenceRun`; ``deviation`` is the maximum absolute
    gap.
    """
    if variant.solver == "etkf":
        raise ValueError("etkf has no state-space C_t; compare it through sample covariances instead")
    streams = NoiseStreams(seed, replicate)
    gammas = variant.gammas
    n, m = model.n, model.m
    if observations is None:
        observations = simulate_truth(model, T, streams).observations if T > 0 else np.zeros((0, m))
    Z = np.asarray(observations, dtype=float).reshape(-1, m)[:T]
    beliefs, schedule = run_kf(model, Z)

    x0 = model.m0 + streams.gaussian(Substream.COPY_INIT, 0, model.Sigma0, 1)[0]
    xi = np.zeros((T, n))
    zeta = np.zeros((T, m))
    for t in range(T):
        xi[t], zeta[t] = draw_copies(streams, model, 0, t)
    copies = NoiseCopies(x0, xi, zeta)

    traj = np.empty((T + 1, n))
    traj[0] = x0
    C_list = []
    for t in range(T):
        Sigma, K = schedule.covs[t], schedule.gains[t]
        delta = exact_anomalies(Sigma, n + 1) if variant.solver == "eakf_svd" else None
        C = solve_ct(variant.solver, Sigma, K, model, gammas, t, delta=delta).C
        C_list.append(C)
        x = propagate_members(
            traj[t][:, None], beliefs[t].mean, Z[t], K, model, t, gammas, xi[t][None, :], zeta[t][None, :], C=C
        )
        traj[t + 1] = x[:, 0]

    dev = 0.0
    for horizon in range(T + 1):
        tr = build_transitions(model, schedule, C_list[:horizon], horizon)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            s = batch_estimate(e, tr, schedule, Z, copies, model, gammas)
            dev = max(dev, abs(traj[horizon, i] - s))
    scale = max(1.0, float(np.abs(traj).max()))
    return EquivalenceRun(dev, scale, traj, C_list)

