"""Recursive gamma-parameterised ensemble filter.

Each member is moved by

    X_{t+1} = A (m + K (z - H m + gamma2 zeta_j)) + C^T (X_j - m) + gamma1 xi_j

with m the ensemble mean, K the gain and C the anomaly gain from
:mod:`dualenkf.solvers`. The ETKF variant replaces ``C^T delta`` by
``delta W`` with W acting in the ensemble subspace.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ._linalg import psd_sqrt, symmetrize
from .exceptions import EnsembleTooSmall, NumericalError, ValidationError
from .kalman import kalman_gain, riccati_schedule
from .model import Substream, draw_copies
from .solvers import GammaPair, etkf_transform, gamma_rhs, rhs_consistency, solve_ct

SOLVERS = ("stochastic", "denkf", "ensrf_scalar", "sqrt_general", "eakf_svd", "etkf")
GAIN_SOURCES = ("oracle", "ensemble")
APPLICATIONS = ("state_space", "subspace")

_FIXED_GAMMAS = {
    "stochastic": GammaPair(1.0, 1.0),
    "denkf": GammaPair(1.0, 0.0),
    "ensrf_scalar": GammaPair(1.0, 0.0),
}


class EnsembleState(NamedTuple):
    members: np.ndarray  # (n, N), column j is member j
    t: int = 0

    @property
    def size(self):
        return self.members.shape[1]


@dataclass(frozen=True)
class VariantSpec:
    """One point of the filter family.

    ``gammas`` defaults to the value the solver implies: (1, 1) for
    stochastic, (1, 0) for the deterministic square-root filters.
    ``application`` is inferred from the solver when omitted.
    """

    solver: str = "stochastic"
    gammas: Optional[GammaPair] = None
    gain_source: str = "oracle"
    application: Optional[str] = None

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValidationError("variant.solver", f"unknown solver {self.solver!r}")
        if self.gain_source not in GAIN_SOURCES:
            raise ValidationError("variant.gain_source", f"must be one of {GAIN_SOURCES}")
        gammas = self.gammas
        if gammas is None:
            gammas = _FIXED_GAMMAS.get(self.solver, GammaPair(1.0, 0.0))
        elif not isinstance(gammas, GammaPair):
            gammas = GammaPair(*gammas)
        object.__setattr__(self, "gammas", gammas)
        fixed = _FIXED_GAMMAS.get(self.solver)
        if fixed is not None and gammas != fixed:
            raise ValidationError("variant.gammas", f"{self.solver} requires gammas ({fixed.gamma1:g}, {fixed.gamma2:g})")
        app = self.application
        if app is None:
            app = "subspace" if self.solver == "etkf" else "state_space"
            object.__setattr__(self, "application", app)
        if app not in APPLICATIONS:
            raise ValidationError("variant.application", f"must be one of {APPLICATIONS}")
        if (app == "subspace") != (self.solver == "etkf"):
            raise ValidationError("variant.application", "subspace application goes with the etkf solver only")

    @property
    def tag(self):
        return f"{self.solver}[{self.gammas.gamma1:g},{self.gammas.gamma2:g}]/{self.gain_source}"


def _check_size(N):
    if N < 2:
        raise EnsembleTooSmall(f"ensemble size {N} < 2; anomalies need N >= 2")


def helmert_rows(N, rows=None):
    """First ``rows`` rows of the Helmert basis: orthonormal and orthogonal to ones.

    Only the requested rows are built, so large N stays cheap.
    """
    rows = N - 1 if rows is None else rows
    V = np.zeros((rows, N))
    for k in range(1, rows + 1):
        V[k - 1, :k] = 1.0 / np.sqrt(k * (k + 1))
        V[k - 1, k] = -k / np.sqrt(k * (k + 1))
    return V


def exact_anomalies(Sigma, N):
    """n x N anomalies with zero column sum and sample covariance exactly Sigma."""
    n = Sigma.shape[0]
    if N < n + 1:
        raise EnsembleTooSmall(f"exact-moment ensemble needs N >= n + 1 = {n + 1}, got {N}")
    root, _ = psd_sqrt(Sigma)
    return np.sqrt(N - 1) * root @ helmert_rows(N, n)


def init_ensemble_random(model, N, streams):
    _check_size(N)
    draws = streams.gaussian(Substream.COPY_INIT, 0, model.Sigma0, N)
    return EnsembleState(model.m0[:, None] + draws.T, 0)


def init_ensemble_deterministic(model, N):
    """Ensemble whose sample mean and covariance equal (m0, Sigma0) exactly."""
    _check_size(N)
    delta = exact_anomalies(model.Sigma0, N)
    return EnsembleState(model.m0[:, None] + delta, 0)


def anomalies(ensemble):
    X = ensemble.members
    mean = X.mean(axis=1)
    delta = X - mean[:, None]
    delta -= delta.mean(axis=1, keepdims=True)
    return mean, delta


def sample_covariance(delta):
    return symmetrize(delta @ delta.T / (delta.shape[1] - 1))


def _sigma_source(ensemble, schedule, spec, delta):
    if spec.gain_source == "oracle":
        return schedule.covs[ensemble.t]
    return sample_covariance(delta)


def effective_gain(ensemble, model, schedule, spec):
    """Oracle gain K_t from the schedule, or the gain of the sample covariance."""
    if spec.gain_source == "oracle":
        return schedule.gains[ensemble.t]
    _, delta = anomalies(ensemble)
    return kalman_gain(sample_covariance(delta), model, ensemble.t)


def propagate_members(X, mean, z, K, model, t, gammas, xi=None, zeta=None, C=None, W=None):
    """Apply the member update to the (n, N) array ``X`` around ``mean``.

    Exactly one of ``C`` (state-space anomaly gain, applied as C^T) or ``W``
    (subspace transform, applied from the right) is used. ``xi``/``zeta`` are
    (N, n)/(N, m) noise copies and may be omitted when the matching gamma is 0.
    """
    A, H, _, _ = model.at(t)
    centre = A @ (mean + K @ (z - H @ mean))
    delta = X - mean[:, None]
    out = centre[:, None] + (delta @ W if W is not None else C.T @ delta)
    if gammas.gamma2 and zeta is not None:
        out += gammas.gamma2 * (A @ K @ zeta.T)
    if gammas.gamma1 and xi is not None:
        out += gammas.gamma1 * xi.T
    return out


class StepInfo(NamedTuple):
    gain: np.ndarray
    ct_residual: float
    rhs_residual: float
    C: Optional[np.ndarray]


def enkf_step(ensemble, z, model, schedule, spec, streams, return_info=False):
    """Advance the ensemble by one observation."""
    t = ensemble.t
    N = ensemble.size
    _check_size(N)
    mean, delta = anomalies(ensemble)
    gammas = spec.gammas
    try:
        Sigma = _sigma_source(ensemble, schedule, spec, delta)
        K = schedule.gains[t] if spec.gain_source == "oracle" else kalman_gain(Sigma, model, t)
        if spec.solver == "etkf":
            tr = etkf_transform(delta, gamma_rhs(Sigma, K, model, gammas, t))
            C, W, residual = None, tr.W, tr.subspace_residual
        else:
            sol = solve_ct(spec.solver, Sigma, K, model, gammas, t, delta=delta)
            C, W, residual = sol.C, None, sol.residual
        xi = zeta = None
        if gammas.gamma1 or gammas.gamma2:
            xi, zeta = draw_copies(streams, model, None, t, rows=N)
        X = propagate_members(ensemble.members, mean, np.asarray(z, dtype=float), K, model, t, gammas, xi, zeta, C=C, W=W)
        rhs = rhs_consistency(Sigma, K, model, gammas, t) if return_info else 0.0
    except NumericalError as exc:
        raise exc.with_step(t)
    new = EnsembleState(X, t + 1)
    if return_info:
        return new, StepInfo(K, residual, rhs, C)
    return new


@dataclass
class FilterResult:
    means: np.ndarray  # (T+1, n)
    covs: np.ndarray  # (T+1, n, n)
    gains: np.ndarray  # (T, n, m)
    ct_residuals: np.ndarray  # (T,)
    rhs_residuals: np.ndarray  # (T,)
    ensembles: list = field(default_factory=list)


def run_filter(model, observations, spec, N, streams, init="random", schedule=None, keep_ensembles=True):
    """Run the ensemble filter over a (T, m) observation array."""
    obs = np.asarray(observations, dtype=float).reshape(-1, model.m)
    T = obs.shape[0]
    if schedule is None:
        schedule = riccati_schedule(model, T)
    if init == "random":
        ens = init_ensemble_random(model, N, streams)
    elif init == "deterministic":
        ens = init_ensemble_deterministic(model, N)
    else:
        raise ValidationError("init", f"unknown init mode {init!r}")
    n, m = model.n, model.m
    means = np.empty((T + 1, n))
    covs = np.empty((T + 1, n, n))
    gains = np.empty((T, n, m))
    ct_res = np.empty(T)
    rhs_res = np.empty(T)
    kept = [ens] if keep_ensembles else []
    means[0], delta = anomalies(ens)
    covs[0] = sample_covariance(delta)
    for t in range(T):
        ens, info = enkf_step(ens, obs[t], model, schedule, spec, streams, return_info=True)
        gains[t] = info.gain
        ct_res[t] = info.ct_residual
        rhs_res[t] = info.rhs_residual
        means[t + 1], delta = anomalies(ens)
        covs[t + 1] = sample_covariance(delta)
        if keep_ensembles:
            kept.append(ens)
    return FilterResult(means, covs, gains, ct_res, rhs_res, kept)
