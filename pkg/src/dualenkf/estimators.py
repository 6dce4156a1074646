"""scikit-learn style wrappers around the exact and ensemble filters.

Rows of the input are observations Z_0..Z_{T-1}. ``transform`` returns, row
for row, the predicted mean of X_{t+1} after absorbing Z_t, so the output
aligns with the input and the estimators drop into a ``Pipeline``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .ensemble import VariantSpec, run_filter
from .exceptions import DimensionMismatch
from .kalman import run_kf
from .model import NoiseStreams, validate_model
from .solvers import GammaPair


def _check_observations(Z, model):
    Z = check_array(Z, ensure_2d=False, ensure_min_samples=0, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(-1, 1) if model.m == 1 else Z.reshape(1, -1)
    if Z.shape[1] != model.m:
        raise DimensionMismatch(f"observations have {Z.shape[1]} columns, model expects m = {model.m}")
    return Z


class KalmanFilter(TransformerMixin, BaseEstimator):
    """Exact filter for a :class:`~dualenkf.model.SystemModel`.

    Attributes after ``fit``: ``means_`` (T+1, n), ``covariances_``
    (T+1, n, n), ``gains_`` (T, n, m).
    """

    def __init__(self, model=None):
        self.model = model

    def fit(self, Z, y=None):
        validate_model(self.model)
        Z = _check_observations(Z, self.model)
        beliefs, schedule = run_kf(self.model, Z)
        self.means_ = np.array([b.mean for b in beliefs])
        self.covariances_ = schedule.covs
        self.gains_ = schedule.gains
        self.n_features_in_ = Z.shape[1]
        return self

    def transform(self, Z):
        check_is_fitted(self, "means_")
        Z = _check_observations(Z, self.model)
        beliefs, _ = run_kf(self.model, Z)
        return np.array([b.mean for b in beliefs[1:]]).reshape(Z.shape[0], self.model.n)


class EnsembleKalmanFilter(TransformerMixin, BaseEstimator):
    """Gamma-parameterised ensemble filter.

    Parameters
    ----------
    model : SystemModel
    n_members : int
        Ensemble size N.
    solver : str
        One of stochastic, denkf, ensrf_scalar, sqrt_general, eakf_svd, etkf.
    gamma1, gamma2 : float or None
        Noise-copy scalings; None takes the solver's default.
    gain_source : {"oracle", "ensemble"}
    init : {"random", "deterministic"}
    random_state : int
        Seed for the keyed noise streams.
    """

    def __init__(
        self,
        model=None,
        n_members=100,
        solver="stochastic",
        gamma1=None,
        gamma2=None,
        gain_source="oracle",
        init="random",
        random_state=0,
    ):
        self.model = model
        self.n_members = n_members
        self.solver = solver
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.gain_source = gain_source
        self.init = init
        self.random_state = random_state

    def _variant(self):
        gammas = None
        if self.gamma1 is not None or self.gamma2 is not None:
            gammas = GammaPair(
                1.0 if self.gamma1 is None else self.gamma1,
                0.0 if self.gamma2 is None else self.gamma2,
            )
        return VariantSpec(self.solver, gammas=gammas, gain_source=self.gain_source)

    def _run(self, Z):
        validate_model(self.model)
        Z = _check_observations(Z, self.model)
        result = run_filter(
            self.model, Z, self._variant(), self.n_members, NoiseStreams(int(self.random_state)), init=self.init
        )
        return Z, result

    def fit(self, Z, y=None):
        Z, result = self._run(Z)
        self.variant_ = self._variant()
        self.means_ = result.means
        self.covariances_ = result.covs
        self.gains_ = result.gains
        self.ct_residuals_ = result.ct_residuals
        self.ensemble_ = result.ensembles[-1].members
        self.n_features_in_ = Z.shape[1]
        return self

    def transform(self, Z):
        check_is_fitted(self, "means_")
        Z, result = self._run(Z)
        return result.means[1:].reshape(Z.shape[0], self.model.n)
