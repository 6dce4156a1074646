"""Linear-Gaussian state-space model, truth simulation and keyed noise streams.

The model is

    X_{t+1} = A X_t + xi_t,     xi_t   ~ N(0, Q)
    Z_t     = H X_t + zeta_t,   zeta_t ~ N(0, R)

with X_0 ~ N(m0, Sigma0). Any of A, H, Q, R may be time-varying by passing a
stack of matrices indexed by step along the first axis.
"""

import enum
import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._linalg import psd_sqrt
from ._validation import as_matrix, as_vector, check_psd
from .exceptions import DimensionMismatch


class StepMatrices(NamedTuple):
    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray


def _stack(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim < 2:
        arr = np.atleast_2d(arr)
    if arr.ndim not in (2, 3):
        raise DimensionMismatch(f"{name} must be a matrix or a stack of matrices")
    return arr


@dataclass(frozen=True, eq=False)
class SystemModel:
    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    m0: np.ndarray
    Sigma0: np.ndarray

    def __post_init__(self):
        for name in ("A", "H", "Q", "R"):
            object.__setattr__(self, name, _stack(getattr(self, name), name))
        object.__setattr__(self, "m0", np.atleast_1d(np.asarray(self.m0, dtype=float)))
        object.__setattr__(self, "Sigma0", np.atleast_2d(np.asarray(self.Sigma0, dtype=float)))

    @property
    def n(self):
        return self.m0.shape[0]

    @property
    def m(self):
        return self.H.shape[-2]

    @property
    def time_varying(self):
        return any(getattr(self, k).ndim == 3 for k in ("A", "H", "Q", "R"))

    @property
    def max_horizon(self):
        """Number of steps covered by the time-varying stacks (None if constant)."""
        lengths = [getattr(self, k).shape[0] for k in ("A", "H", "Q", "R") if getattr(self, k).ndim == 3]
        return min(lengths) if lengths else None

    def at(self, t):
        """Matrices in force at step ``t``; constant matrices are broadcast."""
        out = []
        for k in ("A", "H", "Q", "R"):
            M = getattr(self, k)
            if M.ndim == 3:
                if not 0 <= t < M.shape[0]:
                    raise DimensionMismatch(f"{k} has no entry for step {t}")
                M = M[t]
            out.append(M)
        return StepMatrices(*out)


class Trajectory(NamedTuple):
    states: np.ndarray  # (T+1, n)
    observations: np.ndarray  # (T, m)


def validate_model(model):
    """Check shapes, symmetry and definiteness; return the model unchanged."""
    n = model.m0.shape[0] if model.m0.ndim == 1 else -1
    if n <= 0:
        raise DimensionMismatch("m0 must be a non-empty vector")
    as_vector(model.m0, "m0", n)
    as_matrix(model.Sigma0, "Sigma0", (n, n))
    check_psd(model.Sigma0, "Sigma0")
    m = model.H.shape[-2]
    steps = range(model.max_horizon) if model.time_varying else [0]
    for t in steps:
        A, H, Q, R = model.at(t)
        as_matrix(A, "A", (n, n))
        as_matrix(H, "H", (m, n))
        as_matrix(Q, "Q", (n, n))
        as_matrix(R, "R", (m, m))
        check_psd(Q, "Q")
        check_psd(R, "R", definite=True)
    return model


def scalar_benchmark():
    """A = H = R = Sigma0 = 1, Q = 0, m0 = 0."""
    return SystemModel(A=[[1.0]], H=[[1.0]], Q=[[0.0]], R=[[1.0]], m0=[0.0], Sigma0=[[1.0]])


def random_stable(n, m, rho=0.95, q=0.1, r=1.0, seed=0):
    """Random A rescaled to spectral radius ``rho``, full-rank H, Q = qI, R = rI.

    Prior is N(0, I).
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A *= rho / max(np.abs(np.linalg.eigvals(A)))
    while True:
        H = rng.standard_normal((m, n))
        if np.linalg.matrix_rank(H) == min(m, n):
            break
    return SystemModel(A=A, H=H, Q=q * np.eye(n), R=r * np.eye(m), m0=np.zeros(n), Sigma0=np.eye(n))


@functools.lru_cache(maxsize=256)
def _cached_root(raw, dim):
    root, _ = psd_sqrt(np.frombuffer(raw).reshape(dim, dim))
    root.setflags(write=False)
    return root


def covariance_root(cov):
    """Symmetric square root used to colour standard normals (cached by value)."""
    cov = np.ascontiguousarray(np.atleast_2d(cov), dtype=float)
    return _cached_root(cov.tobytes(), cov.shape[0])


class Substream(enum.IntEnum):
    TRUTH_INIT = 0
    TRUTH_PROCESS = 1
    TRUTH_MEASUREMENT = 2
    COPY_INIT = 3
    COPY_PROCESS = 4
    COPY_MEASUREMENT = 5


@dataclass(frozen=True)
class NoiseStreams:
    """Keyed Gaussian draws: every block is a pure function of
    ``(seed, replicate, substream, t)``.

    Blocks are generated row-major from a Philox stream, so row ``j`` (member
    ``j``) is identical however many rows are requested. That makes member
    draws independent of the ensemble size and gives random access in time.
    """

    seed: int = 0
    replicate: int = 0

    def standard_normal(self, substream, t, rows, dim):
        if t < 0 or t >= 2**32:
            raise ValueError(f"step index {t} out of range")
        key = np.random.SeedSequence([int(self.seed) & (2**64 - 1), int(self.replicate), int(substream), int(t)])
        gen = np.random.Generator(np.random.Philox(key))
        return gen.standard_normal((rows, dim))

    def gaussian(self, substream, t, cov, rows):
        """``rows`` draws from N(0, cov) as a (rows, dim) array."""
        root = covariance_root(cov)
        z = self.standard_normal(substream, t, rows, root.shape[0])
        return z @ root

    def spawn(self, replicate):
        return NoiseStreams(self.seed, replicate)


def simulate_truth(model, horizon, streams):
    """Draw X_0..X_T and Z_0..Z_{T-1} from the model."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    validate_model(model)
    n, m = model.n, model.m
    states = np.empty((horizon + 1, n))
    obs = np.empty((horizon, m))
    states[0] = model.m0 + streams.gaussian(Substream.TRUTH_INIT, 0, model.Sigma0, 1)[0]
    for t in range(horizon):
        A, H, Q, R = model.at(t)
        obs[t] = H @ states[t] + streams.gaussian(Substream.TRUTH_MEASUREMENT, t, R, 1)[0]
        states[t + 1] = A @ states[t] + streams.gaussian(Substream.TRUTH_PROCESS, t, Q, 1)[0]
    return Trajectory(states, obs)


def draw_copies(streams, model, member, t, rows=None):
    """Process- and measurement-noise copies for one member at step ``t``.

    With ``rows`` given, returns the (rows, n) and (rows, m) blocks for members
    ``0..rows-1`` instead; ``member`` is then ignored.
    """
    _, _, Q, R = model.at(t)
    if rows is not None:
        return (
            streams.gaussian(Substream.COPY_PROCESS, t, Q, rows),
            streams.gaussian(Substream.COPY_MEASUREMENT, t, R, rows),
        )
    xi = streams.gaussian(Substream.COPY_PROCESS, t, Q, member + 1)[member]
    zeta = streams.gaussian(Substream.COPY_MEASUREMENT, t, R, member + 1)[member]
    return xi, zeta
