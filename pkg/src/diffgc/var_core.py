"""VAR(p) containers, the companion (lag-1) reformulation and sample moments."""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .exceptions import (
    IngestionError,
    InsufficientDataError,
    InvalidModelError,
    NearSingularError,
)

RCOND_LIMIT = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeSeriesPanel:
    """A d x n observed series; rows are channels, columns are time points."""

    data: np.ndarray
    condition_label: int = 1

    def __post_init__(self):
        try:
            data = np.array(self.data, dtype=float)
        except (TypeError, ValueError) as exc:
            raise IngestionError(f"panel data is not numeric: {exc}") from exc
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise IngestionError(f"panel data must be 2-D, got shape {data.shape}")
        d, n = data.shape
        if d < 1 or n < 2:
            raise IngestionError(f"panel needs d >= 1 and n >= 2, got d={d}, n={n}")
        if not np.all(np.isfinite(data)):
            raise IngestionError("panel contains non-finite entries")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def d(self):
        return self.data.shape[0]

    @property
    def n(self):
        return self.data.shape[1]

    def centered(self):
        mean = self.data.mean(axis=1, keepdims=True)
        return TimeSeriesPanel(self.data - mean, self.condition_label)

    def subsample(self, stride, offset=0):
        """Every ``stride``-th time point starting at column ``offset`` (0-based)."""
        if stride < 1:
            raise ValueError("stride must be >= 1")
        return TimeSeriesPanel(self.data[:, offset::stride], self.condition_label)

    def reversed(self):
        return TimeSeriesPanel(self.data[:, ::-1], self.condition_label)


@dataclass(frozen=True, eq=False)
class VarModel:
    """x_t = sum_k A_k' x_{t-k} + e_t with e_t ~ N(0, noise_cov).

    ``stationary_cov`` is the covariance of the stacked companion vector
    (dp x dp), when known.
    """

    transitions: Sequence[np.ndarray]
    noise_cov: np.ndarray
    stationary_cov: Optional[np.ndarray] = None

    def __post_init__(self):
        mats = tuple(_frozen(a) for a in self.transitions)
        if len(mats) < 1:
            raise InvalidModelError("a VAR model needs at least one transition matrix")
        d = mats[0].shape[0]
        for k, a in enumerate(mats, start=1):
            if a.shape != (d, d):
                raise InvalidModelError(
                    f"A_{k} has shape {a.shape}, expected ({d}, {d})"
                )
        psi = _frozen(self.noise_cov)
        if psi.shape != (d, d):
            raise InvalidModelError(f"noise_cov has shape {psi.shape}, expected ({d}, {d})")
        if np.max(np.abs(psi - psi.T), initial=0.0) > 1e-10:
            raise InvalidModelError("noise_cov is not symmetric")
        if np.linalg.eigvalsh(psi).min() <= 0:
            raise InvalidModelError("noise_cov is not positive definite")
        object.__setattr__(self, "transitions", mats)
        object.__setattr__(self, "noise_cov", psi)
        if self.stationary_cov is not None:
            sigma = _frozen(self.stationary_cov)
            dp = d * len(mats)
            if sigma.shape != (dp, dp):
                raise InvalidModelError(
                    f"stationary_cov has shape {sigma.shape}, expected ({dp}, {dp})"
                )
            object.__setattr__(self, "stationary_cov", sigma)

    @property
    def order(self):
        return len(self.transitions)

    @property
    def dim(self):
        return self.transitions[0].shape[0]

    def companion(self):
        return build_companion(self)

    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.companion().transition))))

    def is_stable(self):
        return self.spectral_radius() < 1.0

    def with_stationary_cov(self):
        return VarModel(self.transitions, self.noise_cov, stationary_covariance(self))


@dataclass(frozen=True, eq=False)
class CompanionForm:
    dim: int
    transition: np.ndarray


@dataclass(frozen=True, eq=False)
class MomentEstimates:
    sigma_hat: np.ndarray
    theta_hat: np.ndarray
    n_effective: int


def build_companion(model):
    """Stack A_1..A_p down the first block column with identity super-diagonal blocks."""
    mats = model.transitions
    d = mats[0].shape[0]
    for k, a in enumerate(mats, start=1):
        if a.shape != (d, d):
            raise InvalidModelError(f"A_{k} has shape {a.shape}, expected ({d}, {d})")
    p = len(mats)
    comp = np.zeros((d * p, d * p))
    for k, a in enumerate(mats):
        comp[k * d:(k + 1) * d, :d] = a
        if k < p - 1:
            comp[k * d:(k + 1) * d, (k + 1) * d:(k + 2) * d] = np.eye(d)
    return CompanionForm(dim=d * p, transition=comp)


def stationary_covariance(model):
    """Covariance of the stacked vector: solves S = C' S C + blockdiag(Psi, 0)."""
    if not model.is_stable():
        raise InvalidModelError("stationary covariance requested for an unstable model")
    comp = build_companion(model).transition
    d = model.dim
    q = np.zeros_like(comp)
    q[:d, :d] = model.noise_cov
    # scipy solves X = a X a^H + q
    sigma = linalg.solve_discrete_lyapunov(comp.T, q)
    return 0.5 * (sigma + sigma.T)


def companion_windows(panel, p):
    """Stacked vectors (x_{t+p-1}; ...; x_t), returned as the columns of a dp x (n-p+1) array."""
    if p < 1:
        raise ValueError("p must be >= 1")
    x = panel.data
    d, n = x.shape
    if n <= p:
        raise InsufficientDataError(f"need n >= p + 1 time points, got n={n}, p={p}")
    count = n - p + 1
    out = np.empty((d * p, count))
    for block in range(p):
        lag = p - 1 - block
        out[block * d:(block + 1) * d, :] = x[:, lag:lag + count]
    return out


def estimate_moments(panel, p, center=True):
    """Window-average covariance and lag-1 cross moment of the stacked series."""
    if panel.n < p + 2:
        raise InsufficientDataError(
            f"moment estimation needs n >= p + 2, got n={panel.n}, p={p}"
        )
    if not np.all(np.isfinite(panel.data)):
        raise IngestionError("panel contains non-finite entries")
    if center:
        panel = panel.centered()
    win = companion_windows(panel, p)
    count = win.shape[1]
    sigma = win @ win.T / count
    sigma = 0.5 * (sigma + sigma.T)
    theta = win[:, :-1] @ win[:, 1:].T / (count - 1)
    return MomentEstimates(sigma_hat=sigma, theta_hat=theta, n_effective=count)


def yule_walker_transition(sigma, theta):
    sigma = np.asarray(sigma, dtype=float)
    theta = np.asarray(theta, dtype=float)
    cond = np.linalg.cond(sigma)
    if not np.isfinite(cond) or 1.0 / cond < RCOND_LIMIT:
        raise NearSingularError(
            f"covariance is near singular (condition number {cond:.3e})", cond
        )
    return np.linalg.solve(sigma, theta)
