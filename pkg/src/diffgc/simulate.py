"""Ground-truth generators for the synthetic experiments and a Gaussian VAR sampler."""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _kernels
from .exceptions import GenerationError, UnstableModelError
from .var_core import TimeSeriesPanel, VarModel, build_companion, stationary_covariance

SCENARIOS = ("sim1", "sim2", "sim3", "ir-table")
FLIP_COUNTING = ("entries", "pairs")

_SIM1_ROW_SCALE = {20: 3.0, 50: 4.0, 100: 5.0}


def default_row_scale(d):
    if d in _SIM1_ROW_SCALE:
        return _SIM1_ROW_SCALE[d]
    if d <= 20:
        return 3.0
    if d <= 50:
        return 4.0
    return 5.0


@dataclass(frozen=True)
class SimSpec:
    """Scenario knobs. Defaults reproduce the published settings.

    ``flip_counting`` controls how a flip budget on a symmetric matrix is
    spent: ``"entries"`` counts each changed matrix entry (a mirrored pair
    costs two), ``"pairs"`` counts each mirrored pair once.
    """

    scenario: str
    d: int
    n: int
    seed: int = 0
    # precision matrices (sim1)
    precision_density: float = 0.6
    precision_range: Tuple[float, float] = (0.2, 0.5)
    row_scale: Optional[float] = None
    precision_flip_fraction: float = 0.4
    # transition matrices (sim1, sim3)
    transition_density: float = 0.7
    transition_range: Tuple[float, float] = (0.5, 0.8)
    transition_norm: float = 0.6
    transition_flip_fraction: float = 0.5
    # VAR(2) (sim2)
    lag1_density: float = 0.5
    lag1_range: Tuple[float, float] = (0.5, 0.8)
    lag1_divisor: float = 5.0
    lag2_density: float = 0.3
    lag2_range: Tuple[float, float] = (0.3, 0.5)
    lag2_divisor: float = 3.0
    noise_var: float = 0.1
    # banded precision (sim3)
    kms_rho: float = 0.4
    sim3_flip_limit: int = 11
    flip_counting: str = "entries"
    max_retries: int = 50

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be positive")
        for name in ("precision_density", "transition_density", "lag1_density",
                     "lag2_density", "precision_flip_fraction", "transition_flip_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("precision_range", "transition_range", "lag1_range", "lag2_range"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo < hi:
                raise ValueError(f"{name} must be an interval 0 <= lo < hi, got {(lo, hi)}")
        if self.flip_counting not in FLIP_COUNTING:
            raise ValueError(f"flip_counting must be one of {FLIP_COUNTING}")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    model_1: VarModel
    model_2: VarModel
    delta_omega_true: np.ndarray
    delta_a_true: np.ndarray
    omega_1: np.ndarray
    omega_2: np.ndarray
    delta_a_lags: Tuple[np.ndarray, ...] = ()

    @property
    def p(self):
        return self.model_1.order

    def to_dict(self):
        def mat(a):
            return np.asarray(a).tolist()

        from .io import model_to_dict

        return {
            "model_1": model_to_dict(self.model_1),
            "model_2": model_to_dict(self.model_2),
            "delta_omega": mat(self.delta_omega_true),
            "delta_a": mat(self.delta_a_true),
            "delta_a_lags": [mat(a) for a in self.delta_a_lags],
            "omega_1": mat(self.omega_1),
            "omega_2": mat(self.omega_2),
        }


def _rng(seed):
    return np.random.default_rng(seed)


def _is_pd(m):
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def _signed_uniform(rng, size, lo, hi):
    mag = rng.uniform(lo, hi, size=size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return mag * sign


def _sym(m):
    return 0.5 * (m + m.T)


def flip_largest(mat, count, symmetric, counting="entries"):
    """Change the sign of the ``count`` largest-magnitude entries.

    For symmetric matrices only off-diagonal entries are eligible and each
    entry is flipped together with its mirror image. Returns the flipped
    matrix and a boolean mask of changed entries.
    """
    mat = np.array(mat, dtype=float)
    d = mat.shape[0]
    mask = np.zeros(mat.shape, dtype=bool)
    if count <= 0:
        return mat, mask
    if symmetric:
        n_pairs = int(np.ceil(count / 2)) if counting == "entries" else int(count)
        iu, ju = np.triu_indices(d, 1)
        vals = np.abs(mat[iu, ju])
        order = np.argsort(-vals, kind="stable")
        order = order[vals[order] > 0][:n_pairs]
        r, c = iu[order], ju[order]
        mat[r, c] *= -1.0
        mat[c, r] *= -1.0
        mask[r, c] = True
        mask[c, r] = True
    else:
        flat = np.abs(mat).ravel()
        order = np.argsort(-flat, kind="stable")
        order = order[flat[order] > 0][: int(count)]
        mat.flat[order] *= -1.0
        mask.flat[order] = True
    return mat, mask


def _flip_budget(d, fraction):
    return int(round(fraction * d))


def _sim1_precision(spec, rng):
    d = spec.d
    scale = spec.row_scale if spec.row_scale is not None else default_row_scale(d)
    support = rng.random((d, d)) < spec.precision_density
    np.fill_diagonal(support, False)
    vals = _signed_uniform(rng, (d, d), *spec.precision_range)
    omega = np.where(support, vals, 0.0) / scale
    np.fill_diagonal(omega, 1.0)
    return _sym(omega)


def _random_transition(d, density, value_range, rng):
    support = rng.random((d, d)) < density
    vals = _signed_uniform(rng, (d, d), *value_range)
    return np.where(support, vals, 0.0)


def _sim1_transition(spec, rng):
    a = _random_transition(spec.d, spec.transition_density, spec.transition_range, rng)
    norm = np.linalg.norm(a, 2)
    if norm == 0:
        return a
    return a * (spec.transition_norm / norm)


def _models_from_precisions(spec, omega_1, omega_2, rng):
    """Pick transition pairs until both innovation covariances are positive definite."""
    sigma_1 = _sym(np.linalg.inv(omega_1))
    sigma_2 = _sym(np.linalg.inv(omega_2))
    budget = _flip_budget(spec.d, spec.transition_flip_fraction)
    for _ in range(spec.max_retries):
        a_1 = _sim1_transition(spec, rng)
        a_2, _ = flip_largest(a_1, budget, symmetric=False)
        psi_1 = _sym(sigma_1 - a_1.T @ sigma_1 @ a_1)
        psi_2 = _sym(sigma_2 - a_2.T @ sigma_2 @ a_2)
        if _is_pd(psi_1) and _is_pd(psi_2):
            m1 = VarModel([a_1], psi_1, stationary_cov=sigma_1)
            m2 = VarModel([a_2], psi_2, stationary_cov=sigma_2)
            return m1, m2, a_1 - a_2
    raise GenerationError(
        f"no transition pair with positive-definite innovation covariances after "
        f"{spec.max_retries} attempts"
    )


def gen_sim1(spec, rng=None):
    """VAR(1) pair whose precision matrices differ in a few large entries."""
    rng = _rng(spec.seed) if rng is None else rng
    budget = _flip_budget(spec.d, spec.precision_flip_fraction)
    for _ in range(spec.max_retries):
        omega_1 = _sim1_precision(spec, rng)
        if not _is_pd(omega_1):
            continue
        omega_2, _ = flip_largest(omega_1, budget, symmetric=True, counting=spec.flip_counting)
        if _is_pd(omega_2):
            break
    else:
        raise GenerationError(
            f"no positive-definite precision pair after {spec.max_retries} attempts (d={spec.d})"
        )
    m1, m2, delta_a = _models_from_precisions(spec, omega_1, omega_2, rng)
    return GroundTruth(
        model_1=m1,
        model_2=m2,
        delta_omega_true=omega_1 - omega_2,
        delta_a_true=delta_a,
        omega_1=omega_1,
        omega_2=omega_2,
        delta_a_lags=(delta_a,),
    )


def gen_sim2(spec, rng=None):
    """VAR(2) pair with sparse lag-wise differences; noise covariance noise_var * I."""
    rng = _rng(spec.seed) if rng is None else rng
    d = spec.d
    psi = spec.noise_var * np.eye(d)
    for _ in range(spec.max_retries):
        a11 = _random_transition(d, spec.lag1_density, spec.lag1_range, rng) / spec.lag1_divisor
        a12 = _random_transition(d, spec.lag2_density, spec.lag2_range, rng) / spec.lag2_divisor
        a21, _ = flip_largest(a11, d, symmetric=False)
        a22, _ = flip_largest(a12, d, symmetric=False)
        m1 = VarModel([a11, a12], psi)
        m2 = VarModel([a21, a22], psi)
        if m1.is_stable() and m2.is_stable():
            break
    else:
        raise GenerationError(
            f"no stable VAR(2) pair after {spec.max_retries} attempts (d={d})"
        )
    sigma_1 = stationary_covariance(m1)
    sigma_2 = stationary_covariance(m2)
    m1 = VarModel(m1.transitions, psi, sigma_1)
    m2 = VarModel(m2.transitions, psi, sigma_2)
    omega_1 = _sym(np.linalg.inv(sigma_1))
    omega_2 = _sym(np.linalg.inv(sigma_2))
    delta_a = build_companion(m1).transition - build_companion(m2).transition
    return GroundTruth(
        model_1=m1,
        model_2=m2,
        delta_omega_true=omega_1 - omega_2,
        delta_a_true=delta_a,
        omega_1=omega_1,
        omega_2=omega_2,
        delta_a_lags=(a11 - a21, a12 - a22),
    )


def kms_matrix(d, rho):
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_sim3(spec, rng=None):
    """Banded precision pair differing on the first off-diagonal band up to index 11."""
    if spec.d < 12:
        raise ValueError("sim3 needs d >= 12")
    rng = _rng(spec.seed) if rng is None else rng
    omega_1 = kms_matrix(spec.d, spec.kms_rho)
    omega_2 = omega_1.copy()
    idx = np.arange(spec.d)
    # 1-based (i, j) with |i - j| = 1 and max(i, j) <= limit
    flip = (np.abs(idx[:, None] - idx[None, :]) == 1) & (
        np.maximum(idx[:, None], idx[None, :]) + 1 <= spec.sim3_flip_limit
    )
    omega_2[flip] *= -1.0
    if not _is_pd(omega_2):
        raise GenerationError("flipped banded precision matrix is not positive definite")
    m1, m2, delta_a = _models_from_precisions(spec, omega_1, omega_2, rng)
    return GroundTruth(
        model_1=m1,
        model_2=m2,
        delta_omega_true=omega_1 - omega_2,
        delta_a_true=delta_a,
        omega_1=omega_1,
        omega_2=omega_2,
        delta_a_lags=(delta_a,),
    )


def generate(spec, rng=None):
    gens = {"sim1": gen_sim1, "sim2": gen_sim2, "sim3": gen_sim3}
    if spec.scenario not in gens:
        raise ValueError(f"scenario {spec.scenario!r} has no VAR ground truth")
    return gens[spec.scenario](spec, rng)


def gen_ir_instance(d, s_omega, seed=None, flip_counting="entries", max_retries=50):
    """Erdos-Renyi precision pair for the irrepresentability experiment.

    Returns ``(sigma_1, sigma_2, support)`` where ``support`` is the boolean
    d x d mask of entries whose sign was changed.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    rng = _rng(seed)
    iu, ju = np.triu_indices(d, 1)
    n_pairs = int(round(d * (d - 1) / 10))
    if flip_counting == "entries":
        if s_omega % 2:
            raise ValueError("with entry counting s_omega must be even (mirrored pairs)")
        n_flip = s_omega // 2
    elif flip_counting == "pairs":
        n_flip = s_omega
    else:
        raise ValueError(f"flip_counting must be one of {FLIP_COUNTING}")
    if n_flip > n_pairs:
        raise ValueError(
            f"s_omega={s_omega} exceeds the {2 * n_pairs} nonzero off-diagonal entries"
        )
    for _ in range(max_retries):
        chosen = rng.choice(len(iu), size=n_pairs, replace=False)
        vals = _signed_uniform(rng, n_pairs, 0.5, 1.0)
        omega_1 = np.zeros((d, d))
        omega_1[iu[chosen], ju[chosen]] = vals
        omega_1 = omega_1 + omega_1.T
        np.fill_diagonal(omega_1, 10.0)
        flips = rng.choice(n_pairs, size=n_flip, replace=False)
        r, c = iu[chosen[flips]], ju[chosen[flips]]
        omega_2 = omega_1.copy()
        omega_2[r, c] *= -1.0
        omega_2[c, r] *= -1.0
        if _is_pd(omega_1) and _is_pd(omega_2):
            support = omega_1 != omega_2
            return _sym(np.linalg.inv(omega_1)), _sym(np.linalg.inv(omega_2)), support
    raise GenerationError(f"no positive-definite draw after {max_retries} attempts")


def _sqrt_psd(m):
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_var(model, n, seed=None, burn_in=500):
    """Simulate ``n`` observations after discarding ``burn_in`` steps."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not model.is_stable():
        raise UnstableModelError(
            f"companion spectral radius {model.spectral_radius():.4f} >= 1"
        )
    rng = _rng(seed)
    d = model.dim
    total = burn_in + n
    noise = rng.standard_normal((total, d)) @ _sqrt_psd(model.noise_cov)
    mats = np.ascontiguousarray(np.stack(model.transitions))
    x = _kernels.var_recursion(mats, np.ascontiguousarray(noise))
    return TimeSeriesPanel(x[burn_in:].T)


def sample_pair(truth, n, seed=None, burn_in=500):
    """Independent panels from both conditions of a ground truth."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # explicit child keys keep this pure (SeedSequence.spawn is stateful)
    s1, s2 = (np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (k,)) for k in (0, 1))
    p1 = sample_var(truth.model_1, n, s1, burn_in)
    p2 = sample_var(truth.model_2, n, s2, burn_in)
    return TimeSeriesPanel(p1.data, 1), TimeSeriesPanel(p2.data, 2)
