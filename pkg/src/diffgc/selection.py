"""Tuning by the approximate BIC, hard thresholding, the direct pipeline and stability selection."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .delta_a import CDOptions, DeltaAProblem, build_w, lambda_max, solve_column, solve_delta_a
from .dtrace import DtraceOptions, DtraceProblem, dtrace_gradient, nu_max, solve_delta_omega
from .exceptions import SolverDivergenceError, SubsampleError, TuningError
from .var_core import estimate_moments

log = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 25
DEFAULT_GRID_RATIO = 0.01
DEFAULT_TAU = 0.05


@dataclass(eq=False)
class TuningGrid:
    """Candidate penalties (descending) with their criterion values."""

    values: np.ndarray
    criterion_values: np.ndarray
    chosen_index: int
    fit_terms: np.ndarray = None  # max-norm residual per candidate
    support_sizes: np.ndarray = None

    @property
    def chosen(self):
        return float(self.values[self.chosen_index])

    def to_dict(self):
        return {
            "values": self.values.tolist(),
            "criterion_values": [None if not np.isfinite(c) else float(c) for c in self.criterion_values],
            "chosen_index": int(self.chosen_index),
            "fit_terms": None if self.fit_terms is None else self.fit_terms.tolist(),
            "support_sizes": None if self.support_sizes is None else self.support_sizes.tolist(),
        }


def penalty_grid(upper, size=DEFAULT_GRID_SIZE, ratio=DEFAULT_GRID_RATIO):
    """``size`` log-spaced values from ``upper`` down to ``upper * ratio``."""
    if upper <= 0:
        upper = 1.0
    if size == 1:
        return np.array([float(upper)])
    return np.geomspace(upper, upper * ratio, size)


def abic_scale(n1, n2, p):
    return n1 + n2 - 2 * (p - 1)


def abic_score(a, residual_max, support_size):
    return a * residual_max + np.log(a) * support_size


def choose_index(criteria):
    """First minimizer over a descending grid, i.e. the largest penalty among ties."""
    finite = np.isfinite(criteria)
    if not finite.any():
        raise TuningError("every tuning candidate failed")
    best = np.min(criteria[finite])
    return int(np.flatnonzero(criteria == best)[0])


def _descending(candidates):
    vals = np.asarray(candidates, dtype=float).ravel()
    if vals.size == 0:
        raise ValueError("candidate grid is empty")
    if np.any(vals <= 0):
        raise ValueError("candidate penalties must be positive")
    return np.sort(vals)[::-1]


def abic_nu(sigma1, sigma2, candidates, n1, n2, p, options=None):
    """Pick the D-trace penalty minimizing the approximate BIC.

    Returns ``(nu_opt, grid, estimates)`` where ``estimates`` lists the
    solution at each candidate in grid order.
    """
    if candidates is None:
        candidates = penalty_grid(nu_max(sigma1, sigma2))
    values = _descending(candidates)
    a = abic_scale(n1, n2, p)
    crit = np.full(values.size, np.inf)
    fit_terms = np.full(values.size, np.nan)
    supports = np.zeros(values.size, dtype=int)
    estimates = []
    warm = None
    for i, nu in enumerate(values):
        try:
            est = solve_delta_omega(DtraceProblem(sigma1, sigma2, nu), options, init=warm)
        except SolverDivergenceError as exc:
            log.warning("nu=%g excluded: %s", nu, exc)
            estimates.append(None)
            continue
        warm = est.delta
        resid = float(np.max(np.abs(dtrace_gradient(est.delta, sigma1, sigma2))))
        supp = int(np.count_nonzero(est.delta))
        fit_terms[i], supports[i] = resid, supp
        crit[i] = abic_score(a, resid, supp)
        estimates.append(est)
    idx = choose_index(crit)
    grid = TuningGrid(values, crit, idx, fit_terms, supports)
    return float(values[idx]), grid, estimates


def _column_grid(candidates, j, w_col):
    if candidates is None:
        return penalty_grid(lambda_max(w_col))
    cand = np.asarray(candidates, dtype=float)
    if cand.ndim == 2:
        return _descending(cand[j])
    return _descending(cand)


def abic_lambda(gram, w, candidates, n1, n2, p, options=None):
    """Per-column approximate-BIC choice of the lasso penalties.

    ``candidates`` may be ``None`` (per-column default grids), a 1-D common
    grid, or a 2-D array with one grid per column. Returns ``(lambdas, grids)``.
    """
    gram = np.ascontiguousarray(gram, dtype=float)
    w = np.asarray(w, dtype=float)
    a = abic_scale(n1, n2, p)
    lambdas = np.zeros(w.shape[1])
    grids = []
    for j in range(w.shape[1]):
        values = _column_grid(candidates, j, w[:, j])
        crit = np.empty(values.size)
        fit_terms = np.empty(values.size)
        supports = np.zeros(values.size, dtype=int)
        warm = None
        for i, lam in enumerate(values):
            sol = solve_column(gram, w[:, j], lam, options, init=warm)
            warm = sol.beta
            resid = float(np.max(np.abs(gram @ sol.beta - w[:, j])))
            supp = int(np.count_nonzero(sol.beta))
            fit_terms[i], supports[i] = resid, supp
            crit[i] = abic_score(a, resid, supp)
        idx = choose_index(crit)
        lambdas[j] = values[idx]
        grids.append(TuningGrid(values, crit, idx, fit_terms, supports))
    return lambdas, grids


def hard_threshold(m, tau):
    if tau < 0:
        raise ValueError("tau must be >= 0")
    m = np.asarray(m, dtype=float)
    return np.where(np.abs(m) > tau, m, 0.0)


@dataclass(frozen=True)
class PipelineConfig:
    p: int = 1
    tau: float = DEFAULT_TAU
    center: bool = True
    grid_size: int = DEFAULT_GRID_SIZE
    grid_ratio: float = DEFAULT_GRID_RATIO
    nu_grid: Optional[Tuple[float, ...]] = None
    lambda_grid: Optional[Tuple[float, ...]] = None
    dtrace: DtraceOptions = field(default_factory=DtraceOptions)
    cd: CDOptions = field(default_factory=CDOptions)


@dataclass(eq=False)
class DirectFit:
    moments_1: object
    moments_2: object
    nu: float
    nu_grid: TuningGrid
    delta_omega: object
    w: np.ndarray
    lambdas: np.ndarray
    lambda_grids: List[TuningGrid]
    delta_a: object
    delta_a_thresholded: np.ndarray

    def to_dict(self):
        return {
            "nu": self.nu,
            "nu_tuning": self.nu_grid.to_dict(),
            "delta_omega": self.delta_omega.delta.tolist(),
            "delta_omega_converged": bool(self.delta_omega.converged),
            "lambdas": self.lambdas.tolist(),
            "lambda_tuning": [g.to_dict() for g in self.lambda_grids],
            "delta_a": self.delta_a.delta.tolist(),
            "delta_a_thresholded": self.delta_a_thresholded.tolist(),
            "delta_a_columns": self.delta_a.per_column,
        }


def fit_direct(panel1, panel2, config=None):
    """Moments, tuned D-trace difference, tuned column lasso, then hard thresholding."""
    cfg = config or PipelineConfig()
    m1 = estimate_moments(panel1, cfg.p, center=cfg.center)
    m2 = estimate_moments(panel2, cfg.p, center=cfg.center)
    s1, s2 = m1.sigma_hat, m2.sigma_hat
    nu_cands = cfg.nu_grid
    if nu_cands is None:
        nu_cands = penalty_grid(nu_max(s1, s2), cfg.grid_size, cfg.grid_ratio)
    # covariances enter swapped so the estimate targets inv(S1) - inv(S2);
    # the criterion is unchanged by the swap
    nu, nu_grid, ests = abic_nu(s2, s1, nu_cands, panel1.n, panel2.n, cfg.p, cfg.dtrace)
    d_omega = ests[nu_grid.chosen_index]
    w = build_w(s1, s2, d_omega.delta, m1.theta_hat, m2.theta_hat)
    gram = s1 + s2
    lam_cands = cfg.lambda_grid
    if lam_cands is None:
        lam_cands = np.stack([penalty_grid(lambda_max(w[:, j]), cfg.grid_size, cfg.grid_ratio)
                              for j in range(w.shape[1])])
    lambdas, lam_grids = abic_lambda(gram, w, lam_cands, panel1.n, panel2.n, cfg.p, cfg.cd)
    d_a = solve_delta_a(DeltaAProblem(gram, w, lambdas), cfg.cd)
    return DirectFit(m1, m2, nu, nu_grid, d_omega, w, lambdas, lam_grids, d_a,
                     hard_threshold(d_a.delta, cfg.tau))


@dataclass(eq=False)
class StabilityReport:
    m_plus: np.ndarray
    m_minus: np.ndarray
    threshold: float
    selected_edges: List[Tuple[int, int, int]]
    n_subsamples: int

    def to_dict(self):
        return {
            "m_plus": self.m_plus.tolist(),
            "m_minus": self.m_minus.tolist(),
            "threshold": self.threshold,
            "n_subsamples": self.n_subsamples,
            "selected_edges": [list(e) for e in self.selected_edges],
        }


def stability_selection(panel1, panel2, stride=10, threshold=0.5, config=None):
    """Refit on each of ``stride`` interleaved subsamples and tally signed selections.

    Subsample ``i`` (1-based) keeps time points i, i + stride, i + 2 stride, ...
    """
    cfg = config or PipelineConfig()
    if stride < 1:
        raise ValueError("stride must be >= 1")
    pos = None
    neg = None
    for i in range(stride):
        subs = []
        for panel in (panel1, panel2):
            sub = panel.subsample(stride, i)
            if sub.n < cfg.p + 2:
                raise SubsampleError(
                    f"subsample {i + 1} has {sub.n} points; need at least {cfg.p + 2}", i + 1
                )
            subs.append(sub)
        est = fit_direct(subs[0], subs[1], cfg).delta_a_thresholded
        if pos is None:
            pos = np.zeros(est.shape)
            neg = np.zeros(est.shape)
        pos += est > 0
        neg += est < 0
    m_plus = pos / stride
    m_minus = neg / stride
    edges = []
    for r, c in zip(*np.nonzero((m_plus > threshold) | (m_minus > threshold))):
        edges.append((int(r), int(c), 1 if m_plus[r, c] > threshold else -1))
    return StabilityReport(m_plus, m_minus, threshold, edges, stride)
