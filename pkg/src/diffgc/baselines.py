"""Separate-estimation baselines: lasso least squares (S1) and l1-constrained minimization (S2).

Each fits one transition matrix per condition; the difference of the two
fits is the baseline estimate of the transition difference.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .delta_a import solve_column
from .exceptions import InfeasibleError, SolverDivergenceError
from .var_core import estimate_moments

METHODS = ("s1", "s2")


@dataclass(frozen=True, eq=False)
class BaselineEstimate:
    method: str
    a_hat_1: np.ndarray
    a_hat_2: np.ndarray
    delta: np.ndarray
    penalty: float


def _identity_blocks(d, p):
    out = np.zeros((d * p, d * p))
    for k in range(p - 1):
        out[k * d:(k + 1) * d, (k + 1) * d:(k + 2) * d] = np.eye(d)
    return out


def s1_path(moments, d, p, etas, options=None):
    """Lasso fits for each penalty in ``etas`` (warm-started in the given order).

    With p > 1 only the first block column (the stacked lag matrices) is
    regressed; the companion identity blocks are fixed.
    """
    sigma = np.ascontiguousarray(moments.sigma_hat)
    theta = moments.theta_hat
    m = sigma.shape[0]
    n_cols = m if p == 1 else d
    fixed = _identity_blocks(d, p)
    out = []
    warm = np.zeros((m, n_cols))
    for eta in etas:
        a = fixed.copy()
        for j in range(n_cols):
            if np.max(np.abs(theta[:, j])) <= eta:
                # zero satisfies the optimality conditions; also covers a degenerate Gram
                a[:, j] = 0.0
                warm[:, j] = 0.0
                continue
            sol = solve_column(sigma, theta[:, j], eta, options, init=warm[:, j])
            a[:, j] = sol.beta
            warm[:, j] = sol.beta
        out.append(a)
    return out


def fit_s1(panel, p, eta, options=None, center=True):
    """Lasso least-squares transition estimate in companion coordinates.

    Minimizes (1/2) a'S a - a'theta_j + eta |a|_1 per column, where S and
    theta_j are the window moments of the panel.
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    mom = estimate_moments(panel, p, center=center)
    return s1_path(mom, panel.d, p, [eta], options)[0]


def min_feasible_eta(sigma, theta_col):
    """Smallest eta with a feasible point, i.e. min_a ||S a - theta||_inf."""
    m = sigma.shape[0]
    # variables: a+ (m), a- (m), t
    c = np.zeros(2 * m + 1)
    c[-1] = 1.0
    ones = np.ones((m, 1))
    a_ub = np.block([[sigma, -sigma, -ones], [-sigma, sigma, -ones]])
    b_ub = np.concatenate([theta_col, -theta_col])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    return float(res.fun) if res.status == 0 else float("nan")


def dantzig_column(sigma, theta_col, eta, column=None):
    """min ||a||_1 subject to ||S a - theta||_inf <= eta, as a split-variable LP."""
    m = sigma.shape[0]
    if eta >= np.max(np.abs(theta_col)):
        return np.zeros(m)
    c = np.ones(2 * m)
    a_ub = np.block([[sigma, -sigma], [-sigma, sigma]])
    b_ub = np.concatenate([theta_col + eta, eta - theta_col])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    if res.status == 2:
        eta_min = min_feasible_eta(sigma, theta_col)
        raise InfeasibleError(
            f"column {column}: eta={eta:g} is infeasible; smallest feasible eta is about {eta_min:.6g}",
            column, eta_min,
        )
    if res.status != 0:
        raise SolverDivergenceError(f"column {column}: LP failed ({res.message})")
    x = res.x
    return x[:m] - x[m:]


def s2_path(moments, etas):
    sigma, theta = moments.sigma_hat, moments.theta_hat
    m = sigma.shape[0]
    out = []
    for eta in etas:
        a = np.empty((m, m))
        for j in range(m):
            a[:, j] = dantzig_column(sigma, theta[:, j], eta, column=j)
        out.append(a)
    return out


def fit_s2(panel, p, eta, center=True):
    if eta < 0:
        raise ValueError("eta must be >= 0")
    mom = estimate_moments(panel, p, center=center)
    return s2_path(mom, [eta])[0]


def fit_baseline(method, panel1, panel2, p, eta, options=None, center=True):
    if method == "s1":
        a1 = fit_s1(panel1, p, eta, options, center)
        a2 = fit_s1(panel2, p, eta, options, center)
    elif method == "s2":
        a1 = fit_s2(panel1, p, eta, center)
        a2 = fit_s2(panel2, p, eta, center)
    else:
        raise ValueError(f"unknown baseline {method!r}; choose from {METHODS}")
    return BaselineEstimate(method, a1, a2, a1 - a2, float(eta))

