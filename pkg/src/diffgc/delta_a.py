"""Column-wise lasso solves of the Yule-Walker estimating equation."""
from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from . import _kernels
from .exceptions import InvalidGramError

GRAM_DIAG_FLOOR = 1e-12


class ColumnSolution(NamedTuple):
    beta: np.ndarray
    iterations: int
    converged: bool
    kkt_residual: float


@dataclass(frozen=True)
class CDOptions:
    tol: float = 1e-8
    max_sweeps: int = 10_000


@dataclass(frozen=True, eq=False)
class DeltaAProblem:
    gram: np.ndarray
    w: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"gram must be square, got {g.shape}")
        if np.max(np.abs(g - g.T)) > 1e-10:
            raise ValueError("gram is not symmetric")
        if w.ndim != 2 or w.shape[0] != g.shape[0]:
            raise ValueError(f"w has shape {w.shape}, incompatible with gram {g.shape}")
        lam = np.broadcast_to(np.asarray(self.lambdas, dtype=float), (w.shape[1],)).copy()
        if np.any(lam < 0):
            raise ValueError("lambdas must be >= 0")
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "lambdas", lam)


@dataclass(eq=False)
class DeltaAEstimate:
    delta: np.ndarray
    lambdas: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    kkt_residuals: np.ndarray

    @property
    def per_column(self) -> List[dict]:
        return [
            {"converged": bool(c), "iterations": int(i), "kkt_residual": float(k)}
            for c, i, k in zip(self.converged, self.iterations, self.kkt_residuals)
        ]


def build_w(sigma1, sigma2, delta_omega, theta1, theta2):
    """Right-hand side S1 D T2 + S2 D T1 + 2 (T1 - T2) of the estimating equation."""
    return sigma1 @ delta_omega @ theta2 + sigma2 @ delta_omega @ theta1 + 2.0 * (theta1 - theta2)


def column_kkt_residual(gram, w, beta, lam):
    grad = gram @ beta - w
    active = beta != 0
    worst = 0.0
    if active.any():
        worst = float(np.max(np.abs(grad[active] + lam * np.sign(beta[active]))))
    if (~active).any():
        worst = max(worst, float(np.max(np.abs(grad[~active]) - lam)))
    return max(worst, 0.0)


def lasso_objective(gram, w, beta, lam):
    return 0.5 * beta @ gram @ beta - beta @ w + lam * np.abs(beta).sum()


def _check_gram(gram, column=None):
    diag = np.diag(gram)
    bad = np.flatnonzero(diag < GRAM_DIAG_FLOOR)
    if bad.size:
        where = "" if column is None else f" (column {column})"
        raise InvalidGramError(
            f"Gram diagonal entry {bad[0]} is {diag[bad[0]]:.3e}, below {GRAM_DIAG_FLOOR}{where}",
            column,
        )


def solve_column(gram, w_col, lam, options=None, init=None, _checked=False):
    """Cyclic coordinate descent for (1/2) b'Gb - b'w + lam |b|_1."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    opts = options or CDOptions()
    gram = np.ascontiguousarray(gram, dtype=float)
    w_col = np.ascontiguousarray(w_col, dtype=float)
    if not _checked:
        _check_gram(gram)
    beta = np.zeros(gram.shape[0]) if init is None else np.array(init, dtype=float)
    sweeps, converged = _kernels.cd_lasso(gram, w_col, lam, beta, opts.tol, opts.max_sweeps)
    return ColumnSolution(beta, int(sweeps), bool(converged),
                          column_kkt_residual(gram, w_col, beta, lam))


def solve_delta_a(problem, options=None, init=None):
    """Solve every column independently and assemble the estimate."""
    gram, w, lam = problem.gram, problem.w, problem.lambdas
    _check_gram(gram)
    gram = np.ascontiguousarray(gram)
    m, k = w.shape
    delta = np.zeros((m, k))
    conv = np.zeros(k, dtype=bool)
    iters = np.zeros(k, dtype=int)
    kkt = np.zeros(k)
    for j in range(k):
        start = None if init is None else init[:, j]
        try:
            sol = solve_column(gram, w[:, j], lam[j], options, init=start, _checked=True)
        except InvalidGramError as exc:
            raise InvalidGramError(str(exc), column=j) from exc
        delta[:, j] = sol.beta
        conv[j], iters[j], kkt[j] = sol.converged, sol.iterations, sol.kkt_residual
    return DeltaAEstimate(delta, lam.copy(), conv, iters, kkt)


def lambda_max(w_col):
    return float(np.max(np.abs(w_col)))
