"""Lasso-penalized D-trace estimation of a precision-matrix difference."""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._kernels import soft_threshold
from .exceptions import SolverDivergenceError


@dataclass(frozen=True, eq=False)
class DtraceProblem:
    sigma1_hat: np.ndarray
    sigma2_hat: np.ndarray
    nu: float

    def __post_init__(self):
        s1 = np.asarray(self.sigma1_hat, dtype=float)
        s2 = np.asarray(self.sigma2_hat, dtype=float)
        if s1.ndim != 2 or s1.shape[0] != s1.shape[1] or s1.shape != s2.shape:
            raise ValueError(f"covariances must be square and conformable, got {s1.shape}, {s2.shape}")
        for name, s in (("sigma1_hat", s1), ("sigma2_hat", s2)):
            if not np.all(np.isfinite(s)):
                raise ValueError(f"{name} has non-finite entries")
            if np.max(np.abs(s - s.T)) > 1e-10:
                raise ValueError(f"{name} is not symmetric")
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        object.__setattr__(self, "sigma1_hat", s1)
        object.__setattr__(self, "sigma2_hat", s2)


@dataclass(frozen=True)
class DtraceOptions:
    max_iter: int = 10_000
    tol: float = 1e-9
    kkt_tol: Optional[float] = None
    backtracking: bool = True
    accelerate: bool = True
    ridge: float = 0.0
    debug: bool = False


@dataclass(eq=False)
class DeltaOmegaEstimate:
    delta: np.ndarray
    nu: float
    iterations: int
    converged: bool
    final_gradient_inf_norm: float
    kkt_residual: float
    objective_trace: List[float] = field(default_factory=list)


def _inner(a, b):
    # <A, B> = tr(A B')
    return float(np.sum(a * b))


def dtrace_loss(delta, sigma1, sigma2):
    delta = np.asarray(delta, dtype=float)
    s1d = sigma1 @ delta
    s2d = sigma2 @ delta
    quad = _inner(s1d, delta @ sigma2) + _inner(s2d, delta @ sigma1)
    return 0.25 * quad - _inner(delta, sigma1 - sigma2)


def dtrace_gradient(delta, sigma1, sigma2):
    delta = np.asarray(delta, dtype=float)
    return 0.5 * (sigma1 @ delta @ sigma2 + sigma2 @ delta @ sigma1) - (sigma1 - sigma2)


def kron_hessian(sigma1, sigma2):
    """(S1 kron S2 + S2 kron S1) / 2, acting on column-major vec(Delta)."""
    return 0.5 * (np.kron(sigma1, sigma2) + np.kron(sigma2, sigma1))


def default_kkt_tol(nu):
    return 1e-4 * nu if nu > 0 else 1e-6


def kkt_residual(delta, grad, nu):
    """Largest violation of the lasso optimality conditions."""
    active = delta != 0
    res_active = np.abs(grad + nu * np.sign(delta))[active]
    res_inactive = np.maximum(np.abs(grad)[~active] - nu, 0.0)
    worst = 0.0
    if res_active.size:
        worst = max(worst, float(res_active.max()))
    if res_inactive.size:
        worst = max(worst, float(res_inactive.max()))
    return worst


def _hess_apply(delta, s1, s2):
    return 0.5 * (s1 @ delta @ s2 + s2 @ delta @ s1)


def _loss_from_hess(delta, hd, diff):
    # L = <D, H(D)>/2 - <D, S1 - S2>
    return 0.5 * _inner(delta, hd) - _inner(delta, diff)


def solve_delta_omega(problem, options=None, init=None):
    """Proximal gradient with entry-wise soft-thresholding, started at zero.

    With ``accelerate`` (default) the monotone accelerated variant is used:
    the extrapolated step is accepted only when it does not raise the
    objective. Otherwise plain steps with optional backtracking.
    """
    opts = options or DtraceOptions()
    s1, s2, nu = problem.sigma1_hat, problem.sigma2_hat, float(problem.nu)
    m = s1.shape[0]
    if opts.ridge > 0:
        s1 = s1 + opts.ridge * np.eye(m)
        s2 = s2 + opts.ridge * np.eye(m)
    kkt_tol = opts.kkt_tol if opts.kkt_tol is not None else default_kkt_tol(nu)

    lip = float(np.linalg.eigvalsh(s1)[-1] * np.linalg.eigvalsh(s2)[-1])
    if lip <= 0:
        # both covariances vanish: the loss is identically zero
        delta = np.zeros((m, m))
        return DeltaOmegaEstimate(delta, nu, 0, True, 0.0, 0.0)
    step = 1.0 / lip

    diff = s1 - s2
    x = np.zeros((m, m)) if init is None else np.array(init, dtype=float)
    hx = _hess_apply(x, s1, s2)
    grad_x = hx - diff
    obj = _loss_from_hess(x, hx, diff) + nu * float(np.abs(x).sum())
    trace = [obj] if opts.debug else []
    converged = False
    it = 0
    y, grad_y = x, grad_x
    t_k = 1.0
    for it in range(1, opts.max_iter + 1):
        t = step
        while True:
            z = soft_threshold(y - t * grad_y, t * nu)
            hz = _hess_apply(z, s1, s2)
            z_obj = _loss_from_hess(z, hz, diff) + nu * float(np.abs(z).sum())
            if (opts.accelerate or not opts.backtracking
                    or z_obj <= obj + 1e-12 * max(1.0, abs(obj)) or t < 1e-12 * step):
                break
            t *= 0.5
        if not np.isfinite(z_obj) or not np.all(np.isfinite(z)):
            raise SolverDivergenceError(f"D-trace iterate became non-finite at iteration {it}")
        x_prev, obj_before = x, obj
        slack = 1e-13 * max(1.0, abs(obj))
        if z_obj <= obj + slack or not opts.accelerate:
            x, hx, new_obj = z, hz, z_obj
        else:
            new_obj = obj
        if opts.debug and new_obj > obj + 1e-10 * max(1.0, abs(obj)):
            raise AssertionError(f"objective increased at iteration {it}: {obj} -> {new_obj}")
        obj = new_obj
        grad_x = hx - diff
        if opts.debug:
            trace.append(obj)
        change = float(np.max(np.abs(x - x_prev))) if x is not x_prev else float(np.max(np.abs(z - x)))
        if change < opts.tol and kkt_residual(x, grad_x, nu) < kkt_tol:
            converged = True
            break
        if opts.accelerate and z_obj > obj_before + slack:
            # restart the momentum after a rejected extrapolation
            t_k = 1.0
            y, grad_y = x, grad_x
        elif opts.accelerate:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
            y = x + (t_k / t_next) * (z - x) + ((t_k - 1.0) / t_next) * (x - x_prev)
            t_k = t_next
            grad_y = _hess_apply(y, s1, s2) - diff
        else:
            y, grad_y = x, grad_x

    delta = 0.5 * (x + x.T)
    grad = dtrace_gradient(delta, s1, s2)
    return DeltaOmegaEstimate(
        delta=delta,
        nu=nu,
        iterations=it,
        converged=converged,
        final_gradient_inf_norm=float(np.max(np.abs(grad))),
        kkt_residual=kkt_residual(delta, grad, nu),
        objective_trace=trace,
    )


def precision_difference(sigma1, sigma2, nu, options=None, init=None):
    """Penalized estimate of inv(S1) - inv(S2).

    The loss above is stationary at inv(S2) - inv(S1) (set its gradient to
    zero), so the roles of the two covariances are swapped here. The
    l1 penalty is sign-symmetric, hence this is exactly the negated
    minimizer of the unswapped problem.
    """
    return solve_delta_omega(DtraceProblem(sigma2, sigma1, nu), options, init)


def nu_max(sigma1, sigma2):
    """Smallest penalty for which zero is optimal."""
    return float(np.max(np.abs(np.asarray(sigma1) - np.asarray(sigma2))))
