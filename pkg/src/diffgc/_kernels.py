"""Hot inner loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports cleanly and the environment
variable ``DIFFGC_DISABLE_NUMBA`` is unset (or set to ``0``/``false``).
Both paths are always importable so they can be compared directly.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _numba_requested():
    flag = os.environ.get("DIFFGC_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _numba_requested()


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# Cyclic coordinate descent for (1/2) b'Gb - b'w + lam * |b|_1


def cd_lasso_numpy(gram, w, lam, beta, tol, max_sweeps):
    """Run cyclic coordinate descent in place on ``beta``.

    Returns ``(sweeps, converged)``. ``gram`` must have a strictly positive
    diagonal; callers validate that.
    """
    m = gram.shape[0]
    diag = np.diag(gram)
    # r = w - G b, kept current across coordinate moves
    r = w - gram @ beta
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for k in range(m):
            old = beta[k]
            z = r[k] + diag[k] * old
            if z > lam:
                new = (z - lam) / diag[k]
            elif z < -lam:
                new = (z + lam) / diag[k]
            else:
                new = 0.0
            if new != old:
                step = new - old
                r -= step * gram[:, k]
                beta[k] = new
                if abs(step) > max_change:
                    max_change = abs(step)
        if max_change < tol:
            return sweep, True
    return max_sweeps, False


def _cd_lasso_loop(gram, w, lam, beta, tol, max_sweeps):
    m = gram.shape[0]
    r = np.empty(m)
    for i in range(m):
        acc = w[i]
        for j in range(m):
            acc -= gram[i, j] * beta[j]
        r[i] = acc
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for k in range(m):
            old = beta[k]
            gkk = gram[k, k]
            z = r[k] + gkk * old
            if z > lam:
                new = (z - lam) / gkk
            elif z < -lam:
                new = (z + lam) / gkk
            else:
                new = 0.0
            if new != old:
                step = new - old
                for i in range(m):
                    r[i] -= step * gram[i, k]
                beta[k] = new
                if abs(step) > max_change:
                    max_change = abs(step)
        if max_change < tol:
            return sweep, True
    return max_sweeps, False


cd_lasso_numba = _njit(_cd_lasso_loop)


# ---------------------------------------------------------------------------
# VAR(p) recursion x_t = sum_k A_k' x_{t-k} + e_t, zero initial history


def var_recursion_numpy(transitions, noise):
    """``transitions`` has shape (p, d, d); ``noise`` has shape (T, d)."""
    p = transitions.shape[0]
    steps, d = noise.shape
    x = np.zeros((steps, d))
    lagged_t = np.ascontiguousarray(np.transpose(transitions, (0, 2, 1)))
    for t in range(steps):
        acc = noise[t].copy()
        for k in range(1, min(p, t) + 1):
            acc += lagged_t[k - 1] @ x[t - k]
        x[t] = acc
    return x


def _var_recursion_loop(transitions, noise):
    p = transitions.shape[0]
    steps, d = noise.shape
    x = np.zeros((steps, d))
    for t in range(steps):
        for i in range(d):
            x[t, i] = noise[t, i]
        for k in range(1, p + 1):
            if t - k < 0:
                break
            a = transitions[k - 1]
            for j in range(d):
                xj = x[t - k, j]
                if xj != 0.0:
                    for i in range(d):
                        # (A' x)_i = sum_j A[j, i] x_j
                        x[t, i] += a[j, i] * xj
    return x


var_recursion_numba = _njit(_var_recursion_loop)


def cd_lasso(gram, w, lam, beta, tol, max_sweeps):
    if USE_NUMBA:
        return cd_lasso_numba(gram, w, float(lam), beta, float(tol), int(max_sweeps))
    return cd_lasso_numpy(gram, w, float(lam), beta, float(tol), int(max_sweeps))


def var_recursion(transitions, noise):
    if USE_NUMBA:
        return var_recursion_numba(transitions, noise)
    return var_recursion_numpy(transitions, noise)


def soft_threshold(x, thresh):
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def backend():
    return "numba" if USE_NUMBA else "numpy"
