"""Mutual incoherence and irrepresentability checks, and the random-graph IR experiment.

Matrix entry (j, k) of a d x d matrix maps to vec index k * d + j
(column-major, 0-based) throughout.
"""
import csv
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .exceptions import GenerationError
from .simulate import gen_ir_instance


@dataclass(eq=False)
class ConditionReport:
    kind: str
    holds: bool
    margin: float
    details: dict = field(default_factory=dict)


def vec_index(j, k, d):
    return k * d + j


def support_indices(support, d=None):
    """Column-major vec indices of a boolean mask, or a validated copy of an index array."""
    s = np.asarray(support)
    if s.dtype == bool:
        return np.flatnonzero(s.ravel(order="F"))
    idx = np.unique(s.astype(int).ravel())
    if d is not None and (idx.min(initial=0) < 0 or idx.max(initial=0) >= d * d):
        raise ValueError("support index out of range")
    return idx


def check_mi(sigma1, sigma2, s_omega_prime):
    """Mutual incoherence: 4 max(mu1 s2max, mu2 s1max) <= sigma^S_min / (2 s')."""
    if s_omega_prime < 1:
        raise ValueError("s_omega_prime must be >= 1")
    s1 = np.asarray(sigma1, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    d = s1.shape[0]
    off = ~np.eye(d, dtype=bool)
    mu1 = float(np.max(np.abs(s1[off]), initial=0.0))
    mu2 = float(np.max(np.abs(s2[off]), initial=0.0))
    d1, d2 = np.diag(s1), np.diag(s2)
    mu = 4.0 * max(mu1 * d2.max(), mu2 * d1.max())
    # second term indexed [j, k]: s2_kk s1_jj + 2 s2_kj s1_jk + s2_jj s1_kk
    pair = d2[None, :] * d1[:, None] + 2.0 * s2.T * s1 + d2[:, None] * d1[None, :]
    single = d2 * d1
    sigma_s_min = float(min(single.min(), pair.min()))
    rhs = sigma_s_min / (2.0 * s_omega_prime)
    margin = rhs - mu
    return ConditionReport(
        kind="MI",
        holds=bool(mu <= rhs),
        margin=margin,
        details={"mu": mu, "mu1": mu1, "mu2": mu2, "sigma_s_min": sigma_s_min, "rhs": rhs},
    )


def hessian_columns(sigma1, sigma2, cols):
    """Selected columns of (S1 kron S2 + S2 kron S1) / 2 without forming the full matrix."""
    d = sigma1.shape[0]
    cols = np.asarray(cols, dtype=int)
    a, b = cols % d, cols // d
    out = np.empty((d * d, cols.size))
    for i, (ai, bi) in enumerate(zip(a, b)):
        # entry for row (j, k): (s1[k, b] s2[j, a] + s2[k, b] s1[j, a]) / 2
        block = 0.5 * (np.outer(sigma2[:, ai], sigma1[:, bi]) + np.outer(sigma1[:, ai], sigma2[:, bi]))
        out[:, i] = block.ravel(order="F")
    return out


def check_ir(sigma1, sigma2, support, norm="row"):
    """Irrepresentability: max over e outside S of ||Gamma_eS Gamma_SS^-1||_1 < 1.

    ``norm="row"`` evaluates the l1 norm of each off-support row (the
    condition as written). ``norm="induced"`` instead uses the induced
    matrix 1-norm (largest column sum) of the whole off-support block;
    both values are always reported in ``details``.
    """
    if norm not in ("row", "induced"):
        raise ValueError("norm must be 'row' or 'induced'")
    s1 = np.asarray(sigma1, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    d = s1.shape[0]
    sup = support_indices(support, d)
    if sup.size == 0:
        raise ValueError("support must be nonempty")
    cols = hessian_columns(s1, s2, sup)
    g_ss = cols[sup]
    comp = np.setdiff1d(np.arange(d * d), sup)
    g_es = cols[comp]
    cond = np.linalg.cond(g_ss)
    if not np.isfinite(cond) or cond > 1e12:
        return ConditionReport("IR", False, float("-inf"),
                               {"singular": True, "condition_number": float(cond)})
    # rows of Gamma_eS Gamma_SS^-1 (Gamma_SS symmetric)
    m = np.linalg.solve(g_ss, g_es.T).T
    abs_m = np.abs(m)
    row_norms = abs_m.sum(axis=1) if comp.size else np.zeros(0)
    row_value = float(row_norms.max(initial=0.0))
    induced_value = float(abs_m.sum(axis=0).max(initial=0.0))
    value = row_value if norm == "row" else induced_value
    worst = int(comp[np.argmax(row_norms)]) if comp.size else -1
    return ConditionReport(
        kind="IR",
        holds=bool(value < 1.0),
        margin=1.0 - value,
        details={
            "value": value,
            "row_value": row_value,
            "induced_value": induced_value,
            "worst_row": worst,
            "condition_number": float(cond),
            "norm": norm,
        },
    )


@dataclass(eq=False)
class IRTable:
    d_list: Tuple[int, ...]
    s_list: Tuple[int, ...]
    reps: int
    percentages: Dict[Tuple[int, int], float]
    failures: Dict[Tuple[int, int], int]
    holds_counts: Dict[Tuple[int, int], int]
    norm: str = "row"
    flip_counting: str = "entries"

    def rows(self):
        header = ["s_omega"] + [f"d={d}" for d in self.d_list]
        body = []
        for s in self.s_list:
            row = [str(s)]
            for d in self.d_list:
                pct = self.percentages.get((d, s))
                row.append("" if pct is None or np.isnan(pct) else f"{pct:.1f}")
            body.append(row)
        return [header] + body

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.rows())


def run_ir_table(d_list, s_list, reps, seed=0, flip_counting="entries", norm="row"):
    """Percentage of random draws satisfying the IR condition for each (d, s)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    root = np.random.SeedSequence(seed)
    cells = [(d, s) for d in d_list for s in s_list]
    children = root.spawn(len(cells))
    pct, fails, holds = {}, {}, {}
    for (d, s), child in zip(cells, children):
        n_hold = n_fail = 0
        for rep_seed in child.spawn(reps):
            try:
                sig1, sig2, sup = gen_ir_instance(d, s, rep_seed, flip_counting=flip_counting)
            except (GenerationError, ValueError):
                n_fail += 1
                continue
            n_hold += check_ir(sig1, sig2, sup, norm=norm).holds
        used = reps - n_fail
        pct[(d, s)] = 100.0 * n_hold / used if used else float("nan")
        fails[(d, s)] = n_fail
        holds[(d, s)] = n_hold
    return IRTable(tuple(d_list), tuple(s_list), reps, pct, fails, holds, norm, flip_counting)
