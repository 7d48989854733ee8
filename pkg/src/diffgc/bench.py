"""Experiment harnesses: support-recovery curves, rate scaling, and CSV/JSON emission."""
import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .baselines import s1_path, s2_path
from .delta_a import CDOptions, DeltaAProblem, build_w, solve_delta_a
from .dtrace import DtraceOptions, nu_max, precision_difference
from .selection import abic_nu, penalty_grid
from .simulate import SimSpec, gen_sim1, gen_sim2, gen_sim3, sample_pair
from .var_core import estimate_moments

log = logging.getLogger(__name__)

METHODS = ("direct", "s1", "s2")


class Metrics(NamedTuple):
    n_edge: int
    tp: int
    frobenius_error: float
    max_error: float


def metrics(delta_hat, delta_true):
    delta_hat = np.asarray(delta_hat, dtype=float)
    delta_true = np.asarray(delta_true, dtype=float)
    if delta_hat.shape != delta_true.shape:
        raise ValueError(f"shape mismatch: {delta_hat.shape} vs {delta_true.shape}")
    est = delta_hat != 0
    diff = delta_hat - delta_true
    return Metrics(
        n_edge=int(est.sum()),
        tp=int((est & (delta_true != 0)).sum()),
        frobenius_error=float(np.linalg.norm(diff)),
        max_error=float(np.max(np.abs(diff), initial=0.0)),
    )


@dataclass(frozen=True)
class RocCurve:
    """(penalty, N_edge, TP) points for one method on one replicate, sorted by penalty."""

    method: str
    points: Tuple[Tuple[float, int, int], ...]
    metadata: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        pts = tuple(sorted(((float(a), int(b), int(c)) for a, b, c in self.points),
                           key=lambda t: -t[0]))
        for _, n_edge, tp in pts:
            if not n_edge >= tp >= 0:
                raise ValueError(f"invalid curve point N_edge={n_edge}, TP={tp}")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class RateCurve:
    """(sqrt(log d / n), mean error, std) points for one dimension."""

    d: int
    replicates: int
    points: Tuple[Tuple[float, float, float], ...]
    n_values: Tuple[int, ...] = ()
    metadata: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        order = sorted(range(len(self.points)), key=lambda i: self.points[i][0])
        pts = tuple(tuple(float(v) for v in self.points[i]) for i in order)
        xs = [p[0] for p in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("abscissa values must be strictly increasing")
        object.__setattr__(self, "points", pts)
        if self.n_values:
            object.__setattr__(self, "n_values", tuple(int(self.n_values[i]) for i in order))


def tp_at_matched(curve, target_n_edge):
    """TP at ``target_n_edge`` by linear interpolation in N_edge.

    Points sharing an N_edge are averaged; targets outside the observed
    range take the nearest end value.
    """
    pts = curve.points if isinstance(curve, RocCurve) else curve
    n_edge = np.array([p[1] for p in pts], dtype=float)
    tp = np.array([p[2] for p in pts], dtype=float)
    xs = np.unique(n_edge)
    ys = np.array([tp[n_edge == x].mean() for x in xs])
    return float(np.interp(target_n_edge, xs, ys))


def line_fit(curve):
    """Least-squares line through a rate curve: ``(slope, intercept, r_squared)``."""
    x = np.array([p[0] for p in curve.points])
    y = np.array([p[1] for p in curve.points])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(intercept), r2


# ---------------------------------------------------------------------------
# support-recovery curves (Simulations I and II)


@dataclass(frozen=True)
class CurveConfig:
    grid_size: int = 40
    grid_ratio: float = 1e-3
    nu_grid_size: int = 25
    nu_grid_ratio: float = 0.01
    dtrace: DtraceOptions = field(default_factory=DtraceOptions)
    cd: CDOptions = field(default_factory=CDOptions)


def _score_blocks(delta, blocks):
    """Metrics for each scored sub-block ``(rows, cols, truth)``."""
    return [metrics(delta[r, c], truth) for r, c, truth in blocks]


def _direct_curves(pilot, data, p, blocks, cfg):
    pm1, pm2 = (estimate_moments(x, p) for x in pilot)
    nu_cands = penalty_grid(nu_max(pm1.sigma_hat, pm2.sigma_hat), cfg.nu_grid_size, cfg.nu_grid_ratio)
    nu, _, _ = abic_nu(pm2.sigma_hat, pm1.sigma_hat, nu_cands, pilot[0].n, pilot[1].n, p, cfg.dtrace)
    m1, m2 = (estimate_moments(x, p) for x in data)
    d_omega = precision_difference(m1.sigma_hat, m2.sigma_hat, nu, cfg.dtrace).delta
    w = build_w(m1.sigma_hat, m2.sigma_hat, d_omega, m1.theta_hat, m2.theta_hat)
    gram = m1.sigma_hat + m2.sigma_hat
    lams = penalty_grid(float(np.max(np.abs(w))), cfg.grid_size, cfg.grid_ratio)
    points = [[] for _ in blocks]
    warm = None
    for lam in lams:
        est = solve_delta_a(DeltaAProblem(gram, w, lam), cfg.cd, init=warm).delta
        warm = est
        for b, m in enumerate(_score_blocks(est, blocks)):
            points[b].append((lam, m.n_edge, m.tp))
    return points, {"nu": nu}


def _baseline_curves(method, data, p, blocks, cfg):
    d = data[0].d
    m1, m2 = (estimate_moments(x, p) for x in data)
    eta_max = max(float(np.max(np.abs(m1.theta_hat))), float(np.max(np.abs(m2.theta_hat))))
    etas = penalty_grid(eta_max, cfg.grid_size, cfg.grid_ratio)
    if method == "s1":
        fits1, fits2 = s1_path(m1, d, p, etas, cfg.cd), s1_path(m2, d, p, etas, cfg.cd)
    else:
        fits1, fits2 = s2_path(m1, etas), s2_path(m2, etas)
    points = [[] for _ in blocks]
    for eta, a1, a2 in zip(etas, fits1, fits2):
        for b, m in enumerate(_score_blocks(a1 - a2, blocks)):
            points[b].append((eta, m.n_edge, m.tp))
    return points, {}


def replicate_curves(pilot, data, p, blocks, methods=METHODS, config=None, metadata=None):
    """One curve per (method, scored block) for a single replicate."""
    cfg = config or CurveConfig()
    out = []
    for method in methods:
        if method == "direct":
            pts, extra = _direct_curves(pilot, data, p, blocks, cfg)
        elif method in ("s1", "s2"):
            pts, extra = _baseline_curves(method, data, p, blocks, cfg)
        else:
            raise ValueError(f"unknown method {method!r}")
        for b, block_pts in enumerate(pts):
            meta = dict(metadata or {})
            meta.update(extra)
            meta["block"] = b
            meta["target_n_edge"] = int(np.count_nonzero(blocks[b][2]))
            out.append(RocCurve(method, tuple(block_pts), meta))
    return out


@dataclass(eq=False)
class RocBenchResult:
    curves: list
    comparisons: list
    methods: Tuple[str, ...]

    def win_rate(self, block=None):
        rows = [c for c in self.comparisons if block is None or c["block"] == block]
        if not rows:
            return float("nan")
        return float(np.mean([c["direct_wins"] for c in rows]))


def _compare(curves, methods):
    """Per replicate and block: interpolated TP of every method at N_edge = |truth|_0."""
    by_key = {}
    for c in curves:
        by_key.setdefault((c.metadata["replicate"], c.metadata["block"]), {})[c.method] = c
    rows = []
    for (rep, block), group in sorted(by_key.items()):
        target = next(iter(group.values())).metadata["target_n_edge"]
        tps = {m: tp_at_matched(group[m], target) for m in methods if m in group}
        row = {"replicate": rep, "block": block, "target_n_edge": target}
        row.update({f"tp_{m}": v for m, v in tps.items()})
        others = [v for m, v in tps.items() if m != "direct"]
        row["direct_wins"] = bool("direct" in tps and all(tps["direct"] > v for v in others))
        rows.append(row)
    return rows


def _roc_bench(gen, spec, replicates, methods, config, blocks_fn):
    root = np.random.SeedSequence(spec.seed)
    curves = []
    for rep, child in enumerate(root.spawn(replicates)):
        g_seed, pilot_seed, data_seed = child.spawn(3)
        truth = gen(spec, rng=np.random.default_rng(g_seed))
        pilot = sample_pair(truth, spec.n, pilot_seed)
        data = sample_pair(truth, spec.n, data_seed)
        blocks = blocks_fn(truth)
        curves += replicate_curves(pilot, data, truth.p, blocks, methods, config,
                                   {"replicate": rep, "scenario": spec.scenario,
                                    "d": spec.d, "n": spec.n})
    return RocBenchResult(curves, _compare(curves, methods), tuple(methods))


def run_sim1_bench(spec=None, replicates=20, methods=METHODS, config=None):
    """Support-recovery curves for the VAR(1) scenario.

    The direct method's precision penalty is tuned on an independent pilot
    pair; curves sweep one common column penalty (direct) or one common
    baseline penalty for both conditions (S1, S2).
    """
    spec = spec or SimSpec("sim1", d=20, n=100)
    d = spec.d

    def blocks(truth):
        return [(slice(0, d), slice(0, d), truth.delta_a_true)]

    return _roc_bench(gen_sim1, spec, replicates, methods, config, blocks)


def run_sim2_bench(spec=None, replicates=20, methods=METHODS, config=None):
    """As :func:`run_sim1_bench` for the VAR(2) scenario, scored per lag block."""
    spec = spec or SimSpec("sim2", d=20, n=100)
    d = spec.d

    def blocks(truth):
        return [(slice(k * d, (k + 1) * d), slice(0, d), truth.delta_a_lags[k])
                for k in range(truth.p)]

    return _roc_bench(gen_sim2, spec, replicates, methods, config, blocks)


# ---------------------------------------------------------------------------
# rate scaling (Simulation III)


@dataclass(eq=False)
class RateBenchResult:
    curves: list
    nu_constant: float
    errors: dict


def calibrate_rate_constant(d=25, n=200, seed=0, options=None, grid_size=25, grid_ratio=0.01):
    """Constant c with c * sqrt(log d / n) equal to the approximate-BIC penalty on one pilot pair."""
    ss = np.random.SeedSequence(seed)
    g_seed, data_seed = ss.spawn(2)
    truth = gen_sim3(SimSpec("sim3", d=d, n=n), rng=np.random.default_rng(g_seed))
    p1, p2 = sample_pair(truth, n, data_seed)
    m1, m2 = estimate_moments(p1, 1), estimate_moments(p2, 1)
    cands = penalty_grid(nu_max(m1.sigma_hat, m2.sigma_hat), grid_size, grid_ratio)
    nu, _, _ = abic_nu(m1.sigma_hat, m2.sigma_hat, cands, n, n, 1, options)
    return nu / np.sqrt(np.log(d) / n)


def run_sim3_rate(d_list=(25, 50), n_list=(200, 300, 400, 500, 600, 700), replicates=100,
                  seed=0, nu_constant: Optional[float] = None, options=None):
    """Mean Frobenius error of the D-trace estimate with nu = c sqrt(log d / n)."""
    if nu_constant is None:
        nu_constant = calibrate_rate_constant(seed=seed, options=options)
    root = np.random.SeedSequence(seed)
    _, run_seed = root.spawn(2)
    curves, errors = [], {}
    for d, d_seed in zip(d_list, run_seed.spawn(len(d_list))):
        rep_seeds = d_seed.spawn(replicates)
        truths = []
        for rs in rep_seeds:
            g_seed, _ = rs.spawn(2)
            truths.append(gen_sim3(SimSpec("sim3", d=d, n=max(n_list)),
                                   rng=np.random.default_rng(g_seed)))
        points = []
        for n in n_list:
            x = float(np.sqrt(np.log(d) / n))
            nu = nu_constant * x
            errs = np.empty(replicates)
            for r, (truth, rs) in enumerate(zip(truths, rep_seeds)):
                data_seed = np.random.SeedSequence(rs.entropy, spawn_key=rs.spawn_key + (n,))
                p1, p2 = sample_pair(truth, n, data_seed)
                m1, m2 = estimate_moments(p1, 1), estimate_moments(p2, 1)
                est = precision_difference(m1.sigma_hat, m2.sigma_hat, nu, options)
                if not est.converged:
                    log.warning("d=%d n=%d rep=%d: D-trace did not converge", d, n, r)
                errs[r] = np.linalg.norm(est.delta - truth.delta_omega_true)
            errors[(d, n)] = errs
            points.append((x, float(errs.mean()), float(errs.std(ddof=1)) if replicates > 1 else 0.0))
        curves.append(RateCurve(d, replicates, tuple(points), tuple(n_list),
                                {"nu_constant": float(nu_constant)}))
    return RateBenchResult(curves, float(nu_constant), errors)


# ---------------------------------------------------------------------------
# emission

_ROC_COLUMNS = ["penalty", "n_edge", "tp"]
_RATE_COLUMNS = ["x", "mean_error", "std_error", "n"]


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def emit_plots(results, out_dir):
    """Write one CSV per curve plus ``manifest.json``; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    entries, written = [], []
    for i, curve in enumerate(results):
        if isinstance(curve, RocCurve):
            name = f"roc_{curve.method}_{i:04d}.csv"
            columns = _ROC_COLUMNS
            rows = [[_fmt(a), _fmt(b), _fmt(c)] for a, b, c in curve.points]
            entry = {"kind": "roc", "method": curve.method, "x_axis": "n_edge", "y_axis": "tp"}
        elif isinstance(curve, RateCurve):
            name = f"rate_d{curve.d}_{i:04d}.csv"
            columns = _RATE_COLUMNS
            ns = curve.n_values or (0,) * len(curve.points)
            rows = [[_fmt(x), _fmt(m), _fmt(s), _fmt(n)] for (x, m, s), n in zip(curve.points, ns)]
            entry = {"kind": "rate", "d": curve.d, "replicates": curve.replicates,
                     "x_axis": "sqrt(log d / n)", "y_axis": "mean_error"}
        else:
            raise TypeError(f"cannot emit {type(curve).__name__}")
        path = out / name
        try:
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(columns)
                w.writerows(rows)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        entry.update({"file": name, "columns": columns, "rows": len(rows),
                      "metadata": _plain(curve.metadata)})
        entries.append(entry)
        written.append(path)
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"curves": entries}, indent=2, sort_keys=True) + "\n")
    written.append(manifest)
    return written


def read_curve_csv(path, entry):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    if entry["kind"] == "roc":
        pts = tuple((float(a), int(b), int(c)) for a, b, c in rows)
        return RocCurve(entry["method"], pts, entry.get("metadata", {}))
    pts = tuple((float(x), float(m), float(s)) for x, m, s, _ in rows)
    ns = tuple(int(r[3]) for r in rows)
    return RateCurve(entry["d"], entry["replicates"], pts, ns, entry.get("metadata", {}))


def load_plots(out_dir):
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    return [read_curve_csv(out / e["file"], e) for e in manifest["curves"]]
