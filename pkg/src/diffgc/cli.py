"""Command-line entry point: simulate, fit, conditions, bench."""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .baselines import fit_baseline
from .conditions import run_ir_table
from .delta_a import CDOptions
from .dtrace import DtraceOptions
from .exceptions import DiffGCError
from .io import read_panel_csv, write_panel_csv
from .selection import PipelineConfig, fit_direct, stability_selection
from .simulate import SimSpec, generate, sample_pair

log = logging.getLogger("diffgc")

# thresholds checked by ``bench --check``
SIM_WIN_RATE = 0.7
RATE_R2 = 0.9


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_edges(path, mat, names=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "target", "value"])
        for r, c in zip(*np.nonzero(mat)):
            src = names[r] if names and r < len(names) else int(r)
            tgt = names[c] if names and c < len(names) else int(c)
            w.writerow([src, tgt, repr(float(mat[r, c]))])


def cmd_simulate(args):
    spec = SimSpec(args.scenario, d=args.d, n=args.n, seed=args.seed)
    ss = np.random.SeedSequence(args.seed)
    g_seed, data_seed = ss.spawn(2)
    truth = generate(spec, np.random.default_rng(g_seed))
    p1, p2 = sample_pair(truth, args.n, data_seed)
    out = _out_dir(args.out)
    write_panel_csv(p1, out / "panel_1.csv")
    write_panel_csv(p2, out / "panel_2.csv")
    _dump(truth.to_dict(), out / "ground_truth.json")
    print(f"wrote {out}/panel_1.csv, panel_2.csv, ground_truth.json")
    return 0


def _pipeline_config(args):
    return PipelineConfig(
        p=args.p,
        tau=args.tau,
        center=not args.no_center,
        grid_size=args.grid_size,
        grid_ratio=args.grid_ratio,
        nu_grid=tuple(_floats(args.nu_grid)) if args.nu_grid else None,
        lambda_grid=tuple(_floats(args.lambda_grid)) if args.lambda_grid else None,
        dtrace=DtraceOptions(max_iter=args.max_iter, tol=args.tol,
                             backtracking=not args.no_backtracking),
        cd=CDOptions(),
    )


def cmd_fit(args):
    p1, names = read_panel_csv(args.panel1, header=args.header, condition_label=1)
    p2, _ = read_panel_csv(args.panel2, header=args.header, condition_label=2)
    out = _out_dir(args.out)
    if args.method != "direct":
        if args.eta is None:
            raise SystemExit("--eta is required for baseline methods")
        est = fit_baseline(args.method, p1, p2, args.p, args.eta, center=not args.no_center)
        _dump({"method": est.method, "eta": est.penalty, "delta_a": est.delta.tolist(),
               "a_hat_1": est.a_hat_1.tolist(), "a_hat_2": est.a_hat_2.tolist()},
              out / "fit.json")
        _write_edges(out / "delta_a_edges.csv", est.delta, names)
        print(f"wrote {out}/fit.json")
        return 0
    cfg = _pipeline_config(args)
    fit = fit_direct(p1, p2, cfg)
    result = fit.to_dict()
    result["method"] = "direct"
    _write_edges(out / "delta_a_edges.csv", fit.delta_a_thresholded, names)
    _write_edges(out / "delta_omega_edges.csv", fit.delta_omega.delta, names)
    if args.stride > 1:
        rep = stability_selection(p1, p2, args.stride, args.threshold, cfg)
        result["stability"] = rep.to_dict()
        with open(out / "stable_edges.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["source", "target", "sign"])
            w.writerows(rep.selected_edges)
    _dump(result, out / "fit.json")
    print(f"nu={fit.nu:.4g}; {int(np.count_nonzero(fit.delta_a_thresholded))} edges; wrote {out}/fit.json")
    return 0


def cmd_conditions(args):
    table = run_ir_table(_ints(args.d_list), _ints(args.s_list), args.reps, seed=args.seed,
                         flip_counting=args.flip_counting, norm=args.norm)
    for row in table.rows():
        print(",".join(row))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.out)
    return 0


def cmd_bench(args):
    out = _out_dir(args.out)
    failed = []
    if args.scenario in ("sim1", "sim2"):
        spec = SimSpec(args.scenario, d=args.d, n=args.n, seed=args.seed)
        runner = bench_mod.run_sim1_bench if args.scenario == "sim1" else bench_mod.run_sim2_bench
        methods = tuple(args.methods.split(","))
        res = runner(spec, args.reps, methods)
        bench_mod.emit_plots(res.curves, out)
        _dump({"comparisons": res.comparisons}, out / "comparisons.json")
        blocks = sorted({c["block"] for c in res.comparisons})
        for b in blocks:
            rate = res.win_rate(b)
            print(f"block {b}: direct beats baselines at matched N_edge in {100 * rate:.1f}% of replicates")
            if set(methods) == set(bench_mod.METHODS) and rate < SIM_WIN_RATE:
                failed.append(f"block {b} win rate {rate:.2f} < {SIM_WIN_RATE}")
    elif args.scenario == "sim3":
        d_list = _ints(args.d_list) if args.d_list else [args.d]
        n_list = _ints(args.n_list)
        res = bench_mod.run_sim3_rate(d_list, n_list, args.reps, seed=args.seed)
        bench_mod.emit_plots(res.curves, out)
        print(f"nu constant c = {res.nu_constant:.4g}")
        for c in res.curves:
            slope, intercept, r2 = bench_mod.line_fit(c)
            print(f"d={c.d}: slope={slope:.4g} intercept={intercept:.4g} R^2={r2:.4f}")
            if r2 < RATE_R2 or slope <= 0:
                failed.append(f"d={c.d}: R^2={r2:.3f}, slope={slope:.3g}")
    else:
        d_list = _ints(args.d_list) if args.d_list else [10, 20, 30]
        table = run_ir_table(d_list, _ints(args.s_list), args.reps, seed=args.seed)
        table.to_csv(out / "ir_table.csv")
        for row in table.rows():
            print(",".join(row))
    if args.check and failed:
        for f in failed:
            print(f"FAIL: {f}", file=sys.stderr)
        return 1
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="diffgc", description="Differential Granger causality estimation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic panel pair with ground truth")
    s.add_argument("--scenario", choices=["sim1", "sim2", "sim3"], default="sim1")
    s.add_argument("--d", type=int, default=20)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="estimate the transition difference from two CSV panels")
    f.add_argument("panel1")
    f.add_argument("panel2")
    f.add_argument("--out", required=True)
    f.add_argument("--p", type=int, default=1)
    f.add_argument("--header", action="store_true", help="first CSV row holds channel names")
    f.add_argument("--no-center", action="store_true")
    f.add_argument("--method", choices=["direct", "s1", "s2"], default="direct")
    f.add_argument("--eta", type=float, help="baseline penalty")
    f.add_argument("--tau", type=float, default=0.05)
    f.add_argument("--stride", type=int, default=1, help="stability-selection subsamples (1 = off)")
    f.add_argument("--threshold", type=float, default=0.5)
    f.add_argument("--grid-size", type=int, default=25)
    f.add_argument("--grid-ratio", type=float, default=0.01)
    f.add_argument("--nu-grid", help="comma-separated nu candidates")
    f.add_argument("--lambda-grid", help="comma-separated lambda candidates (all columns)")
    f.add_argument("--max-iter", type=int, default=DtraceOptions.max_iter)
    f.add_argument("--tol", type=float, default=DtraceOptions.tol)
    f.add_argument("--no-backtracking", action="store_true")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("conditions", help="tabulate how often irrepresentability holds")
    c.add_argument("--d-list", default="10,20,30")
    c.add_argument("--s-list", default="6,12,18")
    c.add_argument("--reps", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--flip-counting", choices=["entries", "pairs"], default="entries")
    c.add_argument("--norm", choices=["row", "induced"], default="row")
    c.add_argument("--out")
    c.set_defaults(func=cmd_conditions)

    b = sub.add_parser("bench", help="run an experiment and emit curve CSVs")
    b.add_argument("--scenario", choices=["sim1", "sim2", "sim3", "ir-table"], required=True)
    b.add_argument("--d", type=int, default=20)
    b.add_argument("--n", type=int, default=100)
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--methods", default="direct,s1,s2")
    b.add_argument("--d-list", help="sim3 / ir-table dimensions, comma-separated")
    b.add_argument("--n-list", default="200,300,400,500,600,700")
    b.add_argument("--s-list", default="6,12,18")
    b.add_argument("--check", action="store_true", help="exit nonzero when a threshold fails")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DiffGCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
