"""Direct estimation of differential Granger causality between two VAR processes."""
from .baselines import BaselineEstimate, fit_baseline, fit_s1, fit_s2
from .bench import (
    RateCurve,
    RocCurve,
    emit_plots,
    line_fit,
    load_plots,
    metrics,
    run_sim1_bench,
    run_sim2_bench,
    run_sim3_rate,
    tp_at_matched,
)
from .conditions import ConditionReport, check_ir, check_mi, run_ir_table
from .delta_a import CDOptions, DeltaAProblem, build_w, solve_column, solve_delta_a
from .dtrace import (
    DtraceOptions,
    DtraceProblem,
    dtrace_gradient,
    dtrace_loss,
    precision_difference,
    solve_delta_omega,
)
from .exceptions import DiffGCError
from .io import load_model_json, read_panel_csv, save_model_json, write_panel_csv
from .selection import (
    PipelineConfig,
    abic_lambda,
    abic_nu,
    fit_direct,
    hard_threshold,
    stability_selection,
)
from .simulate import SimSpec, gen_ir_instance, gen_sim1, gen_sim2, gen_sim3, sample_pair, sample_var
from .var_core import (
    TimeSeriesPanel,
    VarModel,
    build_companion,
    estimate_moments,
    stationary_covariance,
    yule_walker_transition,
)

__version__ = "0.1.0"
