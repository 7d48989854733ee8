import numpy as np
import pytest

from diffgc.delta_a import solve_column
from diffgc.dtrace import DtraceProblem, dtrace_gradient, solve_delta_omega
from diffgc.exceptions import SubsampleError, TuningError
from diffgc.selection import (
    PipelineConfig,
    abic_lambda,
    abic_nu,
    abic_scale,
    choose_index,
    fit_direct,
    hard_threshold,
    penalty_grid,
    stability_selection,
)
from diffgc.simulate import SimSpec, gen_sim1, sample_pair
from diffgc.var_core import TimeSeriesPanel


def spd(d, rng, n=None):
    n = n or 4 * d
    x = rng.standard_normal((d, n))
    return x @ x.T / n


# --- grids and criterion ---------------------------------------------------------


def test_penalty_grid_shape():
    g = penalty_grid(2.0)
    assert g.size == 25 and g[0] == pytest.approx(2.0) and g[-1] == pytest.approx(0.02)
    assert np.all(np.diff(g) < 0)


def test_abic_scale():
    assert abic_scale(100, 120, 1) == 220
    assert abic_scale(100, 120, 3) == 216


def test_choose_index_ties_go_to_first():
    assert choose_index(np.array([3.0, 1.0, 1.0, 2.0])) == 1


def test_choose_index_all_failed():
    with pytest.raises(TuningError):
        choose_index(np.array([np.inf, np.inf]))


# --- nu ---------------------------------------------------------------------------------


def test_abic_nu_equal_covariances_picks_largest():
    s = spd(4, np.random.default_rng(0))
    nu, grid, _ = abic_nu(s, s, [0.01, 0.1, 0.05], 50, 50, 1)
    assert nu == 0.1
    assert grid.chosen_index == 0
    np.testing.assert_array_equal(grid.criterion_values, 0.0)


def test_abic_nu_single_candidate():
    rng = np.random.default_rng(1)
    nu, grid, _ = abic_nu(spd(4, rng), spd(4, rng), [0.07], 50, 50, 1)
    assert nu == 0.07 and grid.values.tolist() == [0.07]


def test_abic_nu_hand_table():
    rng = np.random.default_rng(2)
    s1, s2 = spd(4, rng), spd(4, rng)
    cands = [0.2, 0.02]
    a = 60 + 80 - 2 * (2 - 1)
    table = []
    for nu in cands:
        delta = solve_delta_omega(DtraceProblem(s1, s2, nu)).delta
        resid = np.max(np.abs(dtrace_gradient(delta, s1, s2)))
        table.append(a * resid + np.log(a) * np.count_nonzero(delta))
    nu, grid, _ = abic_nu(s1, s2, cands, 60, 80, 2)
    np.testing.assert_allclose(grid.criterion_values, table, rtol=1e-6)
    assert nu == cands[int(np.argmin(table))]


def test_abic_nu_reproducible_from_stored_terms():
    rng = np.random.default_rng(3)
    s1, s2 = spd(5, rng), spd(5, rng)
    _, grid, _ = abic_nu(s1, s2, penalty_grid(0.5, 8), 40, 40, 1)
    a = abic_scale(40, 40, 1)
    recomputed = a * grid.fit_terms + np.log(a) * grid.support_sizes
    np.testing.assert_array_equal(recomputed, grid.criterion_values)
    assert choose_index(recomputed) == grid.chosen_index


def test_abic_nu_rejects_bad_grid():
    s = np.eye(2)
    with pytest.raises(ValueError):
        abic_nu(s, s, [], 10, 10, 1)
    with pytest.raises(ValueError):
        abic_nu(s, s, [0.1, -0.1], 10, 10, 1)


def test_abic_nu_excludes_divergent(monkeypatch):
    from diffgc import selection
    from diffgc.exceptions import SolverDivergenceError

    real = selection.solve_delta_omega

    def flaky(problem, options=None, init=None):
        if problem.nu < 0.05:
            raise SolverDivergenceError("boom")
        return real(problem, options, init)

    monkeypatch.setattr(selection, "solve_delta_omega", flaky)
    rng = np.random.default_rng(4)
    nu, grid, ests = abic_nu(spd(3, rng), spd(3, rng), [0.2, 0.1, 0.01], 30, 30, 1)
    assert ests[2] is None and np.isinf(grid.criterion_values[2])
    assert nu in (0.2, 0.1)


def test_abic_nu_all_divergent(monkeypatch):
    from diffgc import selection
    from diffgc.exceptions import SolverDivergenceError

    def broken(problem, options=None, init=None):
        raise SolverDivergenceError("boom")

    monkeypatch.setattr(selection, "solve_delta_omega", broken)
    with pytest.raises(TuningError):
        abic_nu(np.eye(2), 2 * np.eye(2), [0.1], 10, 10, 1)


# --- lambda -------------------------------------------------------------------------------


def test_abic_lambda_zero_column():
    rng = np.random.default_rng(5)
    g = spd(3, rng)
    w = rng.standard_normal((3, 3))
    w[:, 1] = 0.0
    lams, grids = abic_lambda(g, w, [0.3, 0.1, 0.01], 50, 50, 1)
    assert lams[1] == 0.3
    np.testing.assert_array_equal(grids[1].criterion_values, 0.0)


def test_abic_lambda_hand_table():
    rng = np.random.default_rng(6)
    g = spd(3, rng)
    w = rng.standard_normal((3, 3))
    cands = [0.5, 0.05]
    a = abic_scale(30, 30, 1)
    lams, grids = abic_lambda(g, w, cands, 30, 30, 1)
    for j in range(3):
        table = []
        for lam in cands:
            beta = solve_column(g, w[:, j], lam).beta
            table.append(a * np.max(np.abs(g @ beta - w[:, j])) + np.log(a) * np.count_nonzero(beta))
        np.testing.assert_allclose(grids[j].criterion_values, table, rtol=1e-6, atol=1e-9)
        assert lams[j] == cands[int(np.argmin(table))]


def test_abic_lambda_column_permutation():
    rng = np.random.default_rng(7)
    g = spd(4, rng)
    w = rng.standard_normal((4, 4))
    perm = np.array([2, 0, 3, 1])
    grid = penalty_grid(2.0, 10)
    base, _ = abic_lambda(g, w, grid, 40, 40, 1)
    permuted, _ = abic_lambda(g, w[:, perm], grid, 40, 40, 1)
    np.testing.assert_array_equal(permuted, base[perm])


def test_abic_lambda_per_column_grids():
    rng = np.random.default_rng(8)
    g = spd(3, rng)
    w = rng.standard_normal((3, 3))
    cands = np.array([[1.0, 0.1], [2.0, 0.2], [3.0, 0.3]])
    _, grids = abic_lambda(g, w, cands, 30, 30, 1)
    assert [gr.values.tolist() for gr in grids] == cands.tolist()


# --- hard thresholding -------------------------------------------------------------------


def test_hard_threshold_zero_tau():
    m = np.array([[0.0, 1e-9], [-2.0, 0.0]])
    np.testing.assert_array_equal(hard_threshold(m, 0.0), m)


def test_hard_threshold_strict_boundary():
    np.testing.assert_array_equal(hard_threshold(np.array([0.04, -0.06, 0.05]), 0.05), [0, -0.06, 0])


def test_hard_threshold_idempotent():
    m = np.random.default_rng(9).standard_normal((5, 5))
    once = hard_threshold(m, 0.5)
    np.testing.assert_array_equal(hard_threshold(once, 0.5), once)


def test_hard_threshold_sign_recovery_implication():
    rng = np.random.default_rng(10)
    tau = 0.1
    for _ in range(50):
        truth = np.where(rng.random((6, 6)) < 0.3, rng.choice([-1, 1], (6, 6)) * rng.uniform(0.21, 1, (6, 6)), 0.0)
        est = truth + rng.uniform(-tau, tau, truth.shape)
        np.testing.assert_array_equal(np.sign(hard_threshold(est, tau)), np.sign(truth))


def test_hard_threshold_negative_tau():
    with pytest.raises(ValueError):
        hard_threshold(np.eye(2), -0.1)


# --- pipeline and stability -----------------------------------------------------------------


@pytest.fixture(scope="module")
def sim_panels():
    truth = gen_sim1(SimSpec("sim1", d=10, n=300), np.random.default_rng(0))
    return truth, sample_pair(truth, 300, 1)


def test_fit_direct_outputs(sim_panels):
    truth, (p1, p2) = sim_panels
    fit = fit_direct(p1, p2)
    assert fit.delta_a.delta.shape == (10, 10)
    assert fit.nu == fit.nu_grid.chosen
    assert np.all(np.abs(fit.delta_a_thresholded[fit.delta_a_thresholded != 0]) > 0.05)
    d = fit.to_dict()
    assert len(d["lambdas"]) == 10 and len(d["lambda_tuning"]) == 10
    # the estimate targets inv(S1) - inv(S2), agreeing in sign with the truth on its largest entries
    big = np.abs(truth.delta_omega_true) > 0.1
    if big.any():
        agree = np.mean(np.sign(fit.delta_omega.delta[big]) == np.sign(truth.delta_omega_true[big]))
        assert agree > 0.5


def test_identical_panels_no_edges(sim_panels):
    _, (p1, _) = sim_panels
    rep = stability_selection(p1, p1, stride=3, threshold=0.5)
    assert np.all(rep.m_plus == 0) and np.all(rep.m_minus == 0)
    assert rep.selected_edges == []


def test_stability_frequencies_bounded(sim_panels):
    _, (p1, p2) = sim_panels
    rep = stability_selection(p1, p2, stride=3, threshold=0.5)
    assert np.all(rep.m_plus + rep.m_minus <= 1.0)
    assert rep.n_subsamples == 3
    for r, c, sign in rep.selected_edges:
        freq = rep.m_plus[r, c] if sign > 0 else rep.m_minus[r, c]
        assert freq > 0.5


def test_stability_stride_one_is_full_fit(sim_panels):
    _, (p1, p2) = sim_panels
    rep = stability_selection(p1, p2, stride=1, threshold=0.5)
    est = fit_direct(p1, p2).delta_a_thresholded
    assert {(r, c) for r, c, _ in rep.selected_edges} == set(zip(*map(lambda a: a.tolist(), np.nonzero(est))))
    for r, c, s in rep.selected_edges:
        assert s == np.sign(est[r, c])


def test_subsample_lengths_long_panel():
    panel = TimeSeriesPanel(np.zeros((1, 8288)))
    lengths = {panel.subsample(10, i).n for i in range(10)}
    assert lengths == {829, 828}


def test_subsample_too_short_names_index():
    rng = np.random.default_rng(11)
    p1 = TimeSeriesPanel(rng.standard_normal((2, 25)))
    p2 = TimeSeriesPanel(rng.standard_normal((2, 25)))
    with pytest.raises(SubsampleError) as info:
        stability_selection(p1, p2, stride=10, config=PipelineConfig(p=1))
    assert info.value.index == 6
