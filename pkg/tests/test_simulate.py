import numpy as np
import pytest

from diffgc import _kernels
from diffgc.exceptions import UnstableModelError
from diffgc.simulate import (
    SimSpec,
    default_row_scale,
    flip_largest,
    gen_ir_instance,
    gen_sim1,
    gen_sim2,
    gen_sim3,
    kms_matrix,
    sample_pair,
    sample_var,
)
from diffgc.var_core import VarModel, estimate_moments, stationary_covariance


def rng(seed):
    return np.random.default_rng(seed)


# --- spec validation --------------------------------------------------------


@pytest.mark.parametrize("kw", [
    {"scenario": "sim9"},
    {"precision_density": 1.5},
    {"transition_range": (0.8, 0.5)},
    {"d": 0},
    {"flip_counting": "halves"},
])
def test_simspec_rejects(kw):
    base = {"scenario": "sim1", "d": 20, "n": 100}
    base.update(kw)
    with pytest.raises(ValueError):
        SimSpec(**base)


def test_row_scale_table():
    assert [default_row_scale(d) for d in (20, 50, 100)] == [3.0, 4.0, 5.0]


# --- flips ------------------------------------------------------------------


def test_flip_largest_asymmetric():
    m = np.array([[0.1, -0.9], [0.5, 0.0]])
    out, mask = flip_largest(m, 2, symmetric=False)
    np.testing.assert_array_equal(out, [[0.1, 0.9], [-0.5, 0.0]])
    assert mask.sum() == 2


def test_flip_largest_symmetric_entry_counting():
    m = np.array([[1.0, 0.3, 0.2], [0.3, 1.0, 0.1], [0.2, 0.1, 1.0]])
    out, mask = flip_largest(m, 4, symmetric=True)
    assert mask.sum() == 4
    assert out[0, 1] == out[1, 0] == -0.3
    assert out[0, 2] == out[2, 0] == -0.2
    assert np.all(np.diag(out) == 1.0)


def test_flip_largest_symmetric_pair_counting():
    m = np.array([[1.0, 0.3, 0.2], [0.3, 1.0, 0.1], [0.2, 0.1, 1.0]])
    _, mask = flip_largest(m, 2, symmetric=True, counting="pairs")
    assert mask.sum() == 4


# --- Simulation I -------------------------------------------------------------


def test_sim1_flip_count_d20():
    truth = gen_sim1(SimSpec("sim1", d=20, n=100), rng(0))
    assert np.count_nonzero(truth.omega_1 != truth.omega_2) == 8


def test_sim1_flip_count_pairs_convention():
    truth = gen_sim1(SimSpec("sim1", d=20, n=100, flip_counting="pairs"), rng(0))
    assert np.count_nonzero(truth.omega_1 != truth.omega_2) == 16


def test_sim1_flipped_entries_are_largest():
    truth = gen_sim1(SimSpec("sim1", d=20, n=100), rng(1))
    changed = truth.omega_1 != truth.omega_2
    off = ~np.eye(20, dtype=bool)
    smallest_changed = np.abs(truth.omega_1[changed]).min()
    largest_kept = np.abs(truth.omega_1[off & ~changed]).max()
    assert smallest_changed >= largest_kept
    np.testing.assert_array_equal(truth.omega_2[changed], -truth.omega_1[changed])
    np.testing.assert_array_equal(changed, changed.T)


def test_sim1_transition_norms():
    norms = []
    for seed in range(8):
        truth = gen_sim1(SimSpec("sim1", d=20, n=100), rng(seed))
        a1 = truth.model_1.transitions[0]
        assert np.linalg.norm(a1, 2) == pytest.approx(0.6, abs=1e-10)
        norms.append(np.linalg.norm(truth.model_2.transitions[0], 2))
    assert all(0.55 <= v <= 0.85 for v in norms)


def test_sim1_delta_a_exact_and_count():
    truth = gen_sim1(SimSpec("sim1", d=20, n=100), rng(2))
    a1, a2 = truth.model_1.transitions[0], truth.model_2.transitions[0]
    np.testing.assert_array_equal(truth.delta_a_true, a1 - a2)
    assert np.count_nonzero(truth.delta_a_true) == 10


def test_sim1_support_fraction_and_ranges():
    truth = gen_sim1(SimSpec("sim1", d=50, n=100), rng(3))
    off = ~np.eye(50, dtype=bool)
    # symmetrization averages two independent draws, so the union density is about 1 - 0.4^2
    frac = np.mean(truth.omega_1[off] != 0)
    assert 0.75 < frac < 0.92
    a = truth.model_1.transitions[0]
    assert 0.65 < np.mean(a != 0) < 0.75


@pytest.mark.parametrize("seed", range(3))
def test_sim1_lyapunov_identity(seed):
    truth = gen_sim1(SimSpec("sim1", d=20, n=100), rng(seed))
    for m in (truth.model_1, truth.model_2):
        a, s = m.transitions[0], m.stationary_cov
        np.testing.assert_allclose(s, a.T @ s @ a + m.noise_cov, atol=1e-8)
        assert np.linalg.eigvalsh(m.noise_cov).min() > 0


def test_sim1_delta_omega_matches_inverse_covariances():
    truth = gen_sim1(SimSpec("sim1", d=20, n=100), rng(4))
    s1 = truth.model_1.stationary_cov
    s2 = truth.model_2.stationary_cov
    np.testing.assert_allclose(np.linalg.inv(s1) - np.linalg.inv(s2), truth.delta_omega_true, atol=1e-10)


def test_sim1_same_seed_identical():
    a = gen_sim1(SimSpec("sim1", d=20, n=100), rng(11))
    b = gen_sim1(SimSpec("sim1", d=20, n=100), rng(11))
    np.testing.assert_array_equal(a.delta_a_true, b.delta_a_true)
    np.testing.assert_array_equal(a.model_1.noise_cov, b.model_1.noise_cov)
    pa = sample_pair(a, 50, 3)
    pb = sample_pair(b, 50, 3)
    np.testing.assert_array_equal(pa[0].data, pb[0].data)
    np.testing.assert_array_equal(pa[1].data, pb[1].data)


def test_sim1_seed_in_spec_used_without_rng():
    a = gen_sim1(SimSpec("sim1", d=20, n=100, seed=5))
    b = gen_sim1(SimSpec("sim1", d=20, n=100, seed=5))
    np.testing.assert_array_equal(a.omega_1, b.omega_1)


# --- Simulation II ------------------------------------------------------------


def test_sim2_structure():
    truth = gen_sim2(SimSpec("sim2", d=20, n=100), rng(0))
    assert truth.p == 2
    assert truth.model_1.is_stable() and truth.model_2.is_stable()
    for k in range(2):
        assert np.count_nonzero(truth.delta_a_lags[k]) == 20
        np.testing.assert_array_equal(
            truth.delta_a_lags[k], truth.model_1.transitions[k] - truth.model_2.transitions[k]
        )
    np.testing.assert_array_equal(truth.delta_a_true[:20, :20], truth.delta_a_lags[0])
    np.testing.assert_array_equal(truth.delta_a_true[20:, :20], truth.delta_a_lags[1])
    assert np.all(truth.delta_a_true[:, 20:] == 0)
    np.testing.assert_array_equal(truth.model_1.noise_cov, 0.1 * np.eye(20))


def test_sim2_value_ranges():
    truth = gen_sim2(SimSpec("sim2", d=20, n=100), rng(1))
    a1, a2 = (np.abs(m) for m in truth.model_1.transitions)
    assert np.all((a1 == 0) | ((a1 >= 0.5 / 5) & (a1 <= 0.8 / 5)))
    assert np.all((a2 == 0) | ((a2 >= 0.3 / 3) & (a2 <= 0.5 / 3)))


def test_sim2_stationary_cov_fixed_point():
    truth = gen_sim2(SimSpec("sim2", d=10, n=100), rng(2))
    m = truth.model_1
    np.testing.assert_allclose(m.stationary_cov, stationary_covariance(m), atol=1e-10)


# --- Simulation III -----------------------------------------------------------


def test_sim3_delta_omega():
    truth = gen_sim3(SimSpec("sim3", d=25, n=200), rng(0))
    nz = truth.delta_omega_true[truth.delta_omega_true != 0]
    assert nz.size == 20
    np.testing.assert_allclose(np.abs(nz), 0.8, atol=1e-12)
    assert np.abs(truth.delta_omega_true).sum() == pytest.approx(16.0)
    assert np.linalg.eigvalsh(truth.omega_2).min() > 0


def test_sim3_band_location():
    truth = gen_sim3(SimSpec("sim3", d=25, n=200), rng(0))
    r, c = np.nonzero(truth.delta_omega_true)
    assert np.all(np.abs(r - c) == 1)
    assert np.max(np.maximum(r, c)) + 1 == 11


def test_sim3_requires_d12():
    with pytest.raises(ValueError):
        gen_sim3(SimSpec("sim3", d=11, n=100), rng(0))


def test_kms():
    np.testing.assert_allclose(kms_matrix(3, 0.4), [[1, 0.4, 0.16], [0.4, 1, 0.4], [0.16, 0.4, 1]])


# --- IR instances -------------------------------------------------------------


def test_ir_instance_d10():
    s1, s2, sup = gen_ir_instance(10, 6, seed=0)
    omega = np.linalg.inv(s1)
    off = ~np.eye(10, dtype=bool)
    assert np.count_nonzero(np.abs(omega[off]) > 1e-9) == 18
    np.testing.assert_allclose(np.diag(omega), 10.0)
    vals = np.abs(omega[off][np.abs(omega[off]) > 1e-9])
    assert vals.min() >= 0.5 - 1e-9 and vals.max() <= 1.0 + 1e-9
    assert sup.sum() == 6
    assert np.linalg.eigvalsh(s1).min() > 0 and np.linalg.eigvalsh(s2).min() > 0
    np.testing.assert_allclose(np.linalg.inv(s2)[sup], -omega[sup], atol=1e-9)


def test_ir_instance_pairs_convention():
    _, _, sup = gen_ir_instance(10, 6, seed=0, flip_counting="pairs")
    assert sup.sum() == 12


def test_ir_instance_too_many_flips():
    with pytest.raises(ValueError):
        gen_ir_instance(4, 20, seed=0)


def test_ir_instance_odd_count_entries():
    with pytest.raises(ValueError):
        gen_ir_instance(10, 5, seed=0)


# --- sampling -----------------------------------------------------------------


def test_zero_noise_gives_zero_path():
    # the model type insists on a positive-definite noise covariance, so the
    # degenerate case is exercised at the recursion kernel
    a = np.array([[[0.5, 0.1], [0.0, 0.3]]])
    x = _kernels.var_recursion(a, np.zeros((50, 2)))
    assert np.all(x == 0)


def test_ar1_stationary_variance():
    panel = sample_var(VarModel([[[0.5]]], [[1.0]]), 200_000, seed=1)
    assert np.var(panel.data) == pytest.approx(4.0 / 3.0, rel=0.05)


def test_sample_lag_moment_d5():
    rs = rng(2)
    a = rs.standard_normal((5, 5))
    a *= 0.5 / np.max(np.abs(np.linalg.eigvals(a)))
    model = VarModel([a], np.eye(5))
    sigma = stationary_covariance(model)
    m = estimate_moments(sample_var(model, 100_000, seed=3), 1)
    assert np.linalg.norm(m.theta_hat - sigma @ a) / np.linalg.norm(sigma @ a) < 0.05


def test_sample_var_deterministic():
    model = VarModel([np.eye(3) * 0.4], np.eye(3))
    np.testing.assert_array_equal(sample_var(model, 30, seed=4).data, sample_var(model, 30, seed=4).data)


def test_sample_var_refuses_unstable():
    with pytest.raises(UnstableModelError):
        sample_var(VarModel([np.eye(2)], np.eye(2)), 10, seed=0)


def test_sample_pair_labels_and_independence():
    truth = gen_sim1(SimSpec("sim1", d=20, n=100), rng(0))
    p1, p2 = sample_pair(truth, 40, 0)
    assert (p1.condition_label, p2.condition_label) == (1, 2)
    assert p1.data.shape == (20, 40)
    assert not np.allclose(p1.data, p2.data)


def test_sample_pair_seed_sequence_reuse_is_pure():
    truth = gen_sim1(SimSpec("sim1", d=20, n=100), rng(0))
    ss = np.random.SeedSequence(42)
    a = sample_pair(truth, 20, ss)
    b = sample_pair(truth, 20, ss)
    np.testing.assert_array_equal(a[0].data, b[0].data)
