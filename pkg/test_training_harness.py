"""
Tests for the training harness.

The longest experiments only run when BMVR_RUN_ACCEPTANCE=1 (synthetic)
or when BMVR_DATA_DIR holds MNIST files.
"""
import os

import numpy as np
import pytest

from checkpoint_store import load_checkpoint
from data_loader import mnist_files, mnist_protocol, one_hot, synth_linear
from diagnostics import teaching_signal_report
from errors import DivergenceError, TargetEncodingError
from models import Dataset, ModelState, Nonlinearity, RunSpec, ScheduleSpec, TrainConfig, Variant
from presets import preset_config
from rrr_oracle import accumulate_stats, check_saturation, solve_rrr
from training_harness import TrainingHarness, run_seeds

RUN_ACCEPTANCE = os.getenv("BMVR_RUN_ACCEPTANCE") == "1"


@pytest.fixture(scope="module")
def synth():
    return synth_linear(20, 10, 4, 2000, 0.1, seed=1)


@pytest.fixture(scope="module")
def oracle_loss(synth):
    return solve_rrr(accumulate_stats(synth), 4).optimal_loss


def spec_for(data, variant=Variant.BMVR, steps=20000, repeats=1, eval_every=1000, **overrides):
    seed = overrides.pop("seed", 0)
    config = preset_config("default-synth", variant, seed=seed, steps=steps, **overrides)
    return RunSpec(config=config, train=data, eval=data, eval_every=eval_every, repeats=repeats)


def smoothed(values, window):
    return np.convolve(values, np.ones(window) / window, mode="valid")


def test_run_seeds_are_reproducible_and_distinct():
    assert run_seeds(3, 4) == run_seeds(3, 4)
    assert len(set(run_seeds(3, 4))) == 4


def test_zero_steps_logs_initial_model_only(synth):
    log = TrainingHarness().run(spec_for(synth, steps=0))
    assert [row.step for row in log.rows] == [0]
    assert log.rows[0].objective_std == 0.0
    assert log.rows[0].train_acc_mean is None


def test_identical_specs_give_identical_logs(synth):
    harness = TrainingHarness()
    spec = spec_for(synth, steps=3000, repeats=2, eval_every=500)
    assert harness.run(spec).rows == harness.run(spec).rows


def test_repeats_are_aggregated(synth):
    log = TrainingHarness().run(spec_for(synth, steps=200, repeats=5, eval_every=100))
    assert len(log.runs) == 5
    assert [row.step for row in log.rows] == [0, 100, 200]
    first = [run[0].objective for run in log.runs]
    assert log.rows[0].objective_mean == pytest.approx(np.mean(first))
    assert log.rows[0].objective_std == pytest.approx(np.std(first))
    assert log.rows[0].objective_std > 0


def test_final_step_is_always_evaluated(synth):
    log = TrainingHarness().run(spec_for(synth, steps=250, eval_every=100))
    assert [row.step for row in log.rows] == [0, 100, 200, 250]


def test_compare_shares_initial_weights(synth):
    bmvr, backprop = TrainingHarness().compare(
        spec_for(synth, Variant.BMVR, steps=100, eval_every=50),
        spec_for(synth, Variant.BACKPROP, steps=100, eval_every=50),
    )
    assert bmvr.label == "bmvr" and backprop.label == "backprop"
    assert bmvr.rows[0].objective_mean == backprop.rows[0].objective_mean
    assert bmvr.rows[-1].objective_mean != backprop.rows[-1].objective_mean


def test_checkpoint_and_log_written(tmp_path, synth):
    spec = spec_for(synth, steps=100, eval_every=50).model_copy(update={
        "log_path": str(tmp_path / "run.csv"),
        "checkpoint_path": str(tmp_path / "model.bmvr"),
    })
    result = TrainingHarness().run_detailed(spec)
    restored = load_checkpoint(tmp_path / "model.bmvr")
    np.testing.assert_array_equal(restored.W1, result.final_states[0].W1)
    header = (tmp_path / "run.csv").read_text().splitlines()[0]
    assert header == "step,objective_mean,objective_std,upper_bound_mean,constraint_gap_mean,train_acc_mean,test_acc_mean"


def test_divergence_is_reported_with_last_good_step(synth):
    config = TrainConfig(eta_w1=ScheduleSpec(eta0=5.0), eta_w2=ScheduleSpec(eta0=5.0),
                         variant=Variant.BACKPROP, steps=2000, k=4)
    spec = RunSpec(config=config, train=synth, eval=synth, eval_every=10)
    with pytest.raises(DivergenceError) as info:
        TrainingHarness().run(spec)
    assert info.value.step <= 2000
    assert info.value.last_good_step is not None
    assert isinstance(info.value.last_good_state, ModelState)


def test_divergence_saves_the_last_good_checkpoint(tmp_path, synth):
    config = TrainConfig(eta_w1=ScheduleSpec(eta0=5.0), eta_w2=ScheduleSpec(eta0=5.0),
                         variant=Variant.BACKPROP, steps=2000, k=4)
    path = tmp_path / "model.bmvr"
    spec = RunSpec(config=config, train=synth, eval=synth, eval_every=10, checkpoint_path=str(path))
    with pytest.raises(DivergenceError) as info:
        TrainingHarness().run(spec)
    assert info.value.checkpoint_path == str(path)
    restored = load_checkpoint(path)
    np.testing.assert_array_equal(restored.W1, info.value.last_good_state.W1)
    np.testing.assert_array_equal(restored.W2, info.value.last_good_state.W2)


@pytest.fixture(scope="module")
def matched_runs(synth):
    harness = TrainingHarness()
    return {
        variant: harness.run_detailed(spec_for(synth, variant, repeats=5, eval_every=100))
        for variant in (Variant.BMVR, Variant.BACKPROP)
    }


def test_both_variants_reach_the_oracle(matched_runs, oracle_loss):
    for result in matched_runs.values():
        initial = result.log.rows[0].objective_mean
        assert abs(result.log.rows[-1].objective_mean - oracle_loss) / oracle_loss < 0.02
        for run in result.log.runs:
            assert run[-1].step == 20000
            assert abs(run[-1].objective - oracle_loss) / oracle_loss < 0.02
        assert result.log.rows[-1].objective_mean < 0.05 * initial


def test_bmvr_trains_above_backprop_after_warm_up(matched_runs):
    bmvr = smoothed([row.objective_mean for row in matched_runs[Variant.BMVR].log.rows], 5)
    backprop = smoothed([row.objective_mean for row in matched_runs[Variant.BACKPROP].log.rows], 5)
    warm_up = len(bmvr) // 10
    assert np.all(bmvr[warm_up:] >= backprop[warm_up:])


def test_smoothed_objective_keeps_falling_after_the_first_tenth(matched_runs, oracle_loss):
    # window of 5 evaluations = 500 steps; rises above 1% of the optimum count as noise
    for result in matched_runs.values():
        for run in result.log.runs:
            curve = smoothed([record.objective for record in run], 5)
            rises = np.diff(curve)[len(run) // 10:]
            assert rises.max() <= 0.01 * oracle_loss


def test_continued_bmvr_run_saturates_and_matches_backprop_error(synth):
    # the 20k-step run above is a prefix of this one
    result = TrainingHarness().run_detailed(spec_for(synth, steps=400000, eval_every=400000))
    state = result.final_states[0]
    gap, q_min_sv = check_saturation(state, accumulate_stats(synth))
    assert gap < 0.05
    assert q_min_sv > 0.01
    assert teaching_signal_report(state, synth).mean_rel_err < 0.05


def test_offline_variant_reduces_objective(synth):
    config = TrainConfig(eta_w1=ScheduleSpec(eta0=0.05), eta_w2=ScheduleSpec(eta0=0.05),
                         eta_q=ScheduleSpec(eta0=0.05), variant=Variant.BMVR_OFFLINE,
                         steps=2000, k=4)
    log = TrainingHarness().run(RunSpec(config=config, train=synth, eval=synth, eval_every=500))
    assert log.rows[-1].objective_mean < log.rows[0].objective_mean


def test_decoupled_variant_runs(synth):
    config = TrainConfig(eta_w1=ScheduleSpec(eta0=0.01, t0=2000), eta_w2=ScheduleSpec(eta0=0.01, t0=2000),
                         eta_q=ScheduleSpec(eta0=0.02, t0=2000), variant=Variant.BMVR_DECOUPLED,
                         steps=500, k=4)
    log = TrainingHarness().run(RunSpec(config=config, train=synth, eval=synth, eval_every=250))
    assert len(log.rows) == 3


def test_relu_network_logs_accuracy():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 3, size=300)
    X = one_hot(labels, 3) + 0.1 * rng.standard_normal((3, 300))
    data = Dataset(name="blobs", X=X, Y=one_hot(labels, 3))
    config = TrainConfig(eta_w1=ScheduleSpec(eta0=0.02), eta_w2=ScheduleSpec(eta0=0.02),
                         eta_q=ScheduleSpec(eta0=0.02), nonlinearity=Nonlinearity.RELU,
                         steps=200, k=4)
    log = TrainingHarness().run(RunSpec(config=config, train=data, eval=data, eval_every=100))
    assert all(0.0 <= row.test_acc_mean <= 1.0 for row in log.rows)
    assert all(row.train_acc_mean is not None for row in log.rows)


# ---------------------------------------------------------------------------
# accuracy
# ---------------------------------------------------------------------------

def test_accuracy_identity_model():
    labels = np.array([0, 1, 2, 1, 0])
    data = Dataset(name="toy", X=one_hot(labels, 3) * 2.0, Y=one_hot(labels, 3))
    state = ModelState(W1=np.eye(3), W2=np.eye(3), Q=np.eye(3))
    assert TrainingHarness().accuracy(state, data) == 1.0


def test_accuracy_ties_go_to_class_zero():
    labels = np.array([0, 1, 2, 0, 1, 0])
    data = Dataset(name="toy", X=np.ones((3, 6)), Y=one_hot(labels, 3))
    state = ModelState(W1=np.eye(3), W2=np.zeros((3, 3)), Q=np.eye(3))
    assert TrainingHarness().accuracy(state, data) == pytest.approx(3 / 6)


def test_accuracy_requires_one_hot_targets(synth):
    state = ModelState(W1=np.zeros((4, 20)), W2=np.zeros((10, 4)), Q=np.eye(4))
    with pytest.raises(TargetEncodingError):
        TrainingHarness().accuracy(state, synth)


# ---------------------------------------------------------------------------
# full-strength experiments
# ---------------------------------------------------------------------------

@pytest.mark.skipif(not RUN_ACCEPTANCE, reason="set BMVR_RUN_ACCEPTANCE=1")
def test_acceptance_every_repeat_saturates_when_continued(synth, oracle_loss):
    stats = accumulate_stats(synth)
    result = TrainingHarness().run_detailed(spec_for(synth, steps=600000, repeats=5, eval_every=100000))
    assert abs(result.log.rows[-1].objective_mean - oracle_loss) / oracle_loss < 0.002
    for state in result.final_states:
        gap, q_min_sv = check_saturation(state, stats)
        assert gap < 0.05
        assert q_min_sv > 0.01
        assert teaching_signal_report(state, synth).mean_rel_err < 0.05


@pytest.mark.skipif(not RUN_ACCEPTANCE, reason="set BMVR_RUN_ACCEPTANCE=1")
def test_acceptance_offline_descent_ascent_reaches_optimum(synth, oracle_loss):
    config = TrainConfig(eta_w1=ScheduleSpec(eta0=0.05), eta_w2=ScheduleSpec(eta0=0.01),
                         eta_q=ScheduleSpec(eta0=0.05), variant=Variant.BMVR_OFFLINE,
                         steps=200000, k=4)
    result = TrainingHarness().run_detailed(RunSpec(config=config, train=synth, eval=synth, eval_every=10000))
    state = result.final_states[0]
    assert abs(result.log.rows[-1].objective_mean - oracle_loss) / oracle_loss < 0.02
    assert result.log.rows[-1].upper_bound_mean == pytest.approx(result.log.rows[-1].objective_mean, rel=0.02)
    assert teaching_signal_report(state, synth).mean_rel_err < 0.05


def _mnist_dir():
    root = os.getenv("BMVR_DATA_DIR")
    if not root:
        return None
    try:
        mnist_files(root, "mnist", "t10k")
        mnist_files(root, "mnist", "train")
    except OSError:
        return None
    return root


@pytest.mark.skipif(_mnist_dir() is None, reason="MNIST files not found under BMVR_DATA_DIR")
@pytest.mark.parametrize("variant, expected", [(Variant.BMVR, 0.936), (Variant.BACKPROP, 0.940)])
def test_acceptance_mnist_relu_k64(variant, expected):
    train, test = mnist_protocol(_mnist_dir(), "mnist", "50k")
    config = preset_config("relu-mnist-k64", variant, seed=0)
    spec = RunSpec(config=config, train=train, eval=test, eval_every=config.steps, eval_subsample=None)
    final = TrainingHarness().run(spec).rows[-1]
    assert abs(final.test_acc_mean - expected) < 0.015
    assert final.train_acc_mean >= 0.98
