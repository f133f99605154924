from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from checkpoint_store import save_checkpoint
from config import debug, max_workers
from data_loader import is_one_hot, subsample
from diagnostics import constraint_gap, objective, predict, upper_bound_objective
from errors import DivergenceError, NumericOverflowError, TargetEncodingError
from learning_rules import apply_step, offline_bmvr_step
from metric_log import aggregate, write_csv
from models import (Dataset, MetricLog, MetricRecord, ModelState, Nonlinearity,
                    RunResult, RunSpec, TrainConfig, Variant)
from network_factory import new_model, rates_at
from rrr_oracle import accumulate_stats

DIVERGENCE_FACTOR = 10.0
DIVERGENCE_STRIKES = 3


def run_seeds(seed: int, repeats: int) -> List[int]:
    """Independent 64-bit seeds for each repeat, spawned from the config seed."""
    children = np.random.SeedSequence(seed).spawn(repeats)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


class TrainingHarness:
    """Runs training specs: sampling, rule application, evaluation and logging"""

    def accuracy(self, state: ModelState, data: Dataset,
                 nonlinearity: Nonlinearity = Nonlinearity.LINEAR) -> float:
        """
        Fraction of samples whose argmax prediction matches the one-hot
        target. Ties go to the lowest index.
        """
        if not is_one_hot(data.Y):
            raise TargetEncodingError(f"{data.name}: accuracy needs one-hot target columns")
        predicted = np.argmax(predict(state, data.X, nonlinearity), axis=0)
        return float(np.mean(predicted == np.argmax(data.Y, axis=0)))

    def evaluate(self, state: ModelState, step: int, config: TrainConfig,
                 train: Dataset, eval_data: Dataset) -> MetricRecord:
        nonlinearity = config.nonlinearity
        values = {
            "objective": objective(state, eval_data, nonlinearity),
            "upper_bound_objective": upper_bound_objective(state, eval_data, nonlinearity),
            "constraint_gap": constraint_gap(state, eval_data, nonlinearity),
        }
        for name, value in values.items():
            if not np.isfinite(value):
                raise NumericOverflowError(name, step)
        return MetricRecord(
            step=step,
            train_accuracy=self.accuracy(state, train, nonlinearity) if is_one_hot(train.Y) else None,
            test_accuracy=self.accuracy(state, eval_data, nonlinearity) if is_one_hot(eval_data.Y) else None,
            **values,
        )

    def _single_run(self, spec: RunSpec, run_seed: int) -> Tuple[List[MetricRecord], ModelState]:
        config, train = spec.config, spec.train
        eval_data = spec.eval
        if spec.eval_subsample:
            eval_data = subsample(eval_data, spec.eval_subsample, run_seed)

        state = new_model(train.m, train.n, config.k, config.init, seed=run_seed)
        sampler = np.random.default_rng([run_seed, 1])
        stats = accumulate_stats(train) if config.variant == Variant.BMVR_OFFLINE else None

        records = [self.evaluate(state, 0, config, train, eval_data)]
        threshold = DIVERGENCE_FACTOR * max(records[0].objective, 1e-12)
        strikes = 0
        last_good_state, last_good_step = state, 0

        for t in range(config.steps):
            rates = rates_at(config, t)
            try:
                if stats is not None:
                    state = offline_bmvr_step(state, stats, rates, config.tau, step=t)
                else:
                    sample = train.sample(int(sampler.integers(train.T)))
                    state = apply_step(state, sample, config, rates, step=t)
            except NumericOverflowError as e:
                raise DivergenceError(t, str(e), last_good_state, last_good_step) from e

            done = t + 1
            if done % spec.eval_every and done != config.steps:
                continue
            try:
                record = self.evaluate(state, done, config, train, eval_data)
            except NumericOverflowError as e:
                raise DivergenceError(done, str(e), last_good_state, last_good_step) from e
            records.append(record)
            debug(f"{spec.label or config.variant.value} seed={run_seed} step={done} objective={record.objective:.6g}")

            if record.objective > threshold:
                strikes += 1
                print(f"WARNING: objective {record.objective:.4g} exceeds {DIVERGENCE_FACTOR:g}x "
                      f"its initial value at step {done} ({strikes}/{DIVERGENCE_STRIKES})")
                if strikes >= DIVERGENCE_STRIKES:
                    raise DivergenceError(
                        done, f"objective above {DIVERGENCE_FACTOR:g}x initial for "
                              f"{DIVERGENCE_STRIKES} evaluations",
                        last_good_state, last_good_step,
                    )
            else:
                strikes = 0
                last_good_state, last_good_step = state, done

        return records, state

    def run_detailed(self, spec: RunSpec) -> RunResult:
        """
        Execute every repeat of a spec.

        Repeats run concurrently on a thread pool; each owns its model,
        sampler and evaluation subset. Results are merged in seed order,
        so the log does not depend on scheduling.
        When a repeat diverges, its last good state is written to
        checkpoint_path (if set) before the error propagates.
        """
        seeds = run_seeds(spec.config.seed, spec.repeats)
        label = spec.label or spec.config.variant.value
        debug(f"{label}: {spec.repeats} repeat(s) x {spec.config.steps} steps on {spec.train.name}")

        workers = min(max_workers(spec.repeats), spec.repeats)
        try:
            if workers == 1:
                outcomes = [self._single_run(spec, seed) for seed in seeds]
            else:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    outcomes = list(pool.map(lambda seed: self._single_run(spec, seed), seeds))
        except DivergenceError as e:
            if spec.checkpoint_path and e.last_good_state is not None:
                save_checkpoint(e.last_good_state, spec.checkpoint_path)
                e.checkpoint_path = str(spec.checkpoint_path)
                print(f"WARNING: saved the step-{e.last_good_step} state to {spec.checkpoint_path}")
            raise

        log = aggregate([records for records, _ in outcomes], label=label)
        final_states = [state for _, state in outcomes]
        if spec.log_path:
            write_csv(log, spec.log_path)
            debug(f"wrote {spec.log_path}")
        if spec.checkpoint_path:
            save_checkpoint(final_states[0], spec.checkpoint_path)
            debug(f"wrote {spec.checkpoint_path}")
        return RunResult(log=log, final_states=final_states)

    def run(self, spec: RunSpec) -> MetricLog:
        return self.run_detailed(spec).log

    def compare(self, spec_bmvr: RunSpec, spec_backprop: RunSpec,
                label_bmvr: Optional[str] = None,
                label_backprop: Optional[str] = None) -> Tuple[MetricLog, MetricLog]:
        """Run both variants; matching seeds give them the same initial weights and sample order."""
        if spec_bmvr.config.seed != spec_backprop.config.seed:
            print("WARNING: compare called with different seeds; curves will not share initial weights")
        bmvr = spec_bmvr.model_copy(update={"label": label_bmvr or spec_bmvr.label or spec_bmvr.config.variant.value})
        backprop = spec_backprop.model_copy(
            update={"label": label_backprop or spec_backprop.label or spec_backprop.config.variant.value}
        )
        return self.run(bmvr), self.run(backprop)
