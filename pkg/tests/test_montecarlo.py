import dataclasses

import numpy as np
import pytest

from oracles import least_squares_2tap
from sparse_lmsf import (
    ConfigError,
    EmptyTraceError,
    EstimatorConfig,
    EstimatorKind,
    ExperimentSpec,
    InvalidSpecError,
    MseTrace,
    NoiseSpec,
    SparseChannelSpec,
    convergence_iteration,
    run_experiment,
    run_trial,
    steady_state_mse,
    sweep,
)
from sparse_lmsf.montecarlo import stream_digest, trial_stream


@pytest.fixture
def small_spec():
    return ExperimentSpec(
        channel=SparseChannelSpec(32, 3),
        noise=NoiseSpec.from_snr(10.0),
        n_iterations=300,
        n_runs=11,
        base_seed=1234,
    )


def test_spec_defaults_follow_reference_setup():
    spec = ExperimentSpec()
    assert (spec.channel.n_taps, spec.channel.n_nonzero) == (128, 4)
    assert spec.noise.variance == pytest.approx(0.1)
    assert spec.labels == ["lmsf", "za", "rza", "rl1"]
    assert (spec.n_iterations, spec.n_runs) == (2000, 200)


@pytest.mark.parametrize("field, value", [("n_iterations", 0), ("n_runs", 0), ("base_seed", -1)])
def test_spec_rejects_bad_counts(field, value):
    with pytest.raises(InvalidSpecError):
        ExperimentSpec(**{field: value})


def test_spec_rejects_duplicate_labels():
    with pytest.raises(InvalidSpecError):
        ExperimentSpec(algorithms=[EstimatorConfig.default("za"), EstimatorConfig.default("za")])


def test_noiseless_identification_matches_least_squares():
    spec = ExperimentSpec(
        channel=SparseChannelSpec(2, 1),
        noise=NoiseSpec(0.0),
        algorithms=[EstimatorConfig(kind="lmsf", mu=0.5, phi=0.01)],
        n_iterations=5000,
        n_runs=1,
        base_seed=99,
    )
    trial = run_trial(spec, 0)
    w, symbols, noise = trial_stream(spec, 0)
    d = [w[0] * s + w[1] * p for s, p in zip(symbols, np.concatenate(([0.0], symbols[:-1])))]
    w_ls = least_squares_2tap(list(symbols), d)
    np.testing.assert_allclose(w_ls, w, atol=1e-10)
    assert trial.squared_error[0, -1] < 1e-4
    assert np.sum((trial.final_estimates[0] - w_ls) ** 2) < 1e-4


def test_trial_is_deterministic(small_spec):
    a, b = run_trial(small_spec, 4), run_trial(small_spec, 4)
    assert a.squared_error.tobytes() == b.squared_error.tobytes()
    assert a.stream_digest == b.stream_digest
    assert run_trial(small_spec, 5).stream_digest != a.stream_digest


def test_kernel_matches_reference_engine(small_spec):
    spec = dataclasses.replace(small_spec, n_iterations=200)
    fast = run_trial(spec, 2)
    slow = run_trial(spec, 2, engine="reference")
    np.testing.assert_allclose(fast.squared_error, slow.squared_error, rtol=1e-10)
    np.testing.assert_allclose(fast.final_estimates, slow.final_estimates, rtol=0, atol=1e-12)


def test_every_algorithm_sees_the_same_stream(small_spec):
    paired = run_trial(small_spec, 3)
    for a, cfg in enumerate(small_spec.algorithms):
        alone = run_trial(dataclasses.replace(small_spec, algorithms=[cfg]), 3)
        assert alone.stream_digest == paired.stream_digest
        assert alone.squared_error[0].tobytes() == paired.squared_error[a].tobytes()
    w, symbols, noise = trial_stream(small_spec, 3)
    assert stream_digest(w, symbols, noise) == paired.stream_digest


def test_k_sweep_keeps_symbols_and_snr_sweep_scales_noise(small_spec):
    _, sym_a, noise_a = trial_stream(small_spec, 0)
    _, sym_b, _ = trial_stream(small_spec.with_parameter("K", 7), 0)
    w_c, _, noise_c = trial_stream(small_spec.with_parameter("snr_db", 20.0), 0)
    assert np.array_equal(sym_a, sym_b)
    np.testing.assert_allclose(noise_c, noise_a * np.sqrt(0.1), rtol=1e-12)


def test_single_run_experiment_equals_trial(small_spec):
    spec = dataclasses.replace(small_spec, n_runs=1)
    result = run_experiment(spec, threads=1)
    trial = run_trial(spec, 0)
    for a, trace in enumerate(result.traces):
        assert trace.values.tobytes() == trial.squared_error[a].tobytes()
        assert trace.n_runs == 1


def test_mean_over_runs_is_order_independent(small_spec):
    result = run_experiment(small_spec, threads=1)
    rows = [run_trial(small_spec, r).squared_error for r in reversed(range(small_spec.n_runs))]
    np.testing.assert_allclose(result.traces[2].values, np.mean([r[2] for r in rows], axis=0),
                               rtol=1e-12)


def test_thread_count_does_not_change_output(small_spec):
    one = run_experiment(small_spec, threads=1)
    many = run_experiment(small_spec, threads=4)
    for a, b in zip(one.traces, many.traces):
        assert a.values.tobytes() == b.values.tobytes()
    assert one.zero_support_abs == many.zero_support_abs


def test_diverged_runs_are_excluded(small_spec):
    wild = EstimatorConfig(kind="lmsf", mu=50.0, phi=0.8)
    spec = dataclasses.replace(small_spec, algorithms=[wild])
    with pytest.raises(EmptyTraceError):
        run_experiment(spec, threads=1)
    trial = run_trial(spec, 0)
    assert trial.diverged_at[0] >= 0
    assert np.isnan(trial.squared_error[0, -1])


def test_partial_divergence_counts(small_spec):
    # mu on the stability edge: about half of these runs blow up
    spec = dataclasses.replace(
        small_spec, channel=SparseChannelSpec(4, 2),
        algorithms=[EstimatorConfig(kind="lmsf", mu=0.66, phi=0.05)], n_runs=40, n_iterations=1500,
    )
    trials = [run_trial(spec, r) for r in range(spec.n_runs)]
    n_bad = sum(bool(t.diverged[0]) for t in trials)
    assert 0 < n_bad < spec.n_runs
    result = run_experiment(spec, threads=1)
    assert result.traces[0].n_diverged == n_bad
    assert result.traces[0].n_runs == spec.n_runs - n_bad
    good = [t.squared_error[0] for t in trials if not t.diverged[0]]
    np.testing.assert_allclose(result.traces[0].values, np.mean(good, axis=0), rtol=1e-12)


def test_sweep_single_value_equals_experiment(small_spec):
    direct = run_experiment(small_spec, threads=1)
    swept = sweep(small_spec, "phi", [0.8], threads=1)
    for a, b in zip(direct.traces, swept.experiments[0].traces):
        assert a.values.tobytes() == b.values.tobytes()


def test_sweep_cells(small_spec):
    result = sweep(small_spec, "phi", [0.4, 0.8, 1.0], threads=1)
    assert len(result.cells) == 3 * 4
    assert [c.value for c in result.cells[:4]] == [0.4] * 4
    assert result.experiment(1.0).spec.algorithms[0].phi == 1.0


def test_sweep_over_k_and_snr(small_spec):
    result = sweep(small_spec, "K", [1, 5], threads=1)
    assert result.experiments[1].spec.channel.n_nonzero == 5
    result = sweep(small_spec, "snr_db", [5.0], threads=1)
    assert result.experiments[0].spec.noise.snr_db == 5.0


def test_sweep_rejects_unknown_parameter(small_spec):
    with pytest.raises(ConfigError):
        sweep(small_spec, "mu", [0.1])
    with pytest.raises(ConfigError):
        sweep(small_spec, "phi", [])


def test_steady_state_mse():
    assert steady_state_mse(np.full(40, 0.25)) == 0.25
    assert steady_state_mse(np.arange(1.0, 11.0)) == 10.0
    falling = np.linspace(1.0, 0.1, 50)
    assert steady_state_mse(falling) < falling.mean()
    assert steady_state_mse(MseTrace("x", np.arange(1.0, 101.0), 1)) == pytest.approx(95.5)
    with pytest.raises(InvalidSpecError):
        steady_state_mse(np.ones(9))


def test_convergence_iteration():
    trace = np.concatenate([np.linspace(1.0, 0.1, 91), np.full(909, 0.1)])
    assert convergence_iteration(trace) == int(np.flatnonzero(trace <= 0.2)[0])
    assert convergence_iteration(np.full(20, 3.0)) == 0


def test_mse_trace_validation():
    with pytest.raises(InvalidSpecError):
        MseTrace("bad", [0.1, -0.2], 1)
    with pytest.raises(InvalidSpecError):
        MseTrace("bad", [0.1, np.nan], 1)


def test_zero_support_statistic(small_spec):
    trial = run_trial(small_spec, 0)
    off = trial.channel == 0
    expected = np.abs(trial.final_estimates[:, off]).mean(axis=1)
    np.testing.assert_array_equal(trial.zero_support_abs(), expected)
    full = dataclasses.replace(small_spec, channel=SparseChannelSpec(4, 4))
    assert np.all(np.isnan(run_trial(full, 0).zero_support_abs()))


def test_estimator_kinds_cover_kernel():
    from sparse_lmsf import _kernel
    assert set(_kernel.KIND_CODES) == {k.value for k in EstimatorKind}
