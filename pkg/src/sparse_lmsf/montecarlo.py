"""
Monte-Carlo MSE harness
=======================

Runs independent seeded trials of every configured estimator against a
shared random sparse channel and training stream, then averages the squared
deviation ``||w - w_est(k)||^2`` across runs.

Each run draws from its own generator, derived from ``(base_seed,
run_index)`` through :class:`numpy.random.SeedSequence` spawn keys, and
splits it into independent child streams for the channel, the training
symbols and the noise. Changing K therefore leaves the symbols untouched, and
changing the SNR only rescales the same unit-variance noise draw.

Runs are summed in fixed blocks of ``BLOCK_SIZE`` consecutive indices and the
block sums are added in index order, so results do not depend on the number
of worker threads.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernel
from .errors import ConfigError, DivergenceError, EmptyTraceError, InvalidSpecError
from .estimators import EstimatorConfig, EstimatorKind, EstimatorState, step
from .sparse_channel import NoiseSpec, SparseChannelSpec, generate_channel, generate_training_sequence

BLOCK_SIZE = 8
SWEEP_PARAMETERS = ("phi", "K", "snr_db")


@dataclass(frozen=True)
class ExperimentSpec:
    channel: SparseChannelSpec = field(default_factory=SparseChannelSpec)
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec.from_snr(10.0))
    algorithms: Tuple[EstimatorConfig, ...] = field(
        default_factory=lambda: tuple(EstimatorConfig.default(k) for k in EstimatorKind)
    )
    n_iterations: int = 2000
    n_runs: int = 200
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not self.algorithms:
            raise InvalidSpecError("at least one algorithm is required")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise InvalidSpecError(f"duplicate algorithm labels: {labels}")
        if int(self.n_iterations) != self.n_iterations or self.n_iterations < 1:
            raise InvalidSpecError(f"n_iterations must be >= 1, got {self.n_iterations}")
        if int(self.n_runs) != self.n_runs or self.n_runs < 1:
            raise InvalidSpecError(f"n_runs must be >= 1, got {self.n_runs}")
        if not 0 <= self.base_seed < 2 ** 64:
            raise InvalidSpecError(f"base_seed must fit in 64 unsigned bits, got {self.base_seed}")

    @property
    def labels(self) -> List[str]:
        return [a.label for a in self.algorithms]

    def with_parameter(self, name: str, value) -> "ExperimentSpec":
        """Copy with one sweepable parameter changed (``phi``, ``K`` or ``snr_db``)."""
        if name == "phi":
            algos = tuple(dataclasses.replace(a, phi=float(value)) for a in self.algorithms)
            return dataclasses.replace(self, algorithms=algos)
        if name == "K":
            if int(value) != value:
                raise InvalidSpecError(f"K must be an integer, got {value}")
            channel = dataclasses.replace(self.channel, n_nonzero=int(value))
            return dataclasses.replace(self, channel=channel)
        if name == "snr_db":
            return dataclasses.replace(self, noise=NoiseSpec.from_snr(float(value), self.noise.es))
        raise ConfigError("parameter", f"cannot sweep {name!r}; choose one of {SWEEP_PARAMETERS}")

    def to_dict(self) -> dict:
        return {
            "n_taps": self.channel.n_taps,
            "n_nonzero": self.channel.n_nonzero,
            "tap_variance": self.channel.variance,
            "snr_db": self.noise.snr_db,
            "sigma_n": self.noise.sigma_n,
            "es": self.noise.es,
            "algorithms": [dataclasses.asdict(a) | {"kind": a.label, "rho": a.rho}
                           for a in self.algorithms],
            "n_iterations": self.n_iterations,
            "n_runs": self.n_runs,
            "base_seed": self.base_seed,
        }


@dataclass
class TrialResult:
    """Raw output of one run: one row per algorithm, in ``labels`` order.

    ``diverged_at[a]`` is the iteration at which algorithm ``a`` produced a
    non-finite tap, or -1. Rows of diverged algorithms are NaN from there on.
    """

    run_index: int
    labels: List[str]
    channel: np.ndarray
    squared_error: np.ndarray
    diverged_at: np.ndarray
    final_estimates: np.ndarray
    stream_digest: str

    @property
    def diverged(self) -> np.ndarray:
        return self.diverged_at >= 0

    def zero_support_abs(self) -> np.ndarray:
        """Mean ``|w_est_i|`` over taps where the true channel is zero."""
        off = self.channel == 0
        if not off.any():
            return np.full(len(self.labels), np.nan)
        return np.abs(self.final_estimates[:, off]).mean(axis=1)


@dataclass
class MseTrace:
    label: str
    values: np.ndarray
    n_runs: int
    n_diverged: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise InvalidSpecError("an MSE trace is a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise InvalidSpecError(f"trace {self.label} has negative or non-finite values")

    def __len__(self):
        return self.values.size


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    traces: List[MseTrace]
    zero_support_abs: Dict[str, float]

    @property
    def diverged(self) -> Dict[str, int]:
        return {t.label: t.n_diverged for t in self.traces}

    def trace(self, label: str) -> MseTrace:
        for t in self.traces:
            if t.label == label:
                return t
        raise KeyError(label)

    def steady_state(self) -> Dict[str, float]:
        return {t.label: steady_state_mse(t) for t in self.traces}


@dataclass
class SweepCell:
    value: float
    label: str
    trace: MseTrace
    steady_state: float


@dataclass
class SweepResult:
    parameter: str
    values: List[float]
    experiments: List[ExperimentResult]

    @property
    def cells(self) -> List[SweepCell]:
        return [
            SweepCell(value, t.label, t, steady_state_mse(t))
            for value, result in zip(self.values, self.experiments)
            for t in result.traces
        ]

    def experiment(self, value) -> ExperimentResult:
        return self.experiments[self.values.index(value)]


def _run_streams(spec: ExperimentSpec, run_index: int):
    if run_index < 0:
        raise InvalidSpecError(f"run_index must be nonnegative, got {run_index}")
    root = np.random.SeedSequence(spec.base_seed, spawn_key=(run_index,))
    channel_ss, symbol_ss, noise_ss = root.spawn(3)
    w = generate_channel(spec.channel, np.random.default_rng(channel_ss))
    symbols = generate_training_sequence(np.random.default_rng(symbol_ss), spec.n_iterations)
    noise = spec.noise.sigma_n * np.random.default_rng(noise_ss).standard_normal(spec.n_iterations)
    return w, symbols, noise


def trial_stream(spec: ExperimentSpec, run_index: int):
    """The ``(channel, symbols, noise)`` realisation shared by every algorithm in a run."""
    return _run_streams(spec, run_index)


def stream_digest(w, symbols, noise) -> str:
    h = hashlib.sha256()
    for arr in (w, symbols, noise):
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return h.hexdigest()


def _simulate_reference(spec, w, symbols, noise):
    n_algo, n_iter = len(spec.algorithms), spec.n_iterations
    sq_err = np.full((n_algo, n_iter), np.nan)
    diverged_at = np.full(n_algo, -1)
    finals = np.full((n_algo, w.size), np.nan)
    for a, cfg in enumerate(spec.algorithms):
        state = EstimatorState.zeros(w.size)
        x = np.zeros(w.size)
        try:
            for k in range(n_iter):
                x = np.concatenate(([symbols[k]], x[:-1]))
                d = float(np.dot(w, x)) + noise[k]
                state = step(state, x, d, cfg)
                sq_err[a, k] = float(np.sum((w - state.w_curr) ** 2))
        except DivergenceError as exc:
            diverged_at[a] = exc.iteration
        finals[a] = state.w_curr
    return sq_err, diverged_at, finals


def _algorithm_arrays(spec: ExperimentSpec):
    algos = spec.algorithms
    return (
        np.array([_kernel.KIND_CODES[a.label] for a in algos], dtype=np.int64),
        np.array([a.mu for a in algos]),
        np.array([a.phi for a in algos]),
        np.array([a.rho for a in algos]),
        np.array([a.epsilon for a in algos]),
        np.array([a.delta for a in algos]),
    )


def run_trial(spec: ExperimentSpec, run_index: int, engine: str = "kernel") -> TrialResult:
    """Run every algorithm of ``spec`` over the realisation of run ``run_index``.

    ``engine="reference"`` steps through :func:`~sparse_lmsf.estimators.step`
    instead of the compiled loop; it is slow and meant for cross-checking.
    """
    w, symbols, noise = _run_streams(spec, run_index)
    if engine == "kernel":
        sq_err, diverged_at, finals = _kernel.simulate(w, symbols, noise, *_algorithm_arrays(spec))
    elif engine == "reference":
        sq_err, diverged_at, finals = _simulate_reference(spec, w, symbols, noise)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return TrialResult(
        run_index=run_index,
        labels=spec.labels,
        channel=w,
        squared_error=sq_err,
        diverged_at=np.asarray(diverged_at),
        final_estimates=finals,
        stream_digest=stream_digest(w, symbols, noise),
    )


def _run_block(spec: ExperimentSpec, run_indices: Sequence[int]):
    n_algo = len(spec.algorithms)
    total = np.zeros((n_algo, spec.n_iterations))
    zero_abs = np.zeros(n_algo)
    zero_count = np.zeros(n_algo, dtype=np.int64)
    ok = np.zeros(n_algo, dtype=np.int64)
    for r in run_indices:
        trial = run_trial(spec, r)
        zs = trial.zero_support_abs()
        for a in range(n_algo):
            if trial.diverged_at[a] >= 0:
                continue
            total[a] += trial.squared_error[a]
            ok[a] += 1
            if not math.isnan(zs[a]):
                zero_abs[a] += zs[a]
                zero_count[a] += 1
    return total, ok, zero_abs, zero_count


def run_experiment(spec: ExperimentSpec, threads: Optional[int] = None) -> ExperimentResult:
    """Average per-iteration squared error over all non-diverged runs.

    Output is identical for every ``threads`` value (default: CPU count).

    Raises
    ------
    EmptyTraceError
        If every run diverged for some algorithm.
    """
    threads = threads or os.cpu_count() or 1
    blocks = [range(s, min(s + BLOCK_SIZE, spec.n_runs)) for s in range(0, spec.n_runs, BLOCK_SIZE)]
    if threads == 1 or len(blocks) == 1:
        partials = [_run_block(spec, b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(lambda b: _run_block(spec, b), blocks))

    n_algo = len(spec.algorithms)
    total = np.zeros((n_algo, spec.n_iterations))
    ok = np.zeros(n_algo, dtype=np.int64)
    zero_abs = np.zeros(n_algo)
    zero_count = np.zeros(n_algo, dtype=np.int64)
    for block_total, block_ok, block_zero, block_zero_count in partials:
        total += block_total
        ok += block_ok
        zero_abs += block_zero
        zero_count += block_zero_count

    traces = []
    zero_support = {}
    for a, label in enumerate(spec.labels):
        if ok[a] == 0:
            raise EmptyTraceError(label)
        traces.append(MseTrace(label, total[a] / ok[a], int(ok[a]), int(spec.n_runs - ok[a])))
        zero_support[label] = float(zero_abs[a] / zero_count[a]) if zero_count[a] else math.nan
    return ExperimentResult(spec, traces, zero_support)


def sweep(spec: ExperimentSpec, parameter: str, values, threads: Optional[int] = None) -> SweepResult:
    """Run one experiment per value of ``parameter``, keeping seeds and all else fixed."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError("parameter", f"cannot sweep {parameter!r}; choose one of {SWEEP_PARAMETERS}")
    values = list(values)
    if not values:
        raise ConfigError("values", "sweep needs at least one value")
    experiments = [run_experiment(spec.with_parameter(parameter, v), threads) for v in values]
    return SweepResult(parameter, values, experiments)


def _values(trace) -> np.ndarray:
    return trace.values if isinstance(trace, MseTrace) else np.asarray(trace, dtype=float)


def steady_state_mse(trace) -> float:
    """Mean of the final 10% of a trace (at least ten points long)."""
    v = _values(trace)
    if v.size < 10:
        raise InvalidSpecError(f"trace too short for a steady-state estimate ({v.size} < 10)")
    tail = math.ceil(v.size / 10)
    return float(v[-tail:].mean())


def convergence_iteration(trace, factor: float = 2.0) -> int:
    """First iteration at which the trace drops to ``factor`` x its steady state.

    Returns the trace length if it never does.
    """
    v = _values(trace)
    target = factor * steady_state_mse(v)
    hits = np.flatnonzero(v <= target)
    return int(hits[0]) if hits.size else int(v.size)
