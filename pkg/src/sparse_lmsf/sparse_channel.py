"""
Sparse FIR channel model
========================

Random sparse channels, ±1 training symbols, noisy observations
``d(k) = w.T x(k) + z(k)`` and Hoyer's sparseness measure.

Channels and regressor windows are plain 1-D float64 numpy arrays. Regressor
windows are ordered newest first, ``[x(k), x(k-1), ..., x(k-N+1)]``, with
samples before the start of the signal taken as zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, InvalidSpecError, UndefinedSparsenessError


@dataclass(frozen=True)
class SparseChannelSpec:
    """Shape of a random sparse channel.

    Parameters
    ----------
    n_taps : int
        Channel length N.
    n_nonzero : int
        Number of dominant taps K, ``1 <= K <= N``.
    tap_variance : float, optional
        Variance of each dominant tap. Defaults to ``1/K`` so that the
        expected channel energy is one.
    """

    n_taps: int = 128
    n_nonzero: int = 4
    tap_variance: Optional[float] = None

    def __post_init__(self):
        if int(self.n_taps) != self.n_taps or self.n_taps < 1:
            raise InvalidSpecError(f"n_taps must be a positive integer, got {self.n_taps}")
        if int(self.n_nonzero) != self.n_nonzero or self.n_nonzero < 1:
            raise InvalidSpecError(f"n_nonzero must be a positive integer, got {self.n_nonzero}")
        if self.n_nonzero > self.n_taps:
            raise InvalidSpecError(
                f"n_nonzero ({self.n_nonzero}) exceeds n_taps ({self.n_taps})"
            )
        if self.tap_variance is not None and not self.tap_variance > 0:
            raise InvalidSpecError(f"tap_variance must be positive, got {self.tap_variance}")

    @property
    def variance(self) -> float:
        if self.tap_variance is None:
            return 1.0 / self.n_nonzero
        return float(self.tap_variance)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise level.

    Build it with :meth:`from_snr` to tie ``sigma_n`` to an SNR in dB.
    """

    sigma_n: float
    snr_db: float = math.inf
    es: float = 1.0

    def __post_init__(self):
        if not self.sigma_n >= 0:
            raise InvalidSpecError(f"sigma_n must be nonnegative, got {self.sigma_n}")
        if not self.es > 0:
            raise InvalidSpecError(f"es must be positive, got {self.es}")

    @classmethod
    def from_snr(cls, snr_db: float, es: float = 1.0) -> "NoiseSpec":
        if not es > 0:
            raise InvalidSpecError(f"es must be positive, got {es}")
        sigma_n = math.sqrt(es / 10.0 ** (snr_db / 10.0))
        return cls(sigma_n=sigma_n, snr_db=float(snr_db), es=float(es))

    @property
    def variance(self) -> float:
        return self.sigma_n ** 2


def sparseness(w) -> float:
    """Hoyer sparseness of a tap vector.

    ``N/(N - sqrt(N)) * (1 - ||w||_1 / (sqrt(N) ||w||_2))``: 1 for a single
    nonzero tap, 0 when every tap has the same magnitude. Invariant to
    scaling and to permutation of the taps.

    Raises
    ------
    UndefinedSparsenessError
        If ``w`` is all zeros.
    ZeroDivisionError
        If ``w`` has a single tap.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DimensionError("sparseness expects a non-empty 1-D vector")
    n = w.size
    peak = np.abs(w).max()
    if peak == 0:
        raise UndefinedSparsenessError("sparseness of the all-zero vector is undefined")
    root_n = math.sqrt(n)
    if n - root_n == 0:
        raise ZeroDivisionError("sparseness needs at least two taps")
    # Same quantity as N/(N - sqrt N) * (1 - l1/(sqrt N l2)), rearranged so
    # that one-hot and constant-magnitude vectors give exactly 1 and 0.
    a = np.abs(w) / peak
    l1 = a.sum()
    ratio = math.sqrt(l1 * l1 / np.dot(a, a))
    return float((root_n - ratio) / (root_n - 1.0))


def generate_channel(spec: SparseChannelSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw a channel with exactly ``K`` Gaussian taps at random positions."""
    w = np.zeros(spec.n_taps)
    support = rng.choice(spec.n_taps, size=spec.n_nonzero, replace=False)
    w[support] = rng.normal(0.0, math.sqrt(spec.variance), size=spec.n_nonzero)
    return w


def generate_training_symbol(rng: np.random.Generator) -> float:
    """One equiprobable ±1 training symbol."""
    return 1.0 if rng.integers(0, 2) else -1.0


def generate_training_sequence(rng: np.random.Generator, length: int) -> np.ndarray:
    """``length`` independent ±1 symbols, unit energy each."""
    return np.where(rng.integers(0, 2, size=length) == 1, 1.0, -1.0)


def regressor_window(signal, k: int, n_taps: int) -> np.ndarray:
    """Window ``[x(k), x(k-1), ..., x(k-N+1)]``, zero before the first sample."""
    signal = np.asarray(signal, dtype=float)
    if not 0 <= k < signal.size:
        raise IndexError(f"k={k} outside signal of length {signal.size}")
    window = np.zeros(n_taps)
    recent = signal[max(0, k - n_taps + 1): k + 1][::-1]
    window[: recent.size] = recent
    return window


def observe(w, x, noise: NoiseSpec, rng: Optional[np.random.Generator] = None) -> float:
    """Noisy channel output ``w.T x + z`` with ``z ~ N(0, sigma_n^2)``.

    No random draw is made when ``sigma_n`` is zero, so ``rng`` may be None.
    """
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape:
        raise DimensionError(f"channel length {w.shape} does not match window {x.shape}")
    clean = float(np.dot(w, x))
    if noise.sigma_n == 0:
        return clean
    return clean + float(rng.normal(0.0, noise.sigma_n))
