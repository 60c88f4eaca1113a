"""
LMS/F family of adaptive channel estimators
===========================================

Every estimator advances by the same rule

    w(k+1) = w(k) + mu * e(k)**3 * x(k) / (e(k)**2 + phi) - rho * zeta(k)

and differs only in its zero attractor ``rho * zeta``:

=======  ==========================================  ==================
kind     zeta                                        rho
=======  ==========================================  ==================
LMSF     0                                           0
ZA       sgn(w(k))                                   mu * lam
RZA      sgn(w(k)) / (1 + epsilon |w(k)|)            mu * lam / epsilon
RL1      sgn(w(k)) / (delta + |w(k-1)|)              mu * lam
=======  ==========================================  ==================

``sgn(0) = 0``. The RL1 weights come from the previous estimate, which is
why :class:`EstimatorState` carries both ``w(k)`` and ``w(k-1)``; before
the first update ``w(-1)`` is the zero vector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, DivergenceError


class EstimatorKind(str, enum.Enum):
    LMSF = "lmsf"
    ZA = "za"
    RZA = "rza"
    RL1 = "rl1"

    @classmethod
    def parse(cls, name) -> "EstimatorKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("/", "")
        aliases = {"lmsf": cls.LMSF, "plain": cls.LMSF, "plainlmsf": cls.LMSF,
                   "za": cls.ZA, "zalmsf": cls.ZA,
                   "rza": cls.RZA, "rzalmsf": cls.RZA,
                   "rl1": cls.RL1, "rl1lmsf": cls.RL1}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError("algos", f"unknown estimator {name!r}") from None


# Regularisation strengths used for the reference simulations.
DEFAULT_LAMBDA = {
    EstimatorKind.LMSF: 0.0,
    EstimatorKind.ZA: 4e-5,
    EstimatorKind.RZA: 4e-3,
    EstimatorKind.RL1: 4e-5,
}


@dataclass(frozen=True)
class EstimatorConfig:
    """Algorithm kind and its scalar parameters.

    ``lam`` is the regularisation weight of whichever penalty ``kind``
    selects; ``epsilon`` only matters for RZA and ``delta`` only for RL1.
    With ``lam = 0`` every kind behaves exactly like plain LMS/F.
    """

    kind: EstimatorKind = EstimatorKind.LMSF
    mu: float = 0.005
    phi: float = 0.8
    lam: float = 0.0
    epsilon: float = 20.0
    delta: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimatorKind.parse(self.kind))
        for name in ("mu", "phi", "lam", "epsilon", "delta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigError(name, f"must be finite, got {value}")
        if not self.mu > 0:
            raise ConfigError("mu", f"step size must be positive, got {self.mu}")
        if not self.phi > 0:
            raise ConfigError("phi", f"threshold must be positive, got {self.phi}")
        if self.lam < 0:
            raise ConfigError("lambda", f"regularisation must be nonnegative, got {self.lam}")
        if self.kind is EstimatorKind.RZA and not self.epsilon > 0:
            raise ConfigError("epsilon", f"reweight factor must be positive, got {self.epsilon}")
        if self.kind is EstimatorKind.RL1 and not self.delta > 0:
            raise ConfigError("delta", f"offset must be positive, got {self.delta}")

    @classmethod
    def default(cls, kind, **overrides) -> "EstimatorConfig":
        """Reference parameters for ``kind`` (mu=0.005, phi=0.8, eps=20, delta=0.05)."""
        kind = EstimatorKind.parse(kind)
        params = dict(kind=kind, lam=DEFAULT_LAMBDA[kind])
        params.update(overrides)
        return cls(**params)

    @property
    def rho(self) -> float:
        """Shrinkage intensity multiplying the penalty vector."""
        if self.kind is EstimatorKind.LMSF:
            return 0.0
        if self.kind is EstimatorKind.RZA:
            return self.mu * self.lam / self.epsilon
        return self.mu * self.lam

    @property
    def label(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class EstimatorState:
    """Current estimate ``w_curr = w(k)``, previous ``w_prev = w(k-1)`` and ``k``."""

    w_curr: np.ndarray
    w_prev: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        if np.shape(self.w_curr) != np.shape(self.w_prev):
            raise DimensionError("w_curr and w_prev must have the same length")

    @classmethod
    def zeros(cls, n_taps: int) -> "EstimatorState":
        return cls(np.zeros(n_taps), np.zeros(n_taps), 0)


def _check_same_length(a, b, what):
    if a.shape != b.shape:
        raise DimensionError(f"{what}: length {a.shape} does not match {b.shape}")


def innovation_error(state: EstimatorState, x, d: float) -> float:
    """A-priori error ``d - w(k).T x``."""
    x = np.asarray(x, dtype=float)
    _check_same_length(state.w_curr, x, "regressor window")
    return float(d - np.dot(state.w_curr, x))


def lmsf_gain(e: float, mu: float, phi: float) -> float:
    """Variable step size ``mu e^2 / (e^2 + phi)``.

    The LMS/F error term equals ``lmsf_gain(e, mu, phi) * e * x``.
    """
    e2 = e * e
    return mu * e2 / (e2 + phi)


def penalty_za(w) -> np.ndarray:
    return np.sign(np.asarray(w, dtype=float))


def penalty_rza(w, epsilon: float) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.sign(w) / (1.0 + epsilon * np.abs(w))


def penalty_rl1(w_prev, w_curr, delta: float) -> np.ndarray:
    """Sign of the current estimate over ``delta + |previous estimate|``."""
    w_prev = np.asarray(w_prev, dtype=float)
    w_curr = np.asarray(w_curr, dtype=float)
    _check_same_length(w_prev, w_curr, "penalty_rl1")
    return np.sign(w_curr) / (delta + np.abs(w_prev))


def zero_attractor(state: EstimatorState, cfg: EstimatorConfig) -> np.ndarray:
    """The vector ``rho * zeta`` that one step subtracts from the estimate."""
    kind = cfg.kind
    if kind is EstimatorKind.LMSF:
        return np.zeros_like(state.w_curr)
    if kind is EstimatorKind.ZA:
        zeta = penalty_za(state.w_curr)
    elif kind is EstimatorKind.RZA:
        zeta = penalty_rza(state.w_curr, cfg.epsilon)
    else:
        zeta = penalty_rl1(state.w_prev, state.w_curr, cfg.delta)
    return cfg.rho * zeta


def step(state: EstimatorState, x, d: float, cfg: EstimatorConfig) -> EstimatorState:
    """Advance one sample and return the new state.

    The input state is left untouched. A non-finite tap raises
    :class:`DivergenceError` carrying the iteration index.
    """
    x = np.asarray(x, dtype=float)
    _check_same_length(state.w_curr, x, "regressor window")
    with np.errstate(over="ignore", invalid="ignore"):
        e = float(d - np.dot(state.w_curr, x))
        gain = cfg.mu * (e * e * e) / (e * e + cfg.phi)
        w_next = state.w_curr + gain * x
        if cfg.rho != 0:
            w_next = w_next - zero_attractor(state, cfg)
    if not np.all(np.isfinite(w_next)):
        raise DivergenceError(state.iteration, cfg.label)
    return EstimatorState(w_next, state.w_curr.copy(), state.iteration + 1)


def penalty_curves(grid, epsilon: float = 20.0, delta: float = 0.05) -> np.ndarray:
    """Rows ``(w, zeta_za, zeta_rza, zeta_rl1)`` over ``grid``.

    The RL1 column uses the same value for the current and previous tap.
    """
    if not epsilon > 0:
        raise ConfigError("epsilon", f"must be positive, got {epsilon}")
    if not delta > 0:
        raise ConfigError("delta", f"must be positive, got {delta}")
    w = np.asarray(grid, dtype=float)
    return np.column_stack(
        [w, penalty_za(w), penalty_rza(w, epsilon), penalty_rl1(w, w, delta)]
    )
