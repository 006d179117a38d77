"""Step-size rules as stateful objects with explicit information contracts.

The delayed rules (``DelayedAdaGradGlobal``/``DelayedAdaGradCoord``) promise
that the step used at time t is a function of g_1..g_{t-1} only.  The calling
protocol makes that checkable: ``step_size(t)`` must be read *before*
``observe(g_t)`` is called for the same t, and each t is observed exactly
once.  Reading and observing out of order raises ``ContractError``.

The FTRL gamma rules deliberately invert that order: gamma_t is consumed
*after* g_t has been observed (the FTRL regularizer at time t+1 may use g_t),
so for those classes ``step_size(t)`` is valid once t gradients are in.
"""

from __future__ import annotations

import copy
import math
from typing import Optional, Union

import numpy as np

from .errors import ContractError, ParameterError

__all__ = [
    "Schedule",
    "Constant",
    "PolySqrt",
    "PolyPL",
    "DelayedAdaGradGlobal",
    "DelayedAdaGradCoord",
    "Exponential",
    "Cosine",
    "CosineRestart",
    "FTRLGammaSchedule",
    "FTRLGammaConstT",
    "FTRLGammaSqrtT",
    "FTRLGammaAdaGlobal",
    "FTRLGammaAdaCoord",
    "exponential_alpha_from_horizon",
    "cosine_restart_plan",
    "schedule_from_config",
    "SCHEDULE_KINDS",
]

StepSize = Union[float, np.ndarray]


def exponential_alpha_from_horizon(beta: float, T: int) -> float:
    """Decay rate alpha = (beta/T)^(1/T), so that alpha^T = beta/T.

    Requires T >= 3 and T > beta (beta = T would give the degenerate
    alpha = 1).
    """
    if beta <= 0:
        raise ParameterError("beta must be positive")
    if T < 3 or T <= beta:
        raise ParameterError("need T >= 3 and T > beta")
    return (beta / T) ** (1.0 / T)


def cosine_restart_plan(T0: int, r: float, stages: int) -> list:
    """Stage lengths [floor(T0 r^i) for i in 0..stages-1], each at least 1."""
    if T0 < 1 or r < 1 or stages < 1:
        raise ParameterError("need T0 >= 1, r >= 1, stages >= 1")
    return [max(1, int(math.floor(T0 * r**i))) for i in range(stages)]


class Schedule:
    """Base class enforcing the read-then-observe protocol.

    Subclasses implement ``_value(t)`` (pure in the state) and optionally
    ``_update(g)`` to fold the observed gradient into the accumulator.
    """

    finite_horizon: Optional[int] = None
    #: number of observed gradients required before step_size(t) is legal;
    #: delayed rules use t-1, FTRL gamma rules use t.
    _observe_offset = 1

    def __init__(self):
        self._observed = 0
        self._read = False

    @property
    def t_next(self) -> int:
        """The step index whose gradient has not been observed yet."""
        return self._observed + 1

    def step_size(self, t: int) -> StepSize:
        """Step size at time t.  Never mutates accumulator state."""
        if t <= 0:
            raise ContractError(f"step index must be positive, got {t}")
        if self.finite_horizon is not None and t > self.finite_horizon:
            raise ContractError(
                f"t={t} is beyond the horizon T={self.finite_horizon}")
        expected = self._observed + self._observe_offset
        if t != expected:
            raise ContractError(
                f"step_size queried at t={t} but {self._observed} gradients "
                f"observed; expected t={expected}")
        self._read = True
        return self._value(t)

    def observe(self, g) -> None:
        """Fold g_t into the accumulator and advance to t+1."""
        if not self._read:
            raise ContractError(
                f"observe called at t={self.t_next} before step_size was read "
                "(or observed twice for the same t)")
        self._update(np.asarray(g, dtype=np.float64))
        self._observed += 1
        self._read = False

    def clone(self) -> "Schedule":
        """Deterministic replica of the current state."""
        return copy.deepcopy(self)

    def _value(self, t: int) -> StepSize:
        raise NotImplementedError

    def _update(self, g: np.ndarray) -> None:
        pass


class Constant(Schedule):
    def __init__(self, c: float):
        super().__init__()
        if c <= 0:
            raise ParameterError("c must be positive")
        self.c = float(c)

    def _value(self, t: int) -> float:
        return self.c


class PolySqrt(Schedule):
    """Polynomial decay c * t^(-alpha_exp); alpha_exp = 0 is a constant step."""

    def __init__(self, c: float, alpha_exp: float):
        super().__init__()
        if c <= 0:
            raise ParameterError("c must be positive")
        if not (0.0 <= alpha_exp <= 1.0):
            raise ParameterError("alpha_exp must be in [0, 1]")
        self.c = float(c)
        self.alpha_exp = float(alpha_exp)

    def _value(self, t: int) -> float:
        return self.c * t ** (-self.alpha_exp)


class PolyPL(Schedule):
    """min(1/(L(1+a)), (2t+1)/(mu (t+1)^2)); constant early, ~2/(mu t) late."""

    def __init__(self, L: float, a: float, mu: float):
        super().__init__()
        if L <= 0 or mu <= 0 or a < 0:
            raise ParameterError("need L > 0, mu > 0, a >= 0")
        self.L = float(L)
        self.a = float(a)
        self.mu = float(mu)

    def _value(self, t: int) -> float:
        return min(1.0 / (self.L * (1.0 + self.a)),
                   (2.0 * t + 1.0) / (self.mu * (t + 1.0) ** 2))


class DelayedAdaGradGlobal(Schedule):
    """alpha / (beta + sum_{i<t} ||g_i||^2)^(1/2 + eps)."""

    def __init__(self, alpha: float, beta: float, eps: float = 0.0):
        super().__init__()
        if alpha <= 0:
            raise ParameterError("alpha must be positive")
        if beta <= 0:
            raise ParameterError("beta must be positive for a finite first step")
        if not (0.0 <= eps <= 0.5):
            raise ParameterError("eps must be in [0, 1/2]")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.eps = float(eps)
        self.accumulator = 0.0

    def _value(self, t: int) -> float:
        return self.alpha / (self.beta + self.accumulator) ** (0.5 + self.eps)

    def _update(self, g: np.ndarray) -> None:
        self.accumulator += float(g @ g)


class DelayedAdaGradCoord(Schedule):
    """Coordinate-wise alpha / (beta + sum_{i<t} g_{i,j}^2)^(1/2 + eps).

    Before the first observation the dimension is unknown and the (uniform)
    scalar value alpha / beta^(1/2+eps) is returned; afterwards a vector.
    """

    def __init__(self, alpha: float, beta: float, eps: float = 0.0):
        super().__init__()
        if alpha <= 0:
            raise ParameterError("alpha must be positive")
        if beta <= 0:
            raise ParameterError("beta must be positive for a finite first step")
        if not (0.0 <= eps <= 0.5):
            raise ParameterError("eps must be in [0, 1/2]")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.eps = float(eps)
        self.accumulator: Optional[np.ndarray] = None

    def _value(self, t: int) -> StepSize:
        if self.accumulator is None:
            return self.alpha / self.beta ** (0.5 + self.eps)
        return self.alpha / (self.beta + self.accumulator) ** (0.5 + self.eps)

    def _update(self, g: np.ndarray) -> None:
        if self.accumulator is None:
            self.accumulator = np.zeros_like(g)
        self.accumulator += g * g


class Exponential(Schedule):
    """eta_0 * alpha^t, either with a raw decay rate or the horizon form.

    The horizon form pins alpha = (beta/T)^(1/T) so that alpha^T = beta/T;
    pass ``beta`` and ``T`` instead of ``alpha`` to use it.
    """

    def __init__(self, eta0: float, alpha: Optional[float] = None,
                 beta: Optional[float] = None, T: Optional[int] = None):
        super().__init__()
        if eta0 <= 0:
            raise ParameterError("eta0 must be positive")
        if alpha is None:
            if beta is None or T is None:
                raise ParameterError("pass either alpha or both beta and T")
            alpha = exponential_alpha_from_horizon(beta, T)
        elif beta is not None or T is not None:
            raise ParameterError("pass either alpha or (beta, T), not both")
        if not (0.0 < alpha < 1.0):
            raise ParameterError("alpha must be in (0, 1)")
        self.eta0 = float(eta0)
        self.alpha = float(alpha)

    @classmethod
    def from_horizon(cls, eta0: float, beta: float, T: int) -> "Exponential":
        return cls(eta0, beta=beta, T=T)

    def _value(self, t: int) -> float:
        return self.eta0 * self.alpha**t


class Cosine(Schedule):
    """(eta_0/2)(1 + cos(t pi / T)) for t = 1..T; exactly 0 at t = T."""

    def __init__(self, eta0: float, T: int):
        super().__init__()
        if eta0 <= 0:
            raise ParameterError("eta0 must be positive")
        if T < 1:
            raise ParameterError("T must be >= 1")
        self.eta0 = float(eta0)
        self.finite_horizon = int(T)

    def _value(self, t: int) -> float:
        # (t / T) first: at t == T the argument is exactly pi and cos gives -1.
        return 0.5 * self.eta0 * (1.0 + math.cos(math.pi * (t / self.finite_horizon)))


class CosineRestart(Schedule):
    """Cosine stages of lengths floor(T0 r^i), each restarting at eta_0.

    Within a stage of length T_i the step at stage-local index s = 0..T_i-1
    is (eta_0/2)(1 + cos(s pi / T_i)), so every stage starts at eta_0 and
    stays strictly positive.
    """

    def __init__(self, eta0: float, T0: int, r: float, stages: int):
        super().__init__()
        if eta0 <= 0:
            raise ParameterError("eta0 must be positive")
        self.eta0 = float(eta0)
        self.plan = cosine_restart_plan(T0, r, stages)
        self.boundaries = np.cumsum([0] + self.plan)
        self.finite_horizon = int(self.boundaries[-1])

    def stage_of(self, t: int) -> tuple:
        """(stage index, stage-local index s, stage length) for global t (1-based)."""
        if not (1 <= t <= self.finite_horizon):
            raise ContractError(f"t={t} outside 1..{self.finite_horizon}")
        i = int(np.searchsorted(self.boundaries, t - 1, side="right")) - 1
        return i, t - 1 - int(self.boundaries[i]), self.plan[i]

    def _value(self, t: int) -> float:
        _, s, Ti = self.stage_of(t)
        return 0.5 * self.eta0 * (1.0 + math.cos(math.pi * (s / Ti)))


# ---------------------------------------------------------------------------
# FTRL gamma rules (consumed after the current gradient is observed)


class FTRLGammaSchedule(Schedule):
    """gamma_t rules for FTRL-based momentum; gamma_t may use g_1..g_t.

    The calling order is inverted relative to the delayed rules: per step,
    ``observe(alpha_t g_t)`` first (the adaptive variants accumulate the
    *weighted* gradient), then ``gamma(t)``.  Observing twice without
    reading the gamma in between is a contract error.
    """

    _observe_offset = 0

    def observe(self, g) -> None:
        if self._observed > 0 and not self._read:
            raise ContractError(
                f"gamma({self._observed}) was never read before observing "
                "the next gradient")
        self._update(np.asarray(g, dtype=np.float64))
        self._observed += 1
        self._read = False

    def gamma(self, t: int) -> StepSize:
        return self.step_size(t)


class FTRLGammaConstT(FTRLGammaSchedule):
    """gamma_t = c / (G sqrt(T)), constant over a known horizon."""

    def __init__(self, c: float, G: float, T: int):
        super().__init__()
        if c <= 0 or G <= 0 or T < 1:
            raise ParameterError("need c > 0, G > 0, T >= 1")
        self.value = float(c) / (float(G) * math.sqrt(T))
        self.finite_horizon = int(T)

    def _value(self, t: int) -> float:
        return self.value


class FTRLGammaSqrtT(FTRLGammaSchedule):
    """gamma_t = c / (G sqrt(t))."""

    def __init__(self, c: float, G: float):
        super().__init__()
        if c <= 0 or G <= 0:
            raise ParameterError("need c > 0, G > 0")
        self.c = float(c)
        self.G = float(G)

    def _value(self, t: int) -> float:
        return self.c / (self.G * math.sqrt(t))


class FTRLGammaAdaGlobal(FTRLGammaSchedule):
    """gamma_t = alpha / sqrt(G^2 + sum_{i<=t} ||alpha_i g_i||^2)."""

    def __init__(self, alpha: float, G: float):
        super().__init__()
        if alpha <= 0 or G <= 0:
            raise ParameterError("need alpha > 0, G > 0")
        self.alpha = float(alpha)
        self.G = float(G)
        self.accumulator = 0.0

    def _value(self, t: int) -> float:
        return self.alpha / math.sqrt(self.G**2 + self.accumulator)

    def _update(self, wg: np.ndarray) -> None:
        self.accumulator += float(wg @ wg)


class FTRLGammaAdaCoord(FTRLGammaSchedule):
    """Coordinate-wise gamma_t = alpha / sqrt(G_inf^2 + sum_{i<=t} (alpha_i g_{i,j})^2)."""

    def __init__(self, alpha: float, G_inf: float):
        super().__init__()
        if alpha <= 0 or G_inf <= 0:
            raise ParameterError("need alpha > 0, G_inf > 0")
        self.alpha = float(alpha)
        self.G_inf = float(G_inf)
        self.accumulator: Optional[np.ndarray] = None

    def _value(self, t: int) -> StepSize:
        if self.accumulator is None:
            return self.alpha / self.G_inf
        return self.alpha / np.sqrt(self.G_inf**2 + self.accumulator)

    def _update(self, wg: np.ndarray) -> None:
        if self.accumulator is None:
            self.accumulator = np.zeros_like(wg)
        self.accumulator += wg * wg


# ---------------------------------------------------------------------------
# Config-driven construction


SCHEDULE_KINDS = {
    "constant": Constant,
    "poly": PolySqrt,
    "poly-pl": PolyPL,
    "delayed-adagrad-global": DelayedAdaGradGlobal,
    "delayed-adagrad-coord": DelayedAdaGradCoord,
    "exponential": Exponential,
    "cosine": Cosine,
    "cosine-restart": CosineRestart,
    "ftrl-const-t": FTRLGammaConstT,
    "ftrl-sqrt-t": FTRLGammaSqrtT,
    "ftrl-ada-global": FTRLGammaAdaGlobal,
    "ftrl-ada-coord": FTRLGammaAdaCoord,
}


def schedule_from_config(kind: str, params: Optional[dict] = None) -> Schedule:
    """Build a fresh schedule from a ``{kind, params}`` config entry."""
    try:
        cls = SCHEDULE_KINDS[kind]
    except KeyError:
        raise ParameterError(
            f"unknown schedule kind {kind!r}; known: {sorted(SCHEDULE_KINDS)}"
        ) from None
    return cls(**(params or {}))
