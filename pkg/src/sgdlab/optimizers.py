"""Optimization loops: SGD, Heavy-Ball forms, EMA momentum, and FTRL-based SGDM.

All runners honor the schedule's read-then-observe ordering, log a per-step
trace (sub-optimality gap, exact squared gradient norm, step size, momentum
norm) and abort with a ``diverged`` status instead of raising when an iterate
leaves the representable range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, ParameterError
from .problems import NoiseModel, Problem, as_point
from .schedules import DelayedAdaGradCoord, FTRLGammaSchedule, Schedule

__all__ = [
    "Trace",
    "MomentumRule",
    "run_sgd",
    "run_sgdm",
    "run_delayed_adagrad_momentum",
    "run_ftrl_sgdm",
    "run_anytime_o2b_ftrl",
    "ftrl_equivalence_gap",
    "example_ninety_expectation",
    "derive_run_seed",
    "default_x1",
]

DIVERGENCE_NORM = 1e12

Oracle = Callable[[np.ndarray, int, np.random.Generator], np.ndarray]

TRACE_FIELDS = ("f_gap", "grad_norm_sq", "eta", "m_norm")
CSV_HEADER = "t,f_gap,grad_norm_sq,eta,m_norm"


@dataclass
class Trace:
    """Per-iteration log of one optimizer run.

    Records are taken at the pre-update iterate x_t (thinned every ``thin``
    steps, always keeping t = 1 and t = T).  ``f_gap`` is f(x_t) - f*; when
    f* is unknown the best observed value is substituted at the end of the
    run and ``gap_mode`` is set to "best-observed".
    """

    t: np.ndarray
    f_gap: np.ndarray
    grad_norm_sq: np.ndarray
    eta: np.ndarray
    m_norm: np.ndarray
    final_iterate: np.ndarray
    seed: Optional[int] = None
    thin: int = 1
    status: str = "ok"
    diverged_at: Optional[int] = None
    gap_mode: str = "exact"
    iterates: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.t)

    def field(self, name: str) -> np.ndarray:
        """A logged column, or the derived running minimum ``min_grad_sq``."""
        if name == "min_grad_sq":
            return np.minimum.accumulate(self.grad_norm_sq)
        if name not in TRACE_FIELDS:
            raise ParameterError(f"unknown trace field {name!r}")
        return getattr(self, name)

    def record(self, i: int) -> dict:
        return {
            "t": int(self.t[i]),
            "f_gap": float(self.f_gap[i]),
            "grad_norm_sq": float(self.grad_norm_sq[i]),
            "eta": float(self.eta[i]),
            "m_norm": float(self.m_norm[i]),
        }

    def to_csv(self, path) -> None:
        """Write the fixed-column CSV; floats use shortest round-trip form."""
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for i in range(len(self.t)):
                fh.write("%d,%r,%r,%r,%r\n" % (
                    int(self.t[i]), float(self.f_gap[i]),
                    float(self.grad_norm_sq[i]), float(self.eta[i]),
                    float(self.m_norm[i])))

    def sidecar(self, config: Optional[dict] = None,
                include_final_point: bool = False) -> dict:
        out = {
            "seed": self.seed,
            "status": self.status,
            "diverged_at": self.diverged_at,
            "thin": self.thin,
            "gap_mode": self.gap_mode,
            "steps_recorded": int(len(self.t)),
            "config": config,
        }
        if include_final_point:
            out["final_iterate"] = [float(v) for v in self.final_iterate]
        return out


@dataclass(frozen=True)
class MomentumRule:
    """One of the momentum update forms.

    - ``none``:        x_{t+1} = x_t - eta_t g_t
    - ``classic-hb``:  m_t = mu m_{t-1} + eta_t g_t;      x_{t+1} = x_t - m_t
    - ``current-hb``:  m_t = mu m_{t-1} + g_t;            x_{t+1} = x_t - eta_t m_t
    - ``ema``:         m_t = b_t m_{t-1} + (1 - b_t) g_t; x_{t+1} = x_t - eta_t m_t

    The two Heavy-Ball forms coincide for constant steps and differ as soon
    as the step size changes over time.
    """

    kind: str = "none"
    mu: float = 0.0
    beta_fn: Optional[Callable[[int], float]] = None

    @classmethod
    def none(cls) -> "MomentumRule":
        return cls(kind="none")

    @classmethod
    def classic_hb(cls, mu: float) -> "MomentumRule":
        if not (0.0 <= mu <= 1.0):
            raise ParameterError("mu must be in [0, 1]")
        return cls(kind="classic-hb", mu=float(mu))

    @classmethod
    def current_rate_hb(cls, mu: float) -> "MomentumRule":
        if not (0.0 <= mu <= 1.0):
            raise ParameterError("mu must be in [0, 1]")
        return cls(kind="current-hb", mu=float(mu))

    @classmethod
    def ema(cls, beta) -> "MomentumRule":
        if callable(beta):
            return cls(kind="ema", beta_fn=beta)
        if not (0.0 <= beta <= 1.0):
            raise ParameterError("beta must be in [0, 1]")
        return cls(kind="ema", beta_fn=lambda t, b=float(beta): b)


def derive_run_seed(master_seed: int, seed_index: int) -> int:
    """64-bit per-run seed mixed from (master seed, seed index)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(seed_index,))
    return int(ss.generate_state(1, np.uint64)[0])


def _streams(seed: Optional[int]):
    """Disjoint substreams for x1 and for the noise, derived from one seed."""
    ss = np.random.SeedSequence(0 if seed is None else seed)
    k_x1, k_noise = ss.spawn(2)
    return (np.random.Generator(np.random.PCG64(k_x1)),
            np.random.Generator(np.random.PCG64(k_noise)))


def default_x1(problem: Problem, seed: Optional[int]) -> np.ndarray:
    """Seed-derived unit-norm starting point."""
    rng, _ = _streams(seed)
    v = rng.standard_normal(problem.dim)
    n = float(np.linalg.norm(v))
    return v / n if n > 0 else np.ones(problem.dim) / math.sqrt(problem.dim)


def _prepare(problem: Problem, noise: Optional[NoiseModel], x1, seed,
             oracle: Optional[Oracle]):
    _, noise_rng = _streams(seed)
    if x1 is None:
        x1 = default_x1(problem, seed)
    x1 = as_point(x1, problem.dim)
    if oracle is None:
        nm = noise if noise is not None else NoiseModel.none()

        def oracle(x, t, rng, _nm=nm):
            return _nm.apply(np.asarray(problem.grad(x), dtype=np.float64), x, rng)

    return x1, noise_rng, oracle


class _Recorder:
    def __init__(self, problem: Problem, T: int, thin: int, seed):
        if thin < 1:
            raise ParameterError("thin must be >= 1")
        self.problem = problem
        self.T = T
        self.thin = thin
        self.seed = seed
        self.rows: list = []
        self.f_vals: list = []

    def want(self, t: int) -> bool:
        return t == 1 or t == self.T or t % self.thin == 0

    def add(self, t, fx, exact_grad, eta, m_norm):
        self.f_vals.append((t, fx))
        if self.want(t):
            gsq = float(exact_grad @ exact_grad)
            self.rows.append((t, fx, gsq, float(np.mean(eta)), m_norm))

    def build(self, final_x, status, diverged_at, iterates=None) -> Trace:
        rows = self.rows
        t = np.array([r[0] for r in rows], dtype=np.int64)
        f = np.array([r[1] for r in rows])
        if self.problem.f_star is not None:
            f_gap = f - self.problem.f_star
            gap_mode = "exact"
        else:
            best = min(v for _, v in self.f_vals) if self.f_vals else 0.0
            f_gap = f - best
            gap_mode = "best-observed"
        return Trace(
            t=t, f_gap=f_gap,
            grad_norm_sq=np.array([r[2] for r in rows]),
            eta=np.array([r[3] for r in rows]),
            m_norm=np.array([r[4] for r in rows]),
            final_iterate=np.asarray(final_x, dtype=np.float64),
            seed=self.seed, thin=self.thin, status=status,
            diverged_at=diverged_at, gap_mode=gap_mode,
            iterates=None if iterates is None else np.asarray(iterates),
        )


def _diverged(x: np.ndarray) -> bool:
    return (not np.all(np.isfinite(x))) or float(np.linalg.norm(x)) > DIVERGENCE_NORM


def run_sgdm(problem: Problem, noise: Optional[NoiseModel], schedule: Schedule,
             momentum: MomentumRule, T: int, x1=None, seed: Optional[int] = None,
             thin: int = 1, oracle: Optional[Oracle] = None,
             keep_iterates: bool = False) -> Trace:
    """SGD with a momentum rule; ``MomentumRule.none()`` gives plain SGD.

    Each iteration reads the step size before observing the gradient, so the
    delayed schedules keep their information contract.
    """
    if T < 1:
        raise ParameterError("T must be >= 1")
    x, rng, oracle = _prepare(problem, noise, x1, seed, oracle)
    rec = _Recorder(problem, T, thin, seed)
    m = np.zeros(problem.dim)
    iterates = [] if keep_iterates else None
    status, diverged_at = "ok", None
    for t in range(1, T + 1):
        eta = schedule.step_size(t)
        g = oracle(x, t, rng)
        schedule.observe(g)
        exact = np.asarray(problem.grad(x), dtype=np.float64)
        kind = momentum.kind
        if kind == "none":
            dx = eta * g
            m_norm = float(np.linalg.norm(dx))
        elif kind == "classic-hb":
            m = momentum.mu * m + eta * g
            dx = m
            m_norm = float(np.linalg.norm(m))
        elif kind == "current-hb":
            m = momentum.mu * m + g
            dx = eta * m
            m_norm = float(np.linalg.norm(m))
        elif kind == "ema":
            b = momentum.beta_fn(t)
            if not (0.0 <= b <= 1.0):
                raise ParameterError(f"EMA beta_t={b} outside [0, 1] at t={t}")
            m = b * m + (1.0 - b) * g
            dx = eta * m
            m_norm = float(np.linalg.norm(m))
        else:
            raise ParameterError(f"unknown momentum kind {kind!r}")
        if iterates is not None:
            iterates.append(x.copy())
        rec.add(t, problem.f(x), exact, eta, m_norm)
        x = x - dx
        if _diverged(x):
            status, diverged_at = "diverged", t
            x = np.where(np.isfinite(x), x, 0.0)
            break
    return rec.build(x, status, diverged_at, iterates)


def run_sgd(problem: Problem, noise: Optional[NoiseModel], schedule: Schedule,
            T: int, x1=None, seed: Optional[int] = None, thin: int = 1,
            oracle: Optional[Oracle] = None, keep_iterates: bool = False) -> Trace:
    """Plain SGD: x_{t+1} = x_t - eta_t g_t."""
    return run_sgdm(problem, noise, schedule, MomentumRule.none(), T,
                    x1=x1, seed=seed, thin=thin, oracle=oracle,
                    keep_iterates=keep_iterates)


def run_delayed_adagrad_momentum(problem: Problem, noise: Optional[NoiseModel],
                                 alpha: float, beta: float, mu: float, T: int,
                                 x1=None, seed: Optional[int] = None,
                                 thin: int = 1, oracle: Optional[Oracle] = None,
                                 keep_iterates: bool = False) -> Trace:
    """Classic Heavy-Ball with the coordinate-wise delayed-denominator step.

    eta_{t,j} = alpha / sqrt(beta + sum_{i<t} g_{i,j}^2); the trace logs the
    mean of the step vector.
    """
    if not (0.0 <= mu < 1.0):
        raise ParameterError("mu must be in [0, 1)")
    schedule = DelayedAdaGradCoord(alpha, beta, 0.0)
    return run_sgdm(problem, noise, schedule, MomentumRule.classic_hb(mu), T,
                    x1=x1, seed=seed, thin=thin, oracle=oracle,
                    keep_iterates=keep_iterates)


def _alpha_lookup(alpha_seq, T: int) -> Callable[[int], float]:
    """Positive weight sequence alpha_t for t = 1..T+1."""
    if alpha_seq is None:
        return lambda t: 1.0
    if callable(alpha_seq):
        fn = alpha_seq
    else:
        arr = np.asarray(alpha_seq, dtype=np.float64)
        if arr.shape[0] < T + 1:
            raise ParameterError(f"alpha_seq needs at least T+1={T + 1} entries")
        fn = lambda t, a=arr: float(a[t - 1])
    for probe in (1, T + 1):
        if fn(probe) <= 0:
            raise ParameterError("alpha_t must be positive")
    return fn


def _check_gamma_nonincreasing(prev, cur, t: int):
    if prev is not None and np.any(np.asarray(cur) > np.asarray(prev)):
        raise ContractError(f"gamma increased at t={t}")
    return cur


def run_ftrl_sgdm(problem: Problem, noise: Optional[NoiseModel],
                  gamma: FTRLGammaSchedule, T: int, alpha_seq=None, x1=None,
                  seed: Optional[int] = None, thin: int = 1,
                  oracle: Optional[Oracle] = None,
                  keep_iterates: bool = False) -> Trace:
    """Momentum with increasing beta_t and shrinking updates.

    Per step: beta_t = A_{t-1}/A_t with A_t = sum_{i<=t} alpha_i,
    m_t = beta_t m_{t-1} + (1 - beta_t) g_t,
    eta_t = (alpha_{t+1} A_t / A_{t+1}) gamma_t, and
    x_{t+1} = (A_t/A_{t+1}) x_t + (alpha_{t+1}/A_{t+1}) x_1 - eta_t m_t.
    The gamma rule sees the weighted gradient alpha_t g_t before gamma_t is
    read, and must be non-increasing.
    """
    if T < 1:
        raise ParameterError("T must be >= 1")
    if not isinstance(gamma, FTRLGammaSchedule):
        raise ParameterError("gamma must be one of the FTRL gamma rules")
    alpha = _alpha_lookup(alpha_seq, T)
    x, rng, oracle = _prepare(problem, noise, x1, seed, oracle)
    x_anchor = x.copy()
    rec = _Recorder(problem, T, thin, seed)
    m = np.zeros(problem.dim)
    iterates = [] if keep_iterates else None
    status, diverged_at = "ok", None
    A_prev = 0.0  # A_{t-1}
    prev_gamma = None
    for t in range(1, T + 1):
        g = oracle(x, t, rng)
        a_t, a_next = alpha(t), alpha(t + 1)
        A_t = A_prev + a_t
        beta_t = A_prev / A_t
        m = beta_t * m + (1.0 - beta_t) * g
        gamma.observe(a_t * g)
        gam = gamma.gamma(t)
        prev_gamma = _check_gamma_nonincreasing(prev_gamma, gam, t)
        A_next = A_t + a_next
        eta = (a_next * A_t / A_next) * gam
        exact = np.asarray(problem.grad(x), dtype=np.float64)
        if iterates is not None:
            iterates.append(x.copy())
        rec.add(t, problem.f(x), exact, eta, float(np.linalg.norm(m)))
        x = (A_t / A_next) * x + (a_next / A_next) * x_anchor - eta * m
        if _diverged(x):
            status, diverged_at = "diverged", t
            x = np.where(np.isfinite(x), x, 0.0)
            break
        A_prev = A_t
    return rec.build(x, status, diverged_at, iterates)


def run_anytime_o2b_ftrl(problem: Problem, noise: Optional[NoiseModel],
                         gamma: FTRLGammaSchedule, T: int, alpha_seq=None,
                         w1=None, seed: Optional[int] = None, thin: int = 1,
                         oracle: Optional[Oracle] = None,
                         keep_iterates: bool = False) -> Trace:
    """Reference conversion: FTRL on linearized losses, queried at averages.

    w_{t+1} = w_1 - gamma_t sum_{i<=t} alpha_i g_i and
    x_t = sum_{i<=t} alpha_i w_i / sum_{i<=t} alpha_i; gradients are taken at
    the averaged points x_t, and the trace logs x_t metrics.
    """
    if T < 1:
        raise ParameterError("T must be >= 1")
    if not isinstance(gamma, FTRLGammaSchedule):
        raise ParameterError("gamma must be one of the FTRL gamma rules")
    alpha = _alpha_lookup(alpha_seq, T)
    w, rng, oracle = _prepare(problem, noise, w1, seed, oracle)
    w1_vec = w.copy()
    rec = _Recorder(problem, T, thin, seed)
    iterates = [] if keep_iterates else None
    status, diverged_at = "ok", None
    A = 0.0
    S = np.zeros(problem.dim)       # sum alpha_i w_i
    G_sum = np.zeros(problem.dim)   # sum alpha_i g_i
    prev_gamma = None
    x = w1_vec
    for t in range(1, T + 1):
        a_t = alpha(t)
        A += a_t
        S = S + a_t * w
        x = S / A
        if _diverged(x):
            status, diverged_at = "diverged", t
            x = np.where(np.isfinite(x), x, 0.0)
            break
        g = oracle(x, t, rng)
        gamma.observe(a_t * g)
        gam = gamma.gamma(t)
        prev_gamma = _check_gamma_nonincreasing(prev_gamma, gam, t)
        G_sum = G_sum + a_t * g
        exact = np.asarray(problem.grad(x), dtype=np.float64)
        if iterates is not None:
            iterates.append(x.copy())
        rec.add(t, problem.f(x), exact, gam, float(np.linalg.norm(G_sum)))
        w = w1_vec - gam * G_sum
    return rec.build(x, status, diverged_at, iterates)


def ftrl_equivalence_gap(problem: Problem, noise: Optional[NoiseModel],
                         gamma_factory: Callable[[], FTRLGammaSchedule], T: int,
                         alpha_seq=None, seed: Optional[int] = None) -> float:
    """Max relative deviation between FTRL-SGDM and the O2B/FTRL reference.

    Both runs consume the identical recorded gradient stream (captured from
    the momentum run), which isolates the algebraic trajectory identity from
    sampling order.
    """
    stream: list = []

    def recording(x, t, rng, _p=problem, _n=noise or NoiseModel.none()):
        g = _n.apply(np.asarray(_p.grad(x), dtype=np.float64), x, rng)
        stream.append(g)
        return g

    tr_m = run_ftrl_sgdm(problem, noise, gamma_factory(), T, alpha_seq=alpha_seq,
                         seed=seed, oracle=recording, keep_iterates=True)

    def playback(x, t, rng):
        return stream[t - 1]

    tr_r = run_anytime_o2b_ftrl(problem, noise, gamma_factory(), T,
                                alpha_seq=alpha_seq, seed=seed, oracle=playback,
                                keep_iterates=True)
    if tr_m.status != "ok" or tr_r.status != "ok":
        raise ContractError("equivalence check requires both runs to finish")
    xa, xb = tr_m.iterates, tr_r.iterates
    denom = np.maximum(1.0, np.linalg.norm(xa, axis=1))
    return float(np.max(np.linalg.norm(xa - xb, axis=1) / denom))


def example_ninety_expectation(x: float, sigma: float, A: float, eps: float,
                               alpha: float) -> float:
    """Exact update-direction expectation for the one-step-ahead denominator.

    For f(x) = x^2/2 with the three-point additive noise
    P(xi = sigma) = 7/15, P(xi = -3 sigma/2) = 1/5, P(xi = -sigma/2) = 1/3
    (mean zero), returns E[<eta_{t+1} g, f'(x)>] where g = x + xi and
    eta_{t+1} = alpha / (A + g^2)^(1/2 + eps), i.e. the step denominator
    already includes the current gradient.  A negative value means the
    expected update deviates more than ninety degrees from the descent
    direction, which is exactly the bias the delayed rules avoid.
    """
    if A <= 0 or sigma <= 0:
        raise ParameterError("need A > 0 and sigma > 0")
    outcomes = ((7.0 / 15.0, sigma), (1.0 / 5.0, -1.5 * sigma),
                (1.0 / 3.0, -0.5 * sigma))
    total = 0.0
    for p, xi in outcomes:
        g = x + xi
        total += p * g * x / (A + g * g) ** (0.5 + eps)
    return alpha * total
