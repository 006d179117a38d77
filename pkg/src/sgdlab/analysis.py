"""Metrics over traces: rate-slope fits, iterate selection, adaptivity tables.

Slope fits come in two flavors.  ``fit_loglog_slope`` regresses log(field)
on log(t) and quantifies power-law decay t^slope; ``fit_semilog_slope``
regresses log(field) on t and quantifies geometric decay exp(slope * t).
Both raise on nonpositive values inside the requested window, naming the
first offending step.

Runs on strongly contracting configurations can reach the exact optimum in
floating point (the gap underflows to 0 and stays there).  The
``*_positive`` helpers implement the convention used by the verification
harness: fits restrict to the positive records, and a window that contains
no positive record because the run already converged is reported as slope
-inf (decay faster than any power law) rather than an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ParameterError
from .lemmas import LemmaReport, lemma_suite  # noqa: F401  (re-exported)
from .optimizers import Trace, run_sgd
from .problems import NoiseModel, Problem

__all__ = [
    "RateFit",
    "fit_loglog_slope",
    "fit_semilog_slope",
    "loglog_slope_positive",
    "geometric_fit",
    "select_iterate",
    "adaptivity_report",
    "lemma_suite",
    "LemmaReport",
]

SELECTION_RULES = ("last", "best_grad", "best_f", "eta_weighted_random")


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared, "window": list(self.window)}


def _least_squares(x: np.ndarray, y: np.ndarray) -> tuple:
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return float(coef[0]), float(coef[1]), r2


def _window_of(trace: Trace, window) -> tuple:
    T = int(trace.t[-1])
    if window is None:
        window = (T // 2, T)
    lo, hi = int(window[0]), int(window[1])
    if not (1 <= lo <= hi <= T):
        raise ParameterError(f"window {window} outside trace range 1..{T}")
    return lo, hi


def _fit(trace: Trace, field: str, window, x_of: Callable[[np.ndarray], np.ndarray]) -> RateFit:
    lo, hi = _window_of(trace, window)
    mask = (trace.t >= lo) & (trace.t <= hi)
    if int(np.sum(mask)) < 2:
        raise ParameterError(f"window [{lo}, {hi}] holds fewer than 2 records")
    y = trace.field(field)[mask]
    ts = trace.t[mask]
    bad = y <= 0.0
    if np.any(bad):
        t0 = int(ts[np.nonzero(bad)[0][0]])
        raise ParameterError(f"nonpositive {field} at t={t0}")
    slope, intercept, r2 = _least_squares(x_of(ts.astype(np.float64)), np.log(y))
    return RateFit(slope, intercept, r2, (lo, hi))


def fit_loglog_slope(trace: Trace, field: str = "f_gap", window=None) -> RateFit:
    """Least-squares fit of log(field) against log(t) over the window.

    The window defaults to the last half of the run, [T/2, T].  The slope is
    invariant to positive rescaling of the field; only the intercept moves.
    """
    return _fit(trace, field, window, np.log)


def fit_semilog_slope(trace: Trace, field: str = "f_gap", window=None) -> RateFit:
    """Least-squares fit of log(field) against t itself (geometric decay)."""
    return _fit(trace, field, window, lambda t: t)


def _positive_prefix_end(trace: Trace, field: str) -> int:
    """Index after which the field stays exactly zero, or len(trace)."""
    y = trace.field(field)
    pos = np.nonzero(y > 0.0)[0]
    return 0 if pos.size == 0 else int(pos[-1]) + 1


def loglog_slope_positive(trace: Trace, field: str = "f_gap", window=None) -> float:
    """Log-log slope over the positive records inside the window.

    Returns -inf when the window holds no positive records because the run
    converged to the exact optimum earlier (every later record is zero).
    """
    lo, hi = _window_of(trace, window)
    mask = (trace.t >= lo) & (trace.t <= hi)
    y = trace.field(field)[mask]
    ts = trace.t[mask]
    good = y > 0.0
    if int(np.sum(good)) < 2:
        end = _positive_prefix_end(trace, field)
        if end < len(trace) and np.all(trace.field(field)[end:] == 0.0):
            return float("-inf")
        raise ParameterError(f"window [{lo}, {hi}] has fewer than 2 positive {field} records")
    slope, _, _ = _least_squares(np.log(ts[good].astype(np.float64)), np.log(y[good]))
    return slope


def geometric_fit(trace: Trace, field: str = "f_gap", window=None) -> RateFit:
    """Semilog fit used by the geometric-decay detector.

    Fits over the requested window (default last half) when it holds
    positive records.  When the run hit the exact optimum before the window
    opens, the decay evidence lives in the positive prefix instead, so the
    fit falls back to the last half of that prefix.
    """
    lo, hi = _window_of(trace, window)
    mask = (trace.t >= lo) & (trace.t <= hi)
    y = trace.field(field)[mask]
    if int(np.sum(y > 0.0)) >= 2:
        sel = mask & (trace.field(field) > 0.0)
        ts = trace.t[sel]
        slope, intercept, r2 = _least_squares(
            ts.astype(np.float64), np.log(trace.field(field)[sel]))
        return RateFit(slope, intercept, r2, (lo, hi))
    end = _positive_prefix_end(trace, field)
    if end < 2:
        raise ParameterError(f"trace has no positive {field} prefix to fit")
    t_end = int(trace.t[end - 1])
    return fit_semilog_slope(trace, field, (max(1, t_end // 2), t_end))


def select_iterate(trace: Trace, rule: str,
                   rng: Optional[np.random.Generator] = None) -> dict:
    """Pick a trace record: last, best_grad, best_f, or eta_weighted_random.

    ``eta_weighted_random`` draws t with probability eta_t / sum eta_i.
    """
    if len(trace) == 0:
        raise ParameterError("empty trace")
    if rule == "last":
        return trace.record(len(trace) - 1)
    if rule == "best_grad":
        return trace.record(int(np.argmin(trace.grad_norm_sq)))
    if rule == "best_f":
        return trace.record(int(np.argmin(trace.f_gap)))
    if rule == "eta_weighted_random":
        if rng is None:
            raise ParameterError("eta_weighted_random needs an rng")
        w = trace.eta
        total = float(np.sum(w))
        if total <= 0 or np.any(w < 0):
            raise ParameterError("eta weights must be nonnegative with positive sum")
        return trace.record(int(rng.choice(len(trace), p=w / total)))
    raise ParameterError(f"unknown selection rule {rule!r}; known: {SELECTION_RULES}")


def adaptivity_report(problem: Problem, schedule_factory: Callable[[int], object],
                      sigma_grid: Sequence[float], T: int, seeds: int,
                      master_seed: int = 0, thin: int = 1) -> List[dict]:
    """Per-noise-level decay summary for one schedule family on one problem.

    For each sigma the additive-noise model b = sigma^2 (a = 0) is run for
    ``seeds`` independent runs of length T; the report carries the median
    log-log slope of the designated field over the last half (f_gap for PL
    problems, the running-min squared gradient otherwise), and, at
    sigma = 0, the geometric-decay diagnostics.  Diverged runs are counted
    and skipped, not fatal.
    """
    from .optimizers import derive_run_seed

    if 0.0 not in [float(s) for s in sigma_grid]:
        raise ParameterError("sigma_grid must include 0")
    if problem.f_star is None and problem.pl:
        raise ParameterError("PL adaptivity report needs f_star")
    field = "f_gap" if problem.pl else "min_grad_sq"
    rows = []
    for sigma in sigma_grid:
        sigma = float(sigma)
        noise = NoiseModel.affine_variance(0.0, sigma * sigma)
        slopes, r2s, diverged = [], [], 0
        for k in range(seeds):
            seed = derive_run_seed(master_seed, k)
            tr = run_sgd(problem, noise, schedule_factory(T), T, seed=seed, thin=thin)
            if tr.status != "ok":
                diverged += 1
                continue
            slopes.append(loglog_slope_positive(tr, field))
            if sigma == 0.0:
                fit = geometric_fit(tr, "f_gap" if problem.f_star is not None else field)
                r2s.append(fit.r_squared)
        row = {
            "sigma": sigma,
            "field": field,
            "runs": seeds,
            "diverged": diverged,
            "slope_median": float(np.median(slopes)) if slopes else math.nan,
        }
        if sigma == 0.0:
            row["geometric_r2_median"] = float(np.median(r2s)) if r2s else math.nan
            row["geometric_flag"] = bool(r2s and np.median(r2s) >= 0.99)
        rows.append(row)
    return rows
