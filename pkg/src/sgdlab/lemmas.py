"""Randomized verification of the technical inequalities behind the rate proofs.

Each checker draws admissible inputs, evaluates both sides of its inequality
(or identity) and reports the worst margin RHS - LHS seen, normalized by the
larger side.  A lemma is *violated* when the worst margin drops below the
float-safe slack of -1e-12.  Where the claim quantifies over all x satisfying
a hypothesis ("if x <= C(A+Bx)^p then x < bound"), the checker verifies the
contrapositive at and beyond the bound, which covers the worst case without
needing to solve for it.

Input distributions: log-uniform positives (ranges noted per lemma where the
default [1e-3, 1e3] would overflow float64 in intermediate powers), exponents
epsilon uniform over their admissible interval, sequence lengths uniform in
[1, 200].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .errors import ParameterError

__all__ = ["LemmaReport", "lemma_suite", "LEMMA_IDS", "sum_cosine"]

VIOLATION_TOL = -1e-12
_CHUNK = 2000


@dataclass(frozen=True)
class LemmaReport:
    lemma_id: str
    trials: int
    worst_margin: float

    @property
    def violated(self) -> bool:
        return self.worst_margin < VIOLATION_TOL

    def as_dict(self) -> dict:
        return {"lemma_id": self.lemma_id, "trials": self.trials,
                "worst_margin": self.worst_margin, "violated": self.violated}


def _loguniform(rng, lo, hi, size):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def _rel_margin(lhs, rhs):
    """(RHS - LHS) / max(1, |LHS|, |RHS|), elementwise."""
    denom = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    return (rhs - lhs) / denom


def sum_cosine(T: int) -> float:
    """sum_{t=1}^{T} cos(t pi / T); equals -1 for every T >= 1."""
    t = np.arange(1, T + 1, dtype=np.float64)
    # extended-precision accumulation keeps the bare float64 sum error
    # comfortably under the 1e-12 identity tolerance up to T = 1e4
    return float(np.sum(np.cos(np.pi * (t / T)), dtype=np.longdouble))


# --- individual checkers; each returns the worst margin over `trials` draws


def _check_sum_bounded(rng, trials):
    worst = math.inf
    Lmax = 200
    for n in _chunks(trials):
        lens = rng.integers(1, Lmax + 1, n)
        a = _loguniform(rng, 1e-3, 1e3, (n, Lmax))
        a[np.arange(Lmax)[None, :] >= lens[:, None]] = 0.0  # zero-padding is exact
        a0 = _loguniform(rng, 1e-3, 1e3, n)
        beta = 1.0 + _loguniform(rng, 1e-2, 3.0, n)
        s = a0[:, None] + np.cumsum(a, axis=1)
        lhs = np.sum(a / s ** beta[:, None], axis=1)
        rhs = 1.0 / ((beta - 1.0) * a0 ** (beta - 1.0))
        worst = min(worst, float(np.min(_rel_margin(lhs, rhs))))
    return worst


def _check_sum_integral_bounds(rng, trials):
    # f(x) = (shift + x)^(-p) and f(x) = exp(-lam x), both nonincreasing on [0, inf)
    worst = math.inf
    Lmax = 200
    for n in _chunks(trials):
        lens = rng.integers(1, Lmax + 1, n)
        a = _loguniform(rng, 1e-3, 1e3, (n, Lmax))
        a[np.arange(Lmax)[None, :] >= lens[:, None]] = 0.0
        a0 = _loguniform(rng, 1e-3, 1e3, n)
        s = a0[:, None] + np.cumsum(a, axis=1)
        upper = a0 + np.sum(a, axis=1)
        use_pow = rng.random(n) < 0.5
        p = _loguniform(rng, 0.1, 3.0, n)
        p = np.where(np.abs(p - 1.0) < 1e-9, 1.1, p)
        shift = _loguniform(rng, 1e-3, 1e2, n)
        lam = _loguniform(rng, 1e-3, 1e1, n)
        lhs_pow = np.sum(a * (shift[:, None] + s) ** (-p[:, None]), axis=1)
        int_pow = ((shift + upper) ** (1 - p) - (shift + a0) ** (1 - p)) / (1 - p)
        lhs_exp = np.sum(a * np.exp(-lam[:, None] * s), axis=1)
        int_exp = (np.exp(-lam * a0) - np.exp(-lam * upper)) / lam
        lhs = np.where(use_pow, lhs_pow, lhs_exp)
        rhs = np.where(use_pow, int_pow, int_exp)
        worst = min(worst, float(np.min(_rel_margin(lhs, rhs))))
    return worst


def _check_smooth(rng, trials):
    # ||grad||^2 <= 2 M (f - min f) probed on random positive quadratics
    worst = math.inf
    d = 6
    for n in _chunks(trials):
        lam = _loguniform(rng, 1e-2, 1e2, (n, d))
        y = rng.standard_normal((n, d)) * _loguniform(rng, 1e-2, 1e2, n)[:, None]
        gap = 0.5 * np.sum(lam * y * y, axis=1)
        lhs = np.sum(lam * lam * y * y, axis=1)
        rhs = 2.0 * np.max(lam, axis=1) * gap
        worst = min(worst, float(np.min(_rel_margin(lhs, rhs))))
    return worst


def _check_solvex(rng, trials):
    # contrapositive at x = bound: the hypothesis x <= C(A+Bx)^p must fail
    # there, i.e. bound >= C (A + B bound)^p.
    worst = math.inf
    for n in _chunks(trials):
        A = _loguniform(rng, 1e-2, 1e2, n)
        B = _loguniform(rng, 1e-2, 1e2, n)
        C = _loguniform(rng, 1e-2, 1e2, n)
        # eps capped below 1/2: the bound exponent 1/(1/2 - eps) overflows
        # float64 as eps -> 1/2
        eps = rng.uniform(0.0, 0.35, n)
        p = 0.5 + eps
        bound = np.maximum((C * (2 * B) ** p) ** (1.0 / (0.5 - eps)),
                           C * (2 * A) ** p)
        lhs = C * (A + B * bound) ** p
        worst = min(worst, float(np.min(_rel_margin(lhs, bound))))
    return worst


def _check_logsolvex(rng, trials):
    # psi(x) = (A+Bx)(C + D ln(A+Bx)) - x^2 must stay negative on [bound, inf).
    # Checked at the bound, at geometric multiples, and at the stationary
    # point of psi restricted to the tail (found by fixed-point iteration).
    worst = math.inf
    for n in _chunks(trials):
        A = _loguniform(rng, 1e-2, 1e2, n)
        B = _loguniform(rng, 1e-2, 1e2, n)
        C = _loguniform(rng, 1e-2, 1e2, n)
        D = np.where(rng.random(n) < 0.1, 0.0, _loguniform(rng, 1e-2, 1e2, n))
        bound = 32 * B**3 * D**2 + 2 * B * C + 8 * B**2 * D * np.sqrt(C) + A / B

        def psi(x):
            return (A + B * x) * (C + D * np.log(A + B * x)) - x * x

        xs = [bound, 2 * bound, 10 * bound, 100 * bound, 1000 * bound]
        xp = bound.copy()
        for _ in range(40):  # solves 2x = B(C + D + D ln(A+Bx)) where possible
            xp = np.maximum(bound, 0.5 * B * (C + D + D * np.log(A + B * xp)))
        xs.append(xp)
        m = np.min([_rel_margin(psi(x), 0.0) for x in xs])
        worst = min(worst, float(m))
    return worst


def _check_exponential(rng, trials):
    worst = math.inf
    for n in _chunks(trials):
        x = np.where(rng.random(n) < 0.05, 0.0, _loguniform(rng, 1e-3, 1e3, n))
        y = np.where(rng.random(n) < 0.05, 0.0, _loguniform(rng, 1e-3, 1e3, n))
        p = rng.uniform(0.0, 1.0, n)
        worst = min(worst, float(np.min(_rel_margin((x + y) ** p, x**p + y**p))))
    return worst


def _check_bound_log(rng, trials):
    worst = math.inf
    for n in _chunks(trials):
        x = _loguniform(rng, 1e-3, 1e3, n)
        # alpha >= 0.1 keeps x^(1/alpha) inside float range at x = 1e3
        al = _loguniform(rng, 1e-1, 1e2, n)
        worst = min(worst, float(np.min(_rel_margin(np.log(x),
                                                    al * (x ** (1 / al) - 1)))))
    return worst


def _check_ineq_alpha(rng, trials):
    worst = math.inf
    for n in _chunks(trials):
        x = _loguniform(rng, 1e-3, 1e3, n)
        worst = min(worst, float(np.min(_rel_margin(1.0 - x, np.log(1.0 / x)))))
    return worst


def _check_ineq_constant(rng, trials):
    # alpha = (beta/T)^(1/T) with T >= 3 and 1 <= beta < T (the derivation
    # uses ln(T/beta) <= ln T, which needs beta >= 1)
    worst = math.inf
    for n in _chunks(trials):
        T = rng.integers(3, 10_001, n).astype(np.float64)
        beta = np.exp(rng.uniform(0.0, np.log(0.99 * T)))
        alpha = (beta / T) ** (1.0 / T)
        m1 = alpha - 0.69
        lhs = alpha * (beta / T) / (1.0 - alpha)  # alpha^(T+1)/(1-alpha), overflow-free
        rhs = 2.0 * beta / np.log(T / beta)
        m2 = _rel_margin(lhs, rhs)
        worst = min(worst, float(np.min(m1)), float(np.min(m2)))
    return worst


def _check_integral_bound(rng, trials):
    worst = math.inf
    Tmax = 200
    t = np.arange(0, Tmax + 1, dtype=np.float64)
    for n in _chunks(trials):
        Ts = rng.integers(1, Tmax + 1, n)
        a = np.where(rng.random(n) < 0.1, 0.0, rng.uniform(0.0, 5.0, n))
        b = _loguniform(rng, 1e-2, 1e1, n)
        terms = np.exp(-b[:, None] * t[None, :]) * t[None, :] ** a[:, None]
        terms[:, 0] = np.where(a == 0.0, 1.0, 0.0)  # 0^0 = 1 convention
        terms[np.arange(Tmax + 1)[None, :] > Ts[:, None]] = 0.0
        lhs = np.sum(terms, axis=1)
        gamma = np.exp([math.lgamma(v + 1.0) for v in a])
        rhs = 2 * np.exp(-a) * (a / b) ** a + gamma / b ** (a + 1)
        worst = min(worst, float(np.min(_rel_margin(lhs, rhs))))
    return worst


def _check_sum_cosine(rng, trials):
    # the identity depends only on T; evaluate each sampled horizon once
    Ts = np.unique(rng.integers(1, 10_001, trials))
    worst = math.inf
    for T in Ts:
        worst = min(worst, -abs(sum_cosine(int(T)) + 1.0))
    return worst


def _check_poly_bound(rng, trials):
    # alpha is shared inside a chunk so the power table is computed once
    worst = math.inf
    Tmax = 10_000
    k = np.arange(1, Tmax + 1, dtype=np.float64)
    for n in _chunks(trials, 200):
        al = rng.uniform(np.nextafter(0.0, 1.0), 0.5)
        S = np.concatenate(([0.0], np.cumsum(k**-al)))
        T = rng.integers(1, Tmax + 1, n)
        j = (rng.random(n) * T).astype(np.int64) + 1
        t = j + (rng.random(n) * (T - j + 1)).astype(np.int64)
        lhs = (S[t] - S[j]) / (T - j + 1)
        rhs = 2.0 / T**al
        worst = min(worst, float(np.min(_rel_margin(lhs, rhs))))
    return worst


def _check_ratio_bound(rng, trials):
    worst = math.inf
    Kmax = 200
    for n in _chunks(trials):
        # sequence length shared inside a chunk to keep the recursion vectorized
        K = int(rng.integers(1, Kmax + 1))
        # A capped at 2: the closed form multiplies up to K of them together
        A = _loguniform(rng, 1e-2, 2.0, (n, K))
        B = _loguniform(rng, 1e-3, 1e3, (n, K))
        X1 = _loguniform(rng, 1e-3, 1e3, n)
        u = rng.uniform(0.0, 1.0, (n, K))
        X = X1.copy()
        for kk in range(K):
            X = A[:, kk] * X + B[:, kk] * u[:, kk]
        suffix = np.ones((n, K + 1))
        for kk in range(K - 1, -1, -1):
            suffix[:, kk] = suffix[:, kk + 1] * A[:, kk]
        rhs = suffix[:, 0] * X1 + np.sum(suffix[:, 1:] * B, axis=1)
        worst = min(worst, float(np.min(_rel_margin(X, rhs))))
    return worst


def _check_doublesum(rng, trials):
    # dyadic inputs keep every product and partial sum exact in float64,
    # so both identities must hold to the last bit
    worst = math.inf
    Kmax = 200
    for n in _chunks(trials):
        K = int(rng.integers(1, Kmax + 1))
        a = rng.integers(-1024, 1025, (n, K)).astype(np.float64) / 1024.0
        b = rng.integers(-1024, 1025, (n, K)).astype(np.float64) / 1024.0
        lhs1 = np.sum(a * np.cumsum(b, axis=1), axis=1)
        rhs1 = np.sum(b * (np.cumsum(a[:, ::-1], axis=1)[:, ::-1]), axis=1)
        cs = np.concatenate([np.zeros((n, 1)), np.cumsum(b, axis=1)[:, :-1]], axis=1)
        lhs2 = np.sum(a * cs, axis=1)
        suffix = np.cumsum(a[:, ::-1], axis=1)[:, ::-1]
        rhs2 = np.sum(b[:, :-1] * suffix[:, 1:], axis=1) if K > 1 else np.zeros(n)
        m = np.minimum(-np.abs(lhs1 - rhs1), -np.abs(lhs2 - rhs2))
        worst = min(worst, float(np.min(m)))
    return worst


def _chunks(total: int, size: int = _CHUNK):
    left = total
    while left > 0:
        n = min(size, left)
        left -= n
        yield n


_CHECKERS: Dict[str, Callable] = {
    "sum_bounded": _check_sum_bounded,
    "sum_integral_bounds": _check_sum_integral_bounds,
    "smooth": _check_smooth,
    "solvex": _check_solvex,
    "logsolvex": _check_logsolvex,
    "exponential": _check_exponential,
    "bound_log": _check_bound_log,
    "ineq_alpha": _check_ineq_alpha,
    "ineq_constant": _check_ineq_constant,
    "integral_bound": _check_integral_bound,
    "sum_cosine": _check_sum_cosine,
    "poly_bound": _check_poly_bound,
    "ratio_bound": _check_ratio_bound,
    "doublesum": _check_doublesum,
}

LEMMA_IDS = tuple(sorted(_CHECKERS))


def lemma_suite(trials: int, seed: int = 0, only=None) -> List[LemmaReport]:
    """Run every lemma checker for `trials` randomized trials each.

    Violations are data, not exceptions: inspect ``LemmaReport.violated``.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    ids = LEMMA_IDS if only is None else tuple(only)
    reports = []
    for lemma_id in ids:
        try:
            checker = _CHECKERS[lemma_id]
        except KeyError:
            raise ParameterError(f"unknown lemma id {lemma_id!r}") from None
        rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(LEMMA_IDS.index(lemma_id),)))
        reports.append(LemmaReport(lemma_id, trials, checker(rng, trials)))
    return reports
