"""Deterministic worst-case instance for the last iterate of constant-momentum SGD.

The instance is a piecewise-linear function f(x) = max_i h_i' x over T+1 rows
built from two positive sequences a_j, b_j.  Running momentum SGD from the
origin with step c t^(-alpha) and feeding row h_t as the subgradient at step
t drives the final iterate to a value at least of order ln T / T^alpha.  The
module materializes the instance, replays the trajectory, and verifies every
structural claim along the way, emitting a machine-readable certificate.

Two bounds are reported: the corrected one with constant 1/32 (which the
trajectory algebra actually yields, and which the certificate enforces) and
the looser 1/4 variant (reported informationally; it fails already at T = 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from .errors import ParameterError

__all__ = [
    "LowerBoundInstance",
    "AdversarialTrajectory",
    "CheckResult",
    "LowerBoundCertificate",
    "make_instance",
    "eval_f",
    "run_lower_bound",
    "exact_trajectory",
    "corrected_bound",
    "stated_bound",
]

FULL_TRAJECTORY_CAP = 200  # store/check everything up to this horizon


@dataclass(frozen=True)
class LowerBoundInstance:
    """Rows h_i with h_{i,j} = a_j (j < i), -b_j (j = i), 0 (j > i), i <= T.

    Row T+1 is (a_1, ..., a_T).  b_j = L j^alpha / (2 T^alpha) and
    a_j = L (1 - beta) / (8 (T - j + 1)).  The diagonal entry -b_i is applied
    for every i <= T: the row-norm computation below relies on b_T, and the
    trajectory algebra needs the diagonal at i = T.
    """

    T: int
    L: float
    beta: float
    alpha_exp: float
    c: float
    a: np.ndarray  # a[j-1] = a_j, length T
    b: np.ndarray  # b[j-1] = b_j, length T

    def eta(self, t: int) -> float:
        return self.c * t ** (-self.alpha_exp)

    def row(self, i: int) -> np.ndarray:
        """Materialize h_i (1-based i in 1..T+1)."""
        if not (1 <= i <= self.T + 1):
            raise ParameterError(f"row index {i} outside 1..{self.T + 1}")
        h = np.zeros(self.T)
        h[: i - 1] = self.a[: i - 1]
        if i <= self.T:
            h[i - 1] = -self.b[i - 1]
        return h

    def rows(self) -> np.ndarray:
        """All rows stacked; only sensible for small T."""
        return np.stack([self.row(i) for i in range(1, self.T + 2)])

    def row_norms_sq(self) -> np.ndarray:
        """||h_i||^2 for i = 1..T+1 without materializing rows."""
        prefix = np.concatenate(([0.0], np.cumsum(self.a**2)))
        norms = prefix[: self.T] + self.b**2  # rows 1..T
        return np.concatenate((norms, [prefix[self.T]]))


@dataclass
class AdversarialTrajectory:
    """Iterates of the adversarial replay: z_1 = 0, subgradient h_t at step t."""

    eta: np.ndarray
    z_T: np.ndarray
    z_last: np.ndarray              # z_{T+1}
    subgradient_indices: np.ndarray  # always 1..T by construction
    z_full: Optional[np.ndarray] = None  # z_1..z_{T+1} rows, small T only


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class LowerBoundCertificate:
    T: int
    L: float
    beta: float
    alpha_exp: float
    c: float
    f_last: float        # f(z_{T+1}), the quantity the bound certifies
    f_z_T: float
    bound: float         # corrected constant (1/32)
    bound_stated: float  # 1/4 variant, informational only
    ratio: float
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.name.startswith("info"))

    def as_dict(self) -> dict:
        return {
            "T": self.T, "L": self.L, "beta": self.beta,
            "alpha": self.alpha_exp, "c": self.c,
            "f_last": self.f_last, "f_z_T": self.f_z_T,
            "bound": self.bound, "bound_stated": self.bound_stated,
            "ratio": self.ratio, "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
        }


def corrected_bound(T: int, L: float, beta: float, alpha_exp: float, c: float) -> float:
    return L**2 * (1 - beta) ** 2 * c * math.log(T) / (32.0 * T**alpha_exp)


def stated_bound(T: int, L: float, beta: float, alpha_exp: float, c: float) -> float:
    return L**2 * (1 - beta) ** 2 * c * math.log(T) / (4.0 * T**alpha_exp)


def make_instance(T: int, L: float, beta: float, alpha_exp: float,
                  c: float) -> LowerBoundInstance:
    """Build and structurally validate the worst-case instance."""
    if T < 2:
        raise ParameterError("T must be >= 2")
    if not (0.0 <= beta < 1.0):
        raise ParameterError("beta must be in [0, 1); beta = 1 never moves")
    if not (0.0 <= alpha_exp <= 0.5):
        raise ParameterError("alpha_exp must be in [0, 1/2]")
    if L <= 0 or c <= 0:
        raise ParameterError("L and c must be positive")
    j = np.arange(1, T + 1, dtype=np.float64)
    b = L * j**alpha_exp / (2.0 * T**alpha_exp)
    a = L * (1.0 - beta) / (8.0 * (T - j + 1.0))
    inst = LowerBoundInstance(T=T, L=float(L), beta=float(beta),
                              alpha_exp=float(alpha_exp), c=float(c), a=a, b=b)
    norms = inst.row_norms_sq()
    if not np.all(norms <= L**2 * (1 + 1e-12)):
        raise ParameterError("instance rows exceed the Lipschitz budget")
    return inst


def eval_f(instance: LowerBoundInstance, x) -> tuple:
    """(max_i h_i' x, smallest index attaining the max), index 1-based.

    Uses prefix sums of a_j x_j, so one evaluation is O(T) instead of O(T^2).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (instance.T,):
        raise ParameterError(f"point must have dimension {instance.T}")
    vals = _row_values(instance, x)
    idx = int(np.argmax(vals))  # first maximizer = smallest index
    return float(vals[idx]), idx + 1


def _row_values(instance: LowerBoundInstance, x: np.ndarray) -> np.ndarray:
    prefix = np.concatenate(([0.0], np.cumsum(instance.a * x)))
    vals = np.empty(instance.T + 1)
    vals[: instance.T] = prefix[: instance.T] - instance.b * x
    vals[instance.T] = prefix[instance.T]
    return vals


def _check_points(T: int) -> np.ndarray:
    """Steps at which the argmax structure is verified (all, for small T)."""
    if T <= FULL_TRAJECTORY_CAP:
        return np.arange(1, T + 2)
    pts = np.unique(np.concatenate([
        np.arange(1, 6),
        np.geomspace(2, T, 60).astype(np.int64),
        np.arange(T - 2, T + 2),
    ]))
    return pts[(pts >= 1) & (pts <= T + 1)]


def run_lower_bound(instance: LowerBoundInstance) -> tuple:
    """Replay the adversarial trajectory and certify every claim.

    Checked along the way, with exact float comparisons where the claim is
    exact: (a) z_{t,j} = 0 for t <= j, (b) z_{t,j} >= L(1-beta)c / (4 T^alpha)
    for t > j, (c) the smallest maximizer of f at z_t is t itself with the
    whole tail {t..T+1} tied, so feeding h_t is a legal subgradient choice,
    and (d) f(z_{T+1}) >= L^2 (1-beta)^2 c ln T / (32 T^alpha).  Returns the
    trajectory and the certificate.
    """
    T, beta = instance.T, instance.beta
    eta = np.array([instance.eta(t) for t in range(1, T + 1)])
    z = np.zeros(T)
    M = np.zeros(T)  # sum_{i<=t} beta^{t-i} h_i
    z_lower = instance.L * (1 - beta) * instance.c / (4.0 * T**instance.alpha_exp)
    tol = 1e-12

    check_at = set(int(v) for v in _check_points(T))
    keep_full = T <= FULL_TRAJECTORY_CAP
    zs = [z.copy()] if keep_full else None

    zero_ok = True
    zero_detail = ""
    lower_ok = True
    lower_detail = ""
    argmax_ok = True
    argmax_detail = ""
    z_T = None

    for t in range(1, T + 2):
        # claims about the state z_t
        if t <= T and np.any(z[t - 1:] != 0.0):
            if zero_ok:
                j = t + int(np.nonzero(z[t - 1:] != 0.0)[0][0])
                zero_detail = f"z_(t={t}, j={j}) nonzero"
            zero_ok = False
        head = z[: min(t, T + 1) - 1]
        if head.size and np.any(head < z_lower * (1 - 1e-12) - tol):
            if lower_ok:
                j = 1 + int(np.nonzero(head < z_lower * (1 - 1e-12) - tol)[0][0])
                lower_detail = f"z_(t={t}, j={j}) = {head[j - 1]!r} below {z_lower!r}"
            lower_ok = False
        if t in check_at:
            vals = _row_values(instance, z)
            expect = t if t <= T else T + 1
            idx = int(np.argmax(vals)) + 1
            tail_tied = bool(np.all(vals[expect - 1:] == vals[expect - 1])) if t <= T else True
            if idx != expect or not tail_tied:
                if argmax_ok:
                    argmax_detail = f"at t={t}: argmax {idx}, expected {expect}"
                argmax_ok = False
        if t == T:
            z_T = z.copy()
        if t == T + 1:
            break
        # momentum subgradient step with h_t
        M *= beta
        M[: t - 1] += instance.a[: t - 1]
        M[t - 1] -= instance.b[t - 1]
        z = z - (1.0 - beta) * eta[t - 1] * M
        if keep_full:
            zs.append(z.copy())

    f_last, idx_last = eval_f(instance, z)
    f_z_T, _ = eval_f(instance, z_T)
    bound = corrected_bound(T, instance.L, beta, instance.alpha_exp, instance.c)
    bound4 = stated_bound(T, instance.L, beta, instance.alpha_exp, instance.c)
    norms_ok = bool(np.all(instance.row_norms_sq() <= instance.L**2 * (1 + 1e-12)))
    bound_ok = f_last >= bound * (1 - 1e-12)

    checks = [
        CheckResult("z_zero_for_t_le_j", zero_ok, zero_detail),
        CheckResult("z_lower_bound", lower_ok,
                    lower_detail or f"threshold {z_lower!r}"),
        CheckResult("argmax_is_t_with_tail_tie", argmax_ok, argmax_detail),
        CheckResult("final_argmax_is_last_row", idx_last == T + 1,
                    f"argmax {idx_last}"),
        CheckResult("rows_within_lipschitz_budget", norms_ok),
        CheckResult("gap_ge_corrected_bound", bound_ok,
                    f"f(z_(T+1)) = {f_last!r} vs {bound!r}"),
        CheckResult("info_gap_ge_stated_bound", f_last >= bound4,
                    f"constant 1/4 variant: {f_last!r} vs {bound4!r}"),
    ]
    traj = AdversarialTrajectory(
        eta=eta, z_T=z_T, z_last=z,
        subgradient_indices=np.arange(1, T + 1),
        z_full=np.stack(zs) if keep_full else None,
    )
    cert = LowerBoundCertificate(
        T=T, L=instance.L, beta=beta, alpha_exp=instance.alpha_exp,
        c=instance.c, f_last=f_last, f_z_T=f_z_T, bound=bound,
        bound_stated=bound4, ratio=f_last / bound, checks=checks,
    )
    return traj, cert


# ---------------------------------------------------------------------------
# Exact-arithmetic oracle (anchors the float implementation for small T)


def exact_trajectory(T: int, L, beta, alpha_exp: float, c, dps: int = 60):
    """Replay the trajectory in exact or high-precision arithmetic.

    For alpha_exp = 0 all quantities are rational and the replay runs in
    ``fractions.Fraction`` (float inputs are taken at their exact binary
    values, so this mirrors real-number arithmetic on the same instance).
    For alpha_exp > 0 the steps involve irrational powers and the replay
    runs in mpmath with ``dps`` digits.  Returns (z rows as a list of lists,
    f(z_T), f(z_{T+1})).

    The oracle recomputes a_j, b_j, eta_t from scratch and never touches the
    float implementation.
    """
    if T < 2 or T > 200:
        raise ParameterError("exact oracle is meant for 2 <= T <= 200")
    if alpha_exp == 0:
        one = Fraction(1)
        Lq, betaq, cq = Fraction(L), Fraction(beta), Fraction(c)
        b = [Lq / 2 for _ in range(T)]
        a = [Lq * (one - betaq) / (8 * (T - j + 1)) for j in range(1, T + 1)]
        eta = [cq for _ in range(T)]
        return _replay_exact(T, a, b, eta, betaq, Fraction(0))
    import mpmath

    old_dps = mpmath.mp.dps
    mpmath.mp.dps = dps
    try:
        Lq, betaq, cq = mpmath.mpf(L), mpmath.mpf(beta), mpmath.mpf(c)
        b = [Lq * mpmath.power(j, alpha_exp) / (2 * mpmath.power(T, alpha_exp))
             for j in range(1, T + 1)]
        a = [Lq * (1 - betaq) / (8 * (T - j + 1)) for j in range(1, T + 1)]
        eta = [cq * mpmath.power(t, -alpha_exp) for t in range(1, T + 1)]
        return _replay_exact(T, a, b, eta, betaq, mpmath.mpf(0))
    finally:
        mpmath.mp.dps = old_dps


def _replay_exact(T: int, a, b, eta, betaq, zero):
    def f_of(z):
        prefix = zero
        vals = []
        for i in range(1, T + 1):
            vals.append(prefix - b[i - 1] * z[i - 1])
            prefix = prefix + a[i - 1] * z[i - 1]
        vals.append(prefix)
        best = vals[0]
        for v in vals[1:]:
            if v > best:
                best = v
        return best

    z = [zero] * T
    M = [zero] * T
    zs = [list(z)]
    f_z_T = None
    for t in range(1, T + 1):
        if t == T:
            f_z_T = f_of(z)
        for j in range(T):
            M[j] = betaq * M[j]
        for j in range(t - 1):
            M[j] = M[j] + a[j]
        M[t - 1] = M[t - 1] - b[t - 1]
        step = (1 - betaq) * eta[t - 1]
        z = [z[j] - step * M[j] for j in range(T)]
        zs.append(list(z))
    return zs, f_z_T, f_of(z)
