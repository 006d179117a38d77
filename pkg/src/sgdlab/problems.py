"""Test objectives with exact oracles and stochastic-gradient noise models.

Every problem carries exact value/gradient callables plus whatever constants
are known for it (smoothness L, PL constant mu, Lipschitz bound G, optimum).
Noise models turn the exact gradient into an unbiased stochastic one with a
declared variance law; each sampler is constructed so the law holds exactly,
not just asymptotically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ParameterError

__all__ = [
    "Problem",
    "NoiseModel",
    "as_point",
    "sample_gradient",
    "make_quadratic",
    "make_pl_nonconvex",
    "make_convex_lipschitz",
    "make_finite_sum_quadratic",
    "make_problem",
    "register_problem",
    "validate_problem",
    "PL_SINE_MU",
    "PL_SINE_GRID",
]

# Grid certification of the PL constant of f(x) = x^2 + 3 sin^2 x: the ratio
# f'(x)^2 / (2 f(x)) was minimized over PL_SINE_GRID; the minimum 0.1755309859
# occurs near x = +/-2.2017 (the ratio tends to 8 at 0 and to 2 at infinity,
# so the grid interval contains the global infimum).  PL_SINE_MU rounds the
# grid minimum down so the recorded constant stays a valid certificate.
PL_SINE_GRID = (-10.0, 10.0, 2_000_001)
PL_SINE_MU = 0.1755


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    """Return ``x`` as a finite float64 1-D vector, validating shape."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1:
        raise ParameterError(f"point must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ParameterError(f"point has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("point has non-finite entries")
    return arr


@dataclass(frozen=True)
class Problem:
    """An objective with exact oracles and known structural constants."""

    dim: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    f_star: Optional[float] = None
    x_star: Optional[np.ndarray] = None
    L_smooth: Optional[float] = None
    mu_pl: Optional[float] = None
    G_lip: Optional[float] = None
    convex: bool = False
    smooth: bool = False
    pl: bool = False
    lipschitz: bool = False
    # Component gradients of a finite-sum objective, when one exists.
    components: Optional[tuple] = None


@dataclass(frozen=True)
class NoiseModel:
    """Recipe turning an exact gradient into an unbiased stochastic one.

    Kinds and their variance laws:

    - ``none``: g = grad(x) exactly.
    - ``subgaussian``: isotropic Gaussian with per-coordinate variance
      s^2 = sigma^2 (1 - exp(-2/d)) / 2, the largest scale for which the
      chi-square moment identity gives E[exp(||g - grad||^2 / sigma^2)] = e.
    - ``bounded``: uniform direction scaled by a radius uniform on [0, S],
      so ||g - grad|| <= S holds deterministically.
    - ``affine``: nu = sqrt(a)||grad|| u1 e1 + sqrt(b) u2 e2 with independent
      uniform unit vectors u and Rademacher signs e, which makes
      E||g - grad||^2 = a ||grad||^2 + b exact.
    - ``interpolation``: the gradient of one uniformly drawn component of a
      finite sum whose components share the global minimizer.
    """

    kind: str = "none"
    sigma: float = 0.0
    S: float = 0.0
    a: float = 0.0
    b: float = 0.0
    components: Optional[tuple] = None

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls(kind="none")

    @classmethod
    def additive_subgaussian(cls, sigma: float) -> "NoiseModel":
        if sigma < 0:
            raise ParameterError("sigma must be nonnegative")
        return cls(kind="subgaussian", sigma=float(sigma))

    @classmethod
    def bounded_support(cls, S: float) -> "NoiseModel":
        if S < 0:
            raise ParameterError("S must be nonnegative")
        return cls(kind="bounded", S=float(S))

    @classmethod
    def affine_variance(cls, a: float, b: float) -> "NoiseModel":
        if a < 0 or b < 0:
            raise ParameterError("a and b must be nonnegative")
        return cls(kind="affine", a=float(a), b=float(b))

    @classmethod
    def finite_sum_interpolation(cls, components: Sequence[Callable]) -> "NoiseModel":
        if len(components) == 0:
            raise ParameterError("need at least one component")
        return cls(kind="interpolation", components=tuple(components))

    def apply(self, exact_grad: np.ndarray, x: np.ndarray,
              rng: np.random.Generator) -> np.ndarray:
        """Sample one stochastic gradient given the exact gradient at x."""
        if self.kind == "none":
            return exact_grad
        d = exact_grad.shape[0]
        if self.kind == "subgaussian":
            if self.sigma == 0.0:
                return exact_grad
            s = self.sigma * math.sqrt((1.0 - math.exp(-2.0 / d)) / 2.0)
            return exact_grad + s * rng.standard_normal(d)
        if self.kind == "bounded":
            if self.S == 0.0:
                return exact_grad
            u = _unit_vector(rng, d)
            r = rng.uniform(0.0, self.S)
            return exact_grad + r * u
        if self.kind == "affine":
            nu = np.zeros(d)
            if self.a > 0.0:
                u1 = _unit_vector(rng, d)
                e1 = _rademacher(rng)
                nu = nu + math.sqrt(self.a) * float(np.linalg.norm(exact_grad)) * e1 * u1
            if self.b > 0.0:
                u2 = _unit_vector(rng, d)
                e2 = _rademacher(rng)
                nu = nu + math.sqrt(self.b) * e2 * u2
            return exact_grad + nu
        if self.kind == "interpolation":
            i = int(rng.integers(len(self.components)))
            return np.asarray(self.components[i](x), dtype=np.float64)
        raise ParameterError(f"unknown noise kind {self.kind!r}")


def _unit_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    n = np.linalg.norm(v)
    while n == 0.0:  # pragma: no cover - measure zero
        v = rng.standard_normal(d)
        n = np.linalg.norm(v)
    return v / n


def _rademacher(rng: np.random.Generator) -> float:
    return 1.0 if rng.random() < 0.5 else -1.0


def sample_gradient(problem: Problem, noise: NoiseModel, x,
                    rng: np.random.Generator) -> np.ndarray:
    """Unbiased stochastic gradient of ``problem`` at ``x``.

    Deterministic given (rng state, x): identical seeds and call sequences
    produce bit-identical gradient streams.
    """
    x = as_point(x, problem.dim)
    return noise.apply(np.asarray(problem.grad(x), dtype=np.float64), x, rng)


# ---------------------------------------------------------------------------
# Built-in instances


def make_quadratic(dim: int, mu: float, L: float, seed: int = 0) -> Problem:
    """Quadratic f(x) = x'Ax/2 with spectrum spread over [mu, L].

    The Hessian is Q diag(linspace(mu, L, dim)) Q' for a seeded random
    rotation Q, so the smoothness constant is exactly L and the PL constant
    exactly mu.  f* = 0 at x* = 0.
    """
    if not (0 < mu <= L):
        raise ParameterError("need 0 < mu <= L")
    if dim < 1:
        raise ParameterError("dim must be >= 1")
    if dim == 1:
        if mu != L:
            raise ParameterError("a 1-D spectrum cannot contain both mu and L; pass mu == L")
        A = np.array([[float(L)]])
    else:
        eigs = np.linspace(mu, L, dim)
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        A = Q @ np.diag(eigs) @ Q.T
        A = (A + A.T) / 2.0

    def f(x: np.ndarray) -> float:
        return 0.5 * float(x @ (A @ x))

    def grad(x: np.ndarray) -> np.ndarray:
        return A @ x

    p = Problem(
        dim=dim, f=f, grad=grad, name="quadratic",
        f_star=0.0, x_star=np.zeros(dim),
        L_smooth=float(L), mu_pl=float(mu),
        convex=True, smooth=True, pl=True, lipschitz=False,
    )
    object.__setattr__(p, "_matrix", A)  # exposed for exact-arithmetic oracles
    return p


def make_pl_nonconvex() -> Problem:
    """1-D non-convex PL witness f(x) = x^2 + 3 sin^2 x.

    f* = 0 at x* = 0, smoothness constant 8 (f'' = 2 + 6 cos 2x), and the
    grid-certified PL constant PL_SINE_MU.
    """

    def f(x: np.ndarray) -> float:
        v = float(x[0])
        return v * v + 3.0 * math.sin(v) ** 2

    def grad(x: np.ndarray) -> np.ndarray:
        v = float(x[0])
        return np.array([2.0 * v + 3.0 * math.sin(2.0 * v)])

    return Problem(
        dim=1, f=f, grad=grad, name="pl-sine",
        f_star=0.0, x_star=np.zeros(1),
        L_smooth=8.0, mu_pl=PL_SINE_MU,
        convex=False, smooth=True, pl=True, lipschitz=False,
    )


def make_convex_lipschitz(dim: int, delta: float = 1.0) -> Problem:
    """Huber-type smoothing of ||x||: quadratic inside radius delta, linear outside.

    Convex, 1-Lipschitz (G = 1), (1/delta)-smooth, minimized at 0 with f* = 0.
    Not PL: the far field has constant gradient norm while the gap grows.
    """
    if dim < 1:
        raise ParameterError("dim must be >= 1")
    if delta <= 0:
        raise ParameterError("delta must be positive")

    def f(x: np.ndarray) -> float:
        r = float(np.linalg.norm(x))
        if r <= delta:
            return 0.5 * r * r / delta
        return r - delta / 2.0

    def grad(x: np.ndarray) -> np.ndarray:
        r = float(np.linalg.norm(x))
        if r <= delta:
            return x / delta
        return x / r

    return Problem(
        dim=dim, f=f, grad=grad, name="huber",
        f_star=0.0, x_star=np.zeros(dim),
        L_smooth=1.0 / delta, G_lip=1.0,
        convex=True, smooth=True, pl=False, lipschitz=True,
    )


def make_finite_sum_quadratic(dim: int, n_components: int = 10,
                              seed: int = 0) -> Problem:
    """Finite sum of quadratics sharing the minimizer x* = 0.

    F(x) = (1/n) sum_i x'A_i x / 2 with random positive definite A_i.  Every
    component is minimized at the origin, so sampling one component per step
    realizes the interpolation regime.  Pair with
    ``NoiseModel.finite_sum_interpolation(problem.components)``.
    """
    if dim < 1 or n_components < 1:
        raise ParameterError("dim and n_components must be >= 1")
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(n_components):
        M = rng.standard_normal((dim, dim))
        A = M @ M.T / dim + 0.5 * np.eye(dim)
        mats.append((A + A.T) / 2.0)
    Abar = np.mean(mats, axis=0)
    L = max(float(np.linalg.eigvalsh(A)[-1]) for A in mats)
    mu = float(np.linalg.eigvalsh(Abar)[0])

    def f(x: np.ndarray) -> float:
        return 0.5 * float(x @ (Abar @ x))

    def grad(x: np.ndarray) -> np.ndarray:
        return Abar @ x

    components = tuple((lambda x, A=A: A @ x) for A in mats)
    return Problem(
        dim=dim, f=f, grad=grad, name="finite-sum-quadratic",
        f_star=0.0, x_star=np.zeros(dim),
        L_smooth=L, mu_pl=mu,
        convex=True, smooth=True, pl=True, lipschitz=False,
        components=components,
    )


_REGISTRY: dict = {
    "quadratic": make_quadratic,
    "pl-sine": make_pl_nonconvex,
    "huber": make_convex_lipschitz,
    "finite-sum-quadratic": make_finite_sum_quadratic,
}


def register_problem(problem_id: str, factory: Callable[..., Problem]) -> None:
    """Register a custom problem factory addressable by string id."""
    if not callable(factory):
        raise ParameterError("factory must be callable")
    _REGISTRY[problem_id] = factory


def problem_ids() -> list:
    return sorted(_REGISTRY)


def make_problem(problem_id: str, **params) -> Problem:
    """Instantiate a registered problem by id."""
    try:
        factory = _REGISTRY[problem_id]
    except KeyError:
        raise ParameterError(
            f"unknown problem id {problem_id!r}; known: {problem_ids()}"
        ) from None
    return factory(**params)


def validate_problem(problem: Problem, rng: np.random.Generator,
                     probes: int = 50, scale: float = 3.0) -> None:
    """Probe-check a problem's declared constants on random points.

    Raises AssertionError on the first violated declaration.  Checks, where
    the relevant constant is present: f >= f_star, gradient-vs-central
    finite differences (1e-6 relative), smoothness of the gradient on probe
    pairs, the PL inequality, and ||grad|| <= 2 L_smooth (f - f_star)
    (which smoothness implies whenever f_star is the minimum).
    """
    d = problem.dim
    for _ in range(probes):
        x = scale * rng.standard_normal(d)
        fx = problem.f(x)
        gx = np.asarray(problem.grad(x), dtype=np.float64)
        if problem.f_star is not None:
            assert fx >= problem.f_star - 1e-12, f"f below f_star at {x}"
        # central finite differences
        h = 1e-6 * max(1.0, float(np.max(np.abs(x))))
        fd = np.empty(d)
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            fd[j] = (problem.f(x + e) - problem.f(x - e)) / (2.0 * h)
        err = np.max(np.abs(fd - gx)) / max(1.0, float(np.max(np.abs(gx))))
        assert err <= 1e-6, f"finite differences disagree with grad: {err}"
        if problem.L_smooth is not None:
            y = scale * rng.standard_normal(d)
            gy = np.asarray(problem.grad(y), dtype=np.float64)
            lhs = float(np.linalg.norm(gx - gy))
            rhs = problem.L_smooth * float(np.linalg.norm(x - y))
            assert lhs <= rhs * (1 + 1e-9) + 1e-12, "smoothness violated"
            if problem.f_star is not None:
                assert float(gx @ gx) <= 2 * problem.L_smooth * (fx - problem.f_star) * (
                    1 + 1e-9
                ) + 1e-9, "||grad||^2 <= 2 L (f - f*) violated"
        if problem.mu_pl is not None and problem.f_star is not None:
            lhs = 0.5 * float(gx @ gx)
            rhs = problem.mu_pl * (fx - problem.f_star)
            assert lhs >= rhs * (1 - 1e-9) - 1e-12, "PL inequality violated"
        if problem.G_lip is not None:
            assert float(np.linalg.norm(gx)) <= problem.G_lip * (1 + 1e-9), "G_lip violated"
