import math

import numpy as np
import pytest

from sgdlab.errors import ParameterError
from sgdlab.problems import (PL_SINE_GRID, PL_SINE_MU, NoiseModel,
                             make_convex_lipschitz, make_finite_sum_quadratic,
                             make_pl_nonconvex, make_problem, make_quadratic,
                             problem_ids, register_problem, sample_gradient,
                             validate_problem)


class TestQuadratic:
    def test_identity_spectrum_1d(self):
        p = make_quadratic(1, 1.0, 1.0)
        assert p.f(np.array([1.0])) == 0.5
        assert p.grad(np.array([1.0]))[0] == 1.0

    def test_smoothness_on_probes(self, rng):
        p = make_quadratic(2, 1.0, 4.0, seed=3)
        for _ in range(50):
            x, y = rng.standard_normal(2), rng.standard_normal(2)
            lhs = np.linalg.norm(p.grad(x) - p.grad(y))
            assert lhs <= 4.0 * np.linalg.norm(x - y) * (1 + 1e-12)

    def test_pl_constant_exact_via_eigendecomposition(self, rng):
        # oracle: eigendecomposition of the recorded Hessian certifies that
        # the PL ratio min equals the smallest eigenvalue
        p = make_quadratic(2, 1.0, 4.0, seed=7)
        A = p._matrix
        evals = np.linalg.eigvalsh(A)
        assert math.isclose(evals[0], 1.0, rel_tol=1e-12)
        assert math.isclose(evals[-1], 4.0, rel_tol=1e-12)
        for _ in range(100):
            x = rng.standard_normal(2) * 3
            gap = p.f(x) - p.f_star
            if gap > 0:
                assert 0.5 * float(p.grad(x) @ p.grad(x)) >= p.mu_pl * gap * (1 - 1e-12)

    def test_rejects_mu_above_L(self):
        with pytest.raises(ParameterError):
            make_quadratic(2, 4.0, 1.0)

    def test_probe_validation(self, rng):
        validate_problem(make_quadratic(5, 0.5, 3.0, seed=1), rng)


class TestPLSine:
    def test_global_minimum(self):
        p = make_pl_nonconvex()
        assert p.f(np.zeros(1)) == 0.0
        assert p.grad(np.zeros(1))[0] == 0.0

    def test_value_at_pi(self):
        p = make_pl_nonconvex()
        assert math.isclose(p.f(np.array([math.pi])), math.pi**2, rel_tol=1e-12)
        assert math.isclose(p.grad(np.array([math.pi]))[0], 2 * math.pi, rel_tol=1e-12)

    def test_grid_certified_pl_constant(self):
        lo, hi, n = PL_SINE_GRID
        xs = np.linspace(lo, hi, n)
        f = xs**2 + 3 * np.sin(xs) ** 2
        fp = 2 * xs + 3 * np.sin(2 * xs)
        mask = f > 0
        grid_min = float(np.min(fp[mask] ** 2 / (2 * f[mask])))
        assert PL_SINE_MU <= grid_min <= PL_SINE_MU * 1.01
        assert make_pl_nonconvex().mu_pl == PL_SINE_MU

    def test_probe_validation(self, rng):
        validate_problem(make_pl_nonconvex(), rng)


class TestHuber:
    def test_at_origin(self):
        p = make_convex_lipschitz(3)
        assert p.f(np.zeros(3)) == 0.0
        assert np.all(p.grad(np.zeros(3)) == 0.0)

    def test_far_field_gradient_norm(self, rng):
        p = make_convex_lipschitz(3)
        x = rng.standard_normal(3)
        x *= 50.0 / np.linalg.norm(x)
        assert math.isclose(np.linalg.norm(p.grad(x)), p.G_lip, rel_tol=1e-12)

    def test_gradient_continuity_at_knot(self, rng):
        # finite-difference oracle straddling the transition radius
        p = make_convex_lipschitz(2)
        u = rng.standard_normal(2)
        u /= np.linalg.norm(u)
        h = 1e-7
        for r in (1.0 - 1e-7, 1.0, 1.0 + 1e-7):
            x = r * u
            fd = np.array([
                (p.f(x + h * e) - p.f(x - h * e)) / (2 * h)
                for e in np.eye(2)
            ])
            assert np.linalg.norm(fd - p.grad(x)) <= 1e-6

    def test_probe_validation(self, rng):
        validate_problem(make_convex_lipschitz(4), rng)


class TestRegistry:
    def test_builtin_ids(self):
        assert {"quadratic", "pl-sine", "huber"} <= set(problem_ids())

    def test_register_hook(self):
        register_problem("my-problem", lambda: make_quadratic(1, 1.0, 1.0))
        p = make_problem("my-problem")
        assert p.dim == 1

    def test_unknown_id(self):
        with pytest.raises(ParameterError, match="unknown problem"):
            make_problem("nope")


class TestNoiseModels:
    def test_none_is_exact(self, rng):
        p = make_quadratic(3, 1.0, 2.0)
        x = rng.standard_normal(3)
        g = sample_gradient(p, NoiseModel.none(), x, rng)
        assert np.array_equal(g, p.grad(x))

    def test_unbiasedness_mc(self, rng):
        # empirical mean within 1e-2 of the exact gradient at 1e5 samples
        p = make_quadratic(3, 1.0, 2.0, seed=5)
        x = np.array([1.0, -0.5, 2.0])
        exact = p.grad(x)
        for noise in (NoiseModel.additive_subgaussian(1.0),
                      NoiseModel.bounded_support(1.0),
                      NoiseModel.affine_variance(0.5, 0.5)):
            acc = np.zeros(3)
            n = 100_000
            for _ in range(n):
                acc += noise.apply(exact, x, rng)
            assert np.max(np.abs(acc / n - exact)) <= 1e-2

    def test_affine_variance_law(self, rng):
        p = make_quadratic(3, 1.0, 2.0, seed=5)
        x = np.array([0.3, -0.2, 0.4])
        exact = p.grad(x)
        a, b = 0.7, 0.9
        noise = NoiseModel.affine_variance(a, b)
        n = 100_000
        total = 0.0
        for _ in range(n):
            nu = noise.apply(exact, x, rng) - exact
            total += float(nu @ nu)
        target = a * float(exact @ exact) + b
        assert abs(total / n - target) <= 0.05 * target

    def test_affine_variance_sigma_only(self, rng):
        # a = 0, b = sigma^2: empirical variance matches sigma^2 within 5%
        p = make_quadratic(2, 1.0, 1.0)
        x = np.array([1.0, 1.0])
        exact = p.grad(x)
        noise = NoiseModel.affine_variance(0.0, 4.0)
        n = 100_000
        total = sum(float((noise.apply(exact, x, rng) - exact) ** 2 @ np.ones(2))
                    for _ in range(n))
        assert abs(total / n - 4.0) <= 0.2

    def test_bounded_support_is_clamped(self, rng):
        p = make_quadratic(2, 1.0, 2.0)
        x = np.array([1.0, -1.0])
        exact = p.grad(x)
        noise = NoiseModel.bounded_support(1.0)
        worst = max(float(np.linalg.norm(noise.apply(exact, x, rng) - exact))
                    for _ in range(100_000))
        assert worst <= 1.0

    def test_subgaussian_mgf(self, rng):
        # E[exp(||nu||^2 / sigma^2)] <= e (1 + 1e-2) by MC
        sigma = 1.5
        for d in (1, 3, 10):
            noise = NoiseModel.additive_subgaussian(sigma)
            exact = np.zeros(d)
            x = np.zeros(d)
            n = 100_000
            total = 0.0
            for _ in range(n):
                nu = noise.apply(exact, x, rng)
                total += math.exp(float(nu @ nu) / sigma**2)
            assert total / n <= math.e * 1.01

    def test_subgaussian_max_tail_bound(self, rng):
        # empirical check of the tail bound: over T draws,
        # max ||nu||^2 <= sigma^2 ln(T e / delta) fails with frequency <= delta
        sigma, T, delta = 1.0, 50, 0.1
        noise = NoiseModel.additive_subgaussian(sigma)
        exact = np.zeros(4)
        threshold = sigma**2 * math.log(T * math.e / delta)
        streams, hits = 2000, 0
        for _ in range(streams):
            worst = max(float(np.sum(noise.apply(exact, exact, rng) ** 2))
                        for _ in range(T))
            hits += worst > threshold
        assert hits / streams <= delta

    def test_interpolation_components_share_minimizer(self):
        p = make_finite_sum_quadratic(4, n_components=10, seed=2)
        for comp in p.components:
            assert np.allclose(comp(np.zeros(4)), 0.0)

    def test_interpolation_unbiased(self, rng):
        p = make_finite_sum_quadratic(3, n_components=5, seed=2)
        noise = NoiseModel.finite_sum_interpolation(p.components)
        x = np.array([1.0, 2.0, -1.0])
        n = 100_000
        acc = np.zeros(3)
        for _ in range(n):
            acc += noise.apply(p.grad(x), x, rng)
        assert np.max(np.abs(acc / n - p.grad(x))) <= 1e-2 * max(1, np.max(np.abs(p.grad(x))))

    def test_gradient_stream_determinism(self):
        p = make_quadratic(3, 1.0, 2.0, seed=5)
        noise = NoiseModel.additive_subgaussian(1.0)
        x = np.array([1.0, 2.0, 3.0])

        def stream(seed):
            r = np.random.default_rng(seed)
            return [sample_gradient(p, noise, x, r) for _ in range(10)]

        for g1, g2 in zip(stream(7), stream(7)):
            assert np.array_equal(g1, g2)

    def test_smooth_gap_bound_on_probes(self, rng):
        # ||grad||^2 <= 2 L (f - f*) whenever both constants are recorded
        for p in (make_quadratic(4, 1.0, 4.0, seed=1), make_pl_nonconvex(),
                  make_convex_lipschitz(3)):
            for _ in range(200):
                x = 3 * rng.standard_normal(p.dim)
                g = p.grad(x)
                assert float(g @ g) <= 2 * p.L_smooth * (p.f(x) - p.f_star) * (1 + 1e-9) + 1e-12

    def test_negative_params_rejected(self):
        with pytest.raises(ParameterError):
            NoiseModel.additive_subgaussian(-1.0)
        with pytest.raises(ParameterError):
            NoiseModel.affine_variance(-0.1, 0.0)
        with pytest.raises(ParameterError):
            NoiseModel.finite_sum_interpolation([])
