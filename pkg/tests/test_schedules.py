import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdlab.errors import ContractError, ParameterError
from sgdlab.schedules import (Constant, Cosine, CosineRestart,
                              DelayedAdaGradCoord, DelayedAdaGradGlobal,
                              Exponential, FTRLGammaAdaCoord,
                              FTRLGammaAdaGlobal, FTRLGammaConstT,
                              FTRLGammaSqrtT, PolyPL, PolySqrt,
                              cosine_restart_plan,
                              exponential_alpha_from_horizon,
                              schedule_from_config)


def drive(schedule, grads):
    """Feed a gradient stream, returning the eta read at each step."""
    etas = []
    for t, g in enumerate(grads, start=1):
        etas.append(schedule.step_size(t))
        schedule.observe(g)
    return etas


class TestDelayedAdaGrad:
    def test_first_step_empty_sum(self):
        s = DelayedAdaGradGlobal(1.0, 1.0, 0.0)
        assert s.step_size(1) == 1.0

    def test_global_after_one_gradient(self):
        s = DelayedAdaGradGlobal(1.0, 1.0, 0.0)
        s.step_size(1)
        s.observe(np.array([1.0, np.sqrt(2.0)]))  # ||g||^2 = 3
        assert s.step_size(2) == 0.5

    def test_global_with_eps_half(self):
        s = DelayedAdaGradGlobal(1.0, 1.0, 0.5)
        s.step_size(1)
        s.observe(np.array([1.0, 1.0, 1.0]))  # ||g||^2 = 3 exactly
        assert s.step_size(2) == 0.25  # (1+3)^(1/2+1/2) = 4

    def test_running_sum_two_observes(self):
        s = DelayedAdaGradGlobal(2.0, 1.0, 0.1)
        drive(s, [np.array([1.0, 1.0, 1.0]), np.array([1.0, 2.0])])
        assert s.accumulator == 8.0
        assert math.isclose(s.step_size(3), 2.0 / 9.0 ** 0.6, rel_tol=1e-15)

    def test_coord_accumulator(self):
        s = DelayedAdaGradCoord(1.0, 1.0, 0.0)
        s.step_size(1)
        s.observe(np.array([1.0, np.sqrt(2.0)]))
        assert np.allclose(s.accumulator, [1.0, 2.0])
        assert np.allclose(s.step_size(2), [1 / np.sqrt(2.0), 1 / np.sqrt(3.0)])

    def test_zero_gradient_keeps_eta(self):
        s = DelayedAdaGradGlobal(1.0, 2.0, 0.25)
        e1 = s.step_size(1)
        s.observe(np.zeros(3))
        assert s.step_size(2) == e1

    def test_requires_positive_beta(self):
        with pytest.raises(ParameterError):
            DelayedAdaGradGlobal(1.0, 0.0, 0.0)
        with pytest.raises(ParameterError):
            DelayedAdaGradCoord(1.0, 1.0, 0.6)

    @given(st.integers(0, 48), st.floats(0.1, 10.0))
    @settings(max_examples=25, deadline=None)
    def test_delayed_contract_property(self, k, delta):
        # perturbing g_t leaves eta_1..eta_t unchanged, only eta_{t+1}.. moves
        rng = np.random.default_rng(99)
        grads = [rng.standard_normal(3) for _ in range(50)]
        base = drive(DelayedAdaGradGlobal(1.0, 1.0, 0.1), grads)
        bumped = [g.copy() for g in grads]
        bumped[k] = bumped[k] * (1.0 + delta)  # strictly inflates ||g_t||^2
        pert = drive(DelayedAdaGradGlobal(1.0, 1.0, 0.1), bumped)
        assert base[: k + 1] == pert[: k + 1]
        assert pert[k + 1] < base[k + 1]

    def test_nonincreasing(self):
        rng = np.random.default_rng(0)
        for s in (DelayedAdaGradGlobal(1.0, 1.0, 0.0),
                  DelayedAdaGradCoord(1.0, 1.0, 0.25)):
            etas = drive(s, [rng.standard_normal(4) for _ in range(100)])
            for a, b in zip(etas, etas[1:]):
                assert np.all(np.asarray(b) <= np.asarray(a))

    def test_robbins_monro_sum_of_squares_unbounded(self):
        # with a bounded gradient stream the partial sums of eta_t^2 keep
        # growing by ~log factors each decade: no plateau up to N = 1e6
        alpha, beta, G = 1.0, 1.0, 2.0
        t = np.arange(1, 10**6 + 1, dtype=np.float64)
        eta_sq = alpha**2 / (beta + (t - 1) * G**2)  # closed form, constant stream
        csum = np.cumsum(eta_sq)
        checkpoints = [10**k for k in range(2, 7)]
        increments = np.diff([csum[c - 1] for c in checkpoints])
        expected = alpha**2 / G**2 * math.log(10.0)
        assert np.all(increments > 0.5 * expected)
        # the schedule object agrees with the closed form on a prefix
        s = DelayedAdaGradGlobal(alpha, beta, 0.0)
        etas = drive(s, [np.array([G]) for _ in range(1000)])
        assert np.allclose(np.array(etas) ** 2, eta_sq[:1000], rtol=1e-12)


class TestContract:
    def test_step_size_wrong_t(self):
        s = DelayedAdaGradGlobal(1.0, 1.0, 0.0)
        with pytest.raises(ContractError):
            s.step_size(2)
        with pytest.raises(ContractError):
            s.step_size(0)

    def test_observe_before_read(self):
        s = Constant(1.0)
        with pytest.raises(ContractError):
            s.observe(np.ones(2))

    def test_double_observe(self):
        s = Constant(1.0)
        s.step_size(1)
        s.observe(np.ones(2))
        with pytest.raises(ContractError):
            s.observe(np.ones(2))

    def test_beyond_horizon(self):
        s = Cosine(1.0, 4)
        for t in range(1, 5):
            s.step_size(t)
            s.observe(np.ones(1))
        with pytest.raises(ContractError):
            s.step_size(5)

    def test_clone_forks_state(self):
        s = DelayedAdaGradGlobal(1.0, 1.0, 0.0)
        s.step_size(1)
        s.observe(np.array([2.0]))
        c = s.clone()
        s.step_size(2)
        s.observe(np.array([10.0]))
        assert c.step_size(2) == 1.0 / math.sqrt(5.0)


class TestSimpleRules:
    def test_constant_equals_poly_zero(self):
        c, p = Constant(0.3), PolySqrt(0.3, 0.0)
        for t in range(1, 10):
            assert c.step_size(t) == p.step_size(t)
            c.observe(np.ones(1))
            p.observe(np.ones(1))

    def test_poly_pl_schedule(self):
        s = PolyPL(L=4.0, a=0.0, mu=1.0)
        vals = drive(s, [np.ones(1)] * 50)
        for t, v in enumerate(vals, start=1):
            assert v == min(1 / 4.0, (2 * t + 1) / (t + 1.0) ** 2)

    def test_exponential_geometric(self):
        s = Exponential(1.0, alpha=0.5)
        assert drive(s, [np.ones(1)] * 3) == [0.5, 0.25, 0.125]

    def test_exponential_horizon_identity(self):
        T = 50
        s = Exponential(1.0, beta=2.0, T=T)
        assert math.isclose(s.alpha**T, 2.0 / T, rel_tol=1e-12)
        assert math.isclose(drive(s, [np.ones(1)] * T)[-1], 2.0 / T, rel_tol=1e-12)

    def test_alpha_from_horizon_value(self):
        assert math.isclose(exponential_alpha_from_horizon(1.0, 100),
                            0.954992586021436, rel_tol=1e-12)

    def test_alpha_from_horizon_rejects_boundary(self):
        with pytest.raises(ParameterError):
            exponential_alpha_from_horizon(100.0, 100)  # beta = T
        with pytest.raises(ParameterError):
            exponential_alpha_from_horizon(5.0, 2)


class TestCosine:
    def test_midpoint(self):
        s = Cosine(1.0, 4)
        s.step_size(1)
        s.observe(np.ones(1))
        assert s.step_size(2) == 0.5  # cos(pi/2) = 0

    def test_exact_zero_at_T_positive_before(self):
        for T in (1, 2, 7, 100, 1000):
            s = Cosine(1.0, T)
            vals = drive(s, [np.ones(1)] * T)
            assert vals[-1] == 0.0
            assert all(v > 0.0 for v in vals[:-1])

    def test_sum_of_steps(self):
        # sum eta_t = eta0 (T - 1) / 2, from sum cos(t pi/T) = -1
        for T in (2, 5, 64, 999):
            s = Cosine(2.0, T)
            total = math.fsum(drive(s, [np.ones(1)] * T))
            assert math.isclose(total, 2.0 * (T - 1) / 2.0, rel_tol=1e-12)


class TestCosineRestart:
    def test_plan_constant_factor(self):
        assert cosine_restart_plan(4, 1.0, 3) == [4, 4, 4]

    def test_plan_doubling(self):
        assert cosine_restart_plan(2, 2.0, 3) == [2, 4, 8]

    def test_plan_fractional_floor(self):
        assert cosine_restart_plan(3, 1.5, 3) == [3, 4, 6]

    def test_restarts_at_eta0_and_stays_positive(self):
        s = CosineRestart(1.0, 4, 2.0, 3)
        vals = drive(s, [np.ones(1)] * s.finite_horizon)
        assert s.finite_horizon == 4 + 8 + 16
        # stage starts (local index 0) give exactly eta0
        for start in (1, 5, 13):
            assert vals[start - 1] == 1.0
        assert all(v > 0.0 for v in vals)

    def test_plan_validation(self):
        with pytest.raises(ParameterError):
            cosine_restart_plan(0, 2.0, 3)
        with pytest.raises(ParameterError):
            cosine_restart_plan(4, 0.5, 3)


class TestFTRLGammas:
    def test_gamma_read_after_observe(self):
        g = FTRLGammaAdaGlobal(1.0, 2.0)
        with pytest.raises(ContractError):
            g.gamma(1)  # current gradient not observed yet
        g.observe(np.array([2.0]))
        assert g.gamma(1) == 1.0 / math.sqrt(4.0 + 4.0)

    def test_const_and_sqrt_values(self):
        g = FTRLGammaConstT(2.0, 4.0, 100)
        g.observe(np.ones(1))
        assert g.gamma(1) == 2.0 / (4.0 * 10.0)
        h = FTRLGammaSqrtT(2.0, 4.0)
        h.observe(np.ones(1))
        h.gamma(1)
        h.observe(np.ones(1))
        assert h.gamma(2) == 2.0 / (4.0 * math.sqrt(2.0))

    def test_ada_nonincreasing(self):
        rng = np.random.default_rng(3)
        for g in (FTRLGammaAdaGlobal(1.0, 1.0), FTRLGammaAdaCoord(1.0, 1.0)):
            prev = None
            for t in range(1, 200):
                g.observe(rng.standard_normal(4))
                cur = np.asarray(g.gamma(t))
                if prev is not None:
                    assert np.all(cur <= prev)
                prev = cur


class TestConfigFactory:
    def test_round_trip(self):
        s = schedule_from_config("delayed-adagrad-global",
                                 {"alpha": 1.0, "beta": 2.0, "eps": 0.1})
        assert isinstance(s, DelayedAdaGradGlobal)
        assert s.beta == 2.0

    def test_unknown_kind(self):
        with pytest.raises(ParameterError, match="unknown schedule kind"):
            schedule_from_config("warmup", {})
