import math

import pytest

from sgdlab.errors import ParameterError
from sgdlab.lemmas import LEMMA_IDS, LemmaReport, lemma_suite, sum_cosine

EXPECTED_IDS = {
    "sum_bounded", "sum_integral_bounds", "smooth", "solvex", "logsolvex",
    "exponential", "bound_log", "ineq_alpha", "ineq_constant",
    "integral_bound", "sum_cosine", "poly_bound", "ratio_bound", "doublesum",
}


def test_all_lemmas_registered():
    assert set(LEMMA_IDS) == EXPECTED_IDS


def test_sum_cosine_small_values():
    # T = 5 evaluates to -1 within 1e-12 absolute
    assert abs(sum_cosine(5) + 1.0) <= 1e-12
    assert abs(sum_cosine(1) + 1.0) <= 1e-12
    assert abs(sum_cosine(2) + 1.0) <= 1e-12


def test_sum_bounded_hand_value():
    # a0 = 1, a = [1, 1], beta = 2: LHS = 1/4 + 1/9 <= 1 = RHS
    lhs = 1.0 / (1 + 1) ** 2 + 1.0 / (1 + 2) ** 2
    assert math.isclose(lhs, 0.25 + 1 / 9)
    assert lhs <= 1.0


def test_ineq_alpha_equality_case():
    # x = 1 gives 0 <= 0
    assert 1.0 - 1.0 <= math.log(1.0 / 1.0)


def test_suite_smoke_no_violations():
    reports = lemma_suite(2000, seed=1)
    assert len(reports) == len(LEMMA_IDS)
    for r in reports:
        assert isinstance(r, LemmaReport)
        assert not r.violated, f"{r.lemma_id}: worst margin {r.worst_margin}"


def test_violation_predicate():
    good = LemmaReport("x", 10, 0.0)
    bad = LemmaReport("x", 10, -1e-6)
    assert not good.violated and bad.violated


def test_only_subset_and_unknown_id():
    reports = lemma_suite(100, seed=0, only=["sum_cosine"])
    assert [r.lemma_id for r in reports] == ["sum_cosine"]
    with pytest.raises(ParameterError):
        lemma_suite(100, only=["nope"])


def test_trials_validation():
    with pytest.raises(ParameterError):
        lemma_suite(0)


def test_deterministic_given_seed():
    a = lemma_suite(500, seed=7)
    b = lemma_suite(500, seed=7)
    assert [(r.lemma_id, r.worst_margin) for r in a] == \
        [(r.lemma_id, r.worst_margin) for r in b]
