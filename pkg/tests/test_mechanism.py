import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbpath.errors import (
    BadRelationValue,
    DomainViolation,
    EmptyCandidates,
    InvalidBudget,
    NonPositiveSensitivity,
    TooFewEdges,
)
from gbpath.mechanism import (
    BudgetLedger,
    ScoredCandidate,
    edge_sensitivity,
    exp_mechanism,
    exp_mechanism_many,
    quality_edge,
    quality_vertex,
    selection_probabilities,
    total_budget,
)

budgets = st.floats(0.01, 5.0)


def test_two_candidates_one_quality_step_apart():
    # eps = 2, sensitivity 1: weights 1 and e
    p = selection_probabilities([0.0, 1.0], 2.0, 1.0)
    assert p[1] == pytest.approx(math.e / (math.e + 1))


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=8), budgets, st.floats(0.5, 3.0))
def test_probabilities_match_direct_formula(qs, eps, sens):
    p = selection_probabilities(qs, eps, sens)
    w = np.array([math.exp(eps * q / (2 * sens)) for q in qs])
    assert np.allclose(p, w / w.sum())


def test_huge_qualities_do_not_overflow():
    p = selection_probabilities([1e6, 1e6 + 2], 1.0, 1.0)
    assert np.all(np.isfinite(p))
    assert p[1] == pytest.approx(math.e / (1 + math.e))


@given(st.integers(3, 200), budgets)
def test_edge_step_probability_is_independent_of_edge_count(m, eps):
    p = selection_probabilities([quality_edge(1, m), quality_edge(2, m)], eps, edge_sensitivity(m))
    assert p[1] == pytest.approx(math.exp(eps / 2) / (1 + math.exp(eps / 2)))


@given(st.integers(1, 6), st.integers(0, 9), st.integers(0, 9), budgets)
def test_vertex_degree_term_cancels(max_n, d1, d2, eps):
    max_d = max(d1, d2)
    counts = range(max_n + 1)
    p1 = selection_probabilities([quality_vertex(n, max_n, d1, max_d) for n in counts], eps, 1.0)
    p2 = selection_probabilities([quality_vertex(n, max_n, d2, max_d) for n in counts], eps, 1.0)
    assert np.allclose(p1, p2)


def test_edge_quality_values():
    assert quality_edge(1, 3) == pytest.approx(1 / 3)
    assert quality_edge(2, 3) == pytest.approx(2 / 3)
    assert quality_edge(2, 10) - quality_edge(1, 10) == pytest.approx(edge_sensitivity(10))


def test_draws_consume_one_uniform_each():
    cands = [ScoredCandidate(x, float(x)) for x in range(4)]
    a = np.random.default_rng(3)
    b = np.random.default_rng(3)
    singles = [exp_mechanism(cands, 1.0, 1.0, a) for _ in range(50)]
    assert exp_mechanism_many(cands, 1.0, 1.0, b, 50) == singles
    assert a.random() == b.random()


def test_budget_composition():
    ledger = BudgetLedger(0.5, 1.0)
    assert total_budget(ledger) == pytest.approx(1.5 + math.log(2))


@pytest.mark.parametrize(
    "call, exc",
    [
        (lambda: selection_probabilities([], 1.0, 1.0), EmptyCandidates),
        (lambda: selection_probabilities([1.0], 1.0, 0.0), NonPositiveSensitivity),
        (lambda: selection_probabilities([1.0], 0.0, 1.0), InvalidBudget),
        (lambda: selection_probabilities([1.0], math.inf, 1.0), InvalidBudget),
        (lambda: selection_probabilities([math.nan], 1.0, 1.0), DomainViolation),
        (lambda: quality_vertex(3, 2, 0, 0), DomainViolation),
        (lambda: quality_edge(0, 5), BadRelationValue),
        (lambda: quality_edge(1, 2), TooFewEdges),
        (lambda: edge_sensitivity(2), TooFewEdges),
        (lambda: BudgetLedger(-1.0, 1.0), InvalidBudget),
    ],
)
def test_invalid_arguments(call, exc):
    with pytest.raises(exc):
        call()
