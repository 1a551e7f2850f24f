"""Exponential mechanism, the two quality functions, and budget accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from gbpath.errors import (
    BadRelationValue,
    DomainViolation,
    EmptyCandidates,
    InvalidBudget,
    NonPositiveSensitivity,
    TooFewEdges,
)

VERTEX_SENSITIVITY = 1.0


def check_budget(epsilon: float) -> float:
    eps = float(epsilon)
    if not (eps > 0 and math.isfinite(eps)):
        raise InvalidBudget(f"privacy budget must be positive and finite, got {epsilon!r}")
    return eps


@dataclass(frozen=True)
class ScoredCandidate:
    value: Any
    quality: float


@dataclass(frozen=True)
class BudgetLedger:
    eps_v: float
    eps_e: float

    def __post_init__(self) -> None:
        check_budget(self.eps_v)
        check_budget(self.eps_e)

    def total(self) -> float:
        return self.eps_v + self.eps_e + math.log(2)


def total_budget(ledger: BudgetLedger) -> float:
    return ledger.total()


def selection_probabilities(qualities: Sequence[float], epsilon: float, sensitivity: float) -> np.ndarray:
    """Analytic sampling distribution of the exponential mechanism."""
    if len(qualities) == 0:
        raise EmptyCandidates("no candidates to sample from")
    if not sensitivity > 0:
        raise NonPositiveSensitivity(f"sensitivity must be > 0, got {sensitivity}")
    eps = check_budget(epsilon)
    q = np.asarray(qualities, dtype=float)
    if not np.all(np.isfinite(q)):
        raise DomainViolation("qualities must be finite")
    # shift by the max so the largest weight is exactly 1
    w = np.exp(eps * (q - q.max()) / (2.0 * sensitivity))
    return w / w.sum()


def _draw(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(probs) - 1)


def exp_mechanism(
    candidates: Sequence[ScoredCandidate],
    epsilon: float,
    sensitivity: float,
    rng: np.random.Generator,
) -> Any:
    probs = selection_probabilities([c.quality for c in candidates], epsilon, sensitivity)
    return candidates[int(_draw(probs, np.array([rng.random()]))[0])].value


def exp_mechanism_many(
    candidates: Sequence[ScoredCandidate],
    epsilon: float,
    sensitivity: float,
    rng: np.random.Generator,
    size: int,
) -> list[Any]:
    """``size`` independent draws; consumes the stream exactly like ``size`` single calls."""
    probs = selection_probabilities([c.quality for c in candidates], epsilon, sensitivity)
    if size == 0:
        return []
    return [candidates[int(i)].value for i in _draw(probs, rng.random(size))]


def quality_vertex(n: int, max_n: int, d: int, max_d: int) -> float:
    """Quality of keeping ``n`` sub-vertices for a base vertex of degree ``d``."""
    if min(n, max_n, d, max_d) < 0 or n > max_n or d > max_d:
        raise DomainViolation(f"need 0 <= n <= max_n and 0 <= d <= max_d, got {(n, max_n, d, max_d)}")
    return float(max_n - n + max_d - d)


def quality_edge(x: int, edge_count: int) -> float:
    """Quality of relation value ``x`` (1 = path side, 2 = non-path side)."""
    if x not in (1, 2):
        raise BadRelationValue(f"relation value must be 1 or 2, got {x!r}")
    if edge_count < 3:
        raise TooFewEdges(f"quality degenerates for |E| < 3, got {edge_count}")
    return ((edge_count - 2) * x - (edge_count - 3)) / edge_count


def edge_sensitivity(edge_count: int) -> float:
    if edge_count < 3:
        raise TooFewEdges(f"sensitivity degenerates for |E| < 3, got {edge_count}")
    return (edge_count - 2) / edge_count
