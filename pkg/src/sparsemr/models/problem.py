from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from sparsemr.exceptions import DomainError
from sparsemr.models.geneig import SymmetricPair, rayleigh, symmetrize, top_eig


class Sense(str, Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class SolverMethod(str, Enum):
    GREEDY = "greedy"
    SDP = "sdp"
    ORACLE = "oracle"


@dataclass(frozen=True)
class SparseProblem:
    """Optimize ``x'a x / x'b x`` over ``Card(x) <= k``.

    MINIMIZE runs as the maximization of the reciprocal quotient ``x'b x / x'a x``; the
    regularization policy of the eigen kernel ridges ``a`` when it is singular.
    """

    a: np.ndarray
    b: np.ndarray
    k: int
    sense: Sense = Sense.MAXIMIZE

    def __post_init__(self) -> None:
        a = symmetrize(self.a)
        b = symmetrize(self.b)
        if a.ndim != 2 or a.shape != b.shape or a.shape[0] != a.shape[1]:
            raise DomainError(f"problem needs square matrices, got {a.shape} and {b.shape}")
        if not 1 <= self.k <= a.shape[0]:
            raise DomainError(f"cardinality k={self.k} outside 1..{a.shape[0]}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sense", Sense(self.sense))

    @property
    def n(self) -> int:
        return int(self.a.shape[0])

    @property
    def pair(self) -> SymmetricPair:
        return SymmetricPair(self.a, self.b)

    def oriented(self) -> SymmetricPair:
        if self.sense is Sense.MAXIMIZE:
            return SymmetricPair(self.a, self.b)
        return SymmetricPair(self.b, self.a)

    def with_k(self, k: int) -> SparseProblem:
        return SparseProblem(self.a, self.b, k, self.sense)

    def value(self, x: np.ndarray) -> float:
        return rayleigh(self.pair, x)


@dataclass(frozen=True)
class SparsePortfolio:
    """Unit-norm weights supported on at most ``k`` assets.

    ``value`` is always the quotient of the original problem; ``upper_bound`` is expressed in the
    maximized (oriented) quotient, see :attr:`objective_bound`.
    """

    weights: np.ndarray
    support: tuple[int, ...]
    value: float
    method: SolverMethod
    sense: Sense = Sense.MAXIMIZE
    upper_bound: float | None = None
    certified: bool | None = None
    nu: float | None = None
    lambda_ou: float | None = None
    track: np.ndarray | None = field(default=None, compare=False, repr=False)
    labels: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return len(self.support)

    @property
    def objective_bound(self) -> float | None:
        """Bound on the original objective: upper when maximizing, lower when minimizing."""
        if self.upper_bound is None:
            return None
        if self.sense is Sense.MAXIMIZE:
            return self.upper_bound
        return 1.0 / self.upper_bound if self.upper_bound > 0 else 0.0

    def support_labels(self) -> list[str]:
        if not self.labels:
            return [str(i) for i in self.support]
        return [self.labels[i] for i in self.support]

    def to_dict(self) -> dict[str, Any]:
        def _num(v: float | None) -> float | None:
            return None if v is None or not math.isfinite(v) else float(v)

        return {
            "method": self.method.value,
            "sense": self.sense.value,
            "k": self.k,
            "support": list(self.support),
            "support_labels": self.support_labels(),
            "weights": self.weights.tolist(),
            "value": self.value,
            "upper_bound": _num(self.upper_bound),
            "objective_bound": _num(self.objective_bound),
            "certified": self.certified,
            "nu": _num(self.nu),
            "lambda_ou": _num(self.lambda_ou),
        }


def solve_on_support(
    oriented: SymmetricPair, support: Sequence[int]
) -> tuple[float, np.ndarray]:
    """Dense top eigenpair restricted to ``support``, embedded and scaled to unit l2 norm."""
    support = sorted(support)
    value, local = top_eig(oriented.restrict(support))
    weights = np.zeros(oriented.n)
    weights[support] = local
    return value, weights / np.linalg.norm(weights)


def make_portfolio(
    problem: SparseProblem,
    weights: np.ndarray,
    support: Sequence[int],
    method: SolverMethod,
    labels: tuple[str, ...] = (),
    **extra: Any,
) -> SparsePortfolio:
    return SparsePortfolio(
        weights=weights,
        support=tuple(sorted(int(i) for i in support)),
        value=problem.value(weights),
        method=method,
        sense=problem.sense,
        labels=labels,
        **extra,
    )
