import logging

import numpy as np
import pytest

from sparsemr.exceptions import DomainError
from sparsemr.models.geneig import SymmetricPair, generalized_eig
from sparsemr.models.problem import Sense, SolverMethod, SparseProblem
from sparsemr.models.sdp import (
    project_l1_ball,
    project_simplex,
    project_spectraplex,
    sdp_relaxation,
    solve_relaxation,
)
from sparsemr.models.sparse import exhaustive_oracle


def test_project_simplex_cases() -> None:
    np.testing.assert_allclose(project_simplex(np.array([0.5, 0.5])), [0.5, 0.5])
    np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    projected = project_simplex(np.array([0.3, -1.0, 0.9, 0.2]))
    assert projected.sum() == pytest.approx(1.0)
    assert np.all(projected >= 0.0)


def test_project_spectraplex_is_unit_trace_psd(rng) -> None:
    m = rng.standard_normal((5, 5))
    x = project_spectraplex(m)
    assert np.trace(x) == pytest.approx(1.0)
    assert np.linalg.eigvalsh(x)[0] >= -1e-12
    np.testing.assert_allclose(x, x.T)


def test_project_l1_ball(rng) -> None:
    inside = np.array([[0.1, -0.2], [0.3, 0.1]])
    assert project_l1_ball(inside, 1.0) is inside
    outside = 3.0 * rng.standard_normal((4, 4))
    projected = project_l1_ball(outside, 2.0)
    assert np.abs(projected).sum() == pytest.approx(2.0)
    assert np.all(np.sign(projected)[projected != 0] == np.sign(outside)[projected != 0])


def test_diagonal_example_single_asset() -> None:
    problem = SparseProblem(np.diag([1.0, 4.0, 9.0]), np.eye(3), 1)
    portfolio, bound = sdp_relaxation(problem)
    assert portfolio.support == (2,)
    assert portfolio.value == pytest.approx(9.0)
    assert portfolio.method is SolverMethod.SDP
    # rank-one optimum: the relaxation is tight
    assert bound == pytest.approx(9.0, abs=1e-6)
    assert portfolio.certified


def test_rank_one_numerator_is_tight() -> None:
    v = np.array([0.0, 3.0, 0.0, 4.0, 0.0])
    problem = SparseProblem(np.outer(v, v), np.eye(5), 2)
    portfolio, bound = sdp_relaxation(problem)
    assert portfolio.support == (1, 3)
    assert portfolio.value == pytest.approx(25.0, rel=1e-10)
    assert bound == pytest.approx(portfolio.value, rel=1e-5)
    assert portfolio.certified


def test_full_cardinality_bound_matches_dense_top(spd_pair) -> None:
    a, b = spd_pair(4, seed=21)
    top = generalized_eig(SymmetricPair(a, b)).eigenvalues[0]
    portfolio, bound = sdp_relaxation(SparseProblem(a, b, 4))
    assert bound == pytest.approx(top, rel=1e-5)
    assert portfolio.value == pytest.approx(top, rel=1e-8)


def test_minimize_sense_reports_lower_bound(spd_pair) -> None:
    a, b = spd_pair(4, seed=22)
    a = a + np.eye(4)
    bottom = generalized_eig(SymmetricPair(a, b)).eigenvalues[-1]
    portfolio, _ = sdp_relaxation(SparseProblem(a, b, 4, Sense.MINIMIZE))
    assert portfolio.value == pytest.approx(bottom, rel=1e-8)
    assert portfolio.objective_bound <= portfolio.value + 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_bound_dominates_oracle(seed: int, spd_pair) -> None:
    a, b = spd_pair(5, seed=30 + seed)
    for k in range(1, 6):
        problem = SparseProblem(a, b, k)
        portfolio, bound = sdp_relaxation(problem)
        oracle = exhaustive_oracle(problem).value
        assert portfolio.value <= oracle + 1e-10
        assert oracle <= bound + 1e-5
        assert portfolio.k == k


def test_truncated_run_is_flagged_but_still_a_bound(caplog, spd_pair) -> None:
    a, b = spd_pair(6, seed=23)
    problem = SparseProblem(a, b, 3)
    with caplog.at_level(logging.WARNING):
        portfolio, bound = sdp_relaxation(problem, max_iter=20)
    assert portfolio.certified is False
    assert "not certified" in caplog.text
    assert exhaustive_oracle(problem).value <= bound + 1e-9


def test_relaxation_matrix_normalization(spd_pair) -> None:
    a, b = spd_pair(4, seed=24)
    result = solve_relaxation(a, b, 2)
    y = result.relaxation_matrix
    assert np.trace(b @ y) == pytest.approx(1.0)
    assert np.trace(result.x) == pytest.approx(1.0)
    assert result.lower_bound <= result.upper_bound + 1e-12


def test_relaxation_rejects_bad_inputs() -> None:
    with pytest.raises(DomainError):
        solve_relaxation(np.eye(3), np.eye(3), 4)
    with pytest.raises(DomainError):
        solve_relaxation(np.eye(2), np.diag([1.0, -1.0]), 1)
