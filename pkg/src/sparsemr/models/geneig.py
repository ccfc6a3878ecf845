"""Symmetric-definite generalized eigenvalue kernel.

Eigenvalues come back in descending order; eigenvectors are scaled to ``v' B v = 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy import linalg

from sparsemr.config import MAX_CONDITION, MIN_EIGENVALUE, RIDGE_CAP, RIDGE_START, RIDGE_STEP
from sparsemr.exceptions import ConditioningError, DomainError

logger = logging.getLogger(__name__)

Whitening = Literal["cholesky", "eigen"]


def symmetrize(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class SymmetricPair:
    """Numerator ``a`` and denominator ``b`` of a Rayleigh quotient.

    ``ridge`` is added to the diagonal of ``b`` wherever ``b`` is used; use
    :func:`regularize` to pick it under the escalation policy.
    """

    a: np.ndarray
    b: np.ndarray
    ridge: float = 0.0

    def __post_init__(self) -> None:
        a = symmetrize(np.atleast_2d(self.a))
        b = symmetrize(np.atleast_2d(self.b))
        if a.shape != b.shape or a.shape[0] != a.shape[1]:
            raise DomainError(f"pencil needs square matrices of one size, got {a.shape}, {b.shape}")
        if self.ridge < 0:
            raise DomainError(f"ridge must be nonnegative, got {self.ridge}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return int(self.a.shape[0])

    @property
    def effective_b(self) -> np.ndarray:
        if self.ridge == 0.0:
            return self.b
        return self.b + self.ridge * np.eye(self.n)

    def restrict(self, support: list[int] | np.ndarray) -> SymmetricPair:
        idx = np.ix_(support, support)
        return SymmetricPair(self.a[idx], self.b[idx], self.ridge)


@dataclass(frozen=True)
class GenEigResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ridge: float = 0.0
    whitening: Whitening = "cholesky"

    @property
    def top(self) -> tuple[float, np.ndarray]:
        return float(self.eigenvalues[0]), self.eigenvectors[:, 0]


def regularize(pair: SymmetricPair) -> SymmetricPair:
    """Return ``pair`` with the smallest ridge that makes ``b`` positive-definite.

    The ridge starts at ``1e-10 * trace(b) / n`` and grows tenfold up to ``1e-6 * trace(b) / n``.
    """
    smallest = float(linalg.eigvalsh(pair.effective_b)[0])
    if smallest > MIN_EIGENVALUE:
        return pair
    scale = float(np.trace(pair.b)) / pair.n
    if scale <= 0:
        raise ConditioningError("denominator has nonpositive trace", smallest)
    ridge = RIDGE_START * scale
    while ridge <= RIDGE_CAP * scale * (1.0 + 1e-9):
        if smallest - pair.ridge + ridge > MIN_EIGENVALUE:
            logger.warning("Denominator near-singular; ridge %.3e applied", ridge)
            return replace(pair, ridge=ridge)
        ridge *= RIDGE_STEP
    raise ConditioningError("denominator not positive-definite after maximum ridge", smallest)


def inverse_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric ``R`` with ``R m R = I``, via the eigendecomposition of ``m``."""
    w, v = linalg.eigh(symmetrize(m))
    if w[0] <= MIN_EIGENVALUE:
        raise ConditioningError("matrix is not positive-definite", float(w[0]))
    return symmetrize((v / np.sqrt(w)) @ v.T)


def _whiten(pair: SymmetricPair) -> tuple[np.ndarray, np.ndarray, Whitening]:
    """Whitened numerator and the map taking whitened vectors back to the pencil."""
    b = pair.effective_b
    try:
        factor = linalg.cholesky(b, lower=True)
        if np.linalg.cond(factor) <= MAX_CONDITION:
            half = linalg.solve_triangular(factor, pair.a, lower=True)
            whitened = linalg.solve_triangular(factor, half.T, lower=True)
            back = linalg.solve_triangular(factor.T, np.eye(pair.n), lower=False)
            return symmetrize(whitened), back, "cholesky"
    except linalg.LinAlgError:
        pass
    logger.debug("Cholesky whitening rejected; using eigen inverse square root")
    root = inverse_sqrt(b)
    return symmetrize(root @ pair.a @ root), root, "eigen"


def _orient(vectors: np.ndarray) -> np.ndarray:
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def generalized_eig(pair: SymmetricPair) -> GenEigResult:
    pair = regularize(pair)
    whitened, back, whitening = _whiten(pair)
    w, u = linalg.eigh(whitened)
    order = np.argsort(-w, kind="stable")
    vectors = _orient(back @ u[:, order])
    return GenEigResult(
        eigenvalues=w[order],
        eigenvectors=vectors,
        ridge=pair.ridge,
        whitening=whitening,
    )


def top_eig(pair: SymmetricPair) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and its oriented, B-normalized eigenvector."""
    pair = regularize(pair)
    whitened, back, _ = _whiten(pair)
    n = pair.n
    w, u = linalg.eigh(whitened, subset_by_index=[n - 1, n - 1])
    return float(w[0]), _orient(back @ u)[:, 0]


def rayleigh(pair: SymmetricPair, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (pair.n,):
        raise DomainError(f"vector of shape {x.shape} does not match pencil of size {pair.n}")
    if not np.any(x):
        raise DomainError("Rayleigh quotient of the zero vector is undefined")
    denominator = float(x @ pair.effective_b @ x)
    if denominator <= 0:
        raise DomainError(f"x' B x = {denominator:.3e} is not positive")
    return float(x @ pair.a @ x) / denominator
