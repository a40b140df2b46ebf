"""Twice-differentiable test objectives with exact gradient/Hessian oracles.

The built-in objectives are the ones the experiments need:

- ``quadratic(A)``: ``f(x) = 0.5 x^T A x`` for symmetric ``A``.
- ``fig1()``: the saddle benchmark ``f(x, y) = x^2 - y^2`` (``A = diag(2, -2)``).
- ``cubic_perturbed_saddle(a)``: ``f(x, y) = x^2/2 - y^2/2 + a x^2 y``, a
  strict saddle at the origin with a genuinely nonlinear remainder.

Built-in callables broadcast over leading axes (``vectorized=True``), which
the Monte Carlo harness exploits; user-supplied objectives only need to
handle single points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ObjectiveError",
    "EigensolverError",
    "Objective",
    "CriticalPointClass",
    "quadratic",
    "fig1",
    "cubic_perturbed_saddle",
    "classify_critical_point",
    "STRICT_SADDLE",
    "LOCAL_MIN_CANDIDATE",
    "DEGENERATE",
    "NOT_CRITICAL",
]

STRICT_SADDLE = "strict_saddle"
LOCAL_MIN_CANDIDATE = "local_min_candidate"
DEGENERATE = "degenerate"
NOT_CRITICAL = "not_critical"

SYMMETRY_TOL = 1e-12


class ObjectiveError(ValueError):
    """Raised for invalid objective construction or evaluation input."""


class EigensolverError(RuntimeError):
    """Raised when the Hessian eigensolver fails (distinct from classification)."""


class Objective:
    """Bundle of ``eval``/``grad``/``hess`` callables plus metadata.

    Parameters
    ----------
    dimension : int
        Ambient dimension ``d``.
    eval_fn, grad_fn, hess_fn : callables
        ``f: R^d -> R``, ``grad f: R^d -> R^d``, ``hess f: R^d -> R^{d x d}``.
    name : str
        Registry name ("quadratic", "fig1", "cubic", or user-defined).
    critical_points : sequence of vectors
        Known critical points, used by the harness to double-key
        "converged to a registered saddle" decisions.
    vectorized : bool
        True when ``eval``/``grad`` accept stacked points of shape (n, d).
    """

    def __init__(
        self,
        dimension: int,
        eval_fn: Callable[[np.ndarray], float],
        grad_fn: Callable[[np.ndarray], np.ndarray],
        hess_fn: Callable[[np.ndarray], np.ndarray],
        name: str = "custom",
        critical_points: Sequence[np.ndarray] = (),
        vectorized: bool = False,
    ):
        if dimension < 1:
            raise ObjectiveError(f"objective dimension must be >= 1, got {dimension}")
        self.dimension = int(dimension)
        self._eval = eval_fn
        self._grad = grad_fn
        self._hess = hess_fn
        self.name = name
        self.critical_points = [np.asarray(p, dtype=float) for p in critical_points]
        self.vectorized = vectorized

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise ObjectiveError(
                f"point has dimension {x.shape[-1]}, objective expects {self.dimension}")
        return x

    def eval(self, x: np.ndarray) -> float | np.ndarray:
        return self._eval(self._check(x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self._grad(self._check(x))

    def hess(self, x: np.ndarray) -> np.ndarray:
        return self._hess(self._check(x))

    def __repr__(self) -> str:  # pragma: no cover
        return f"<Objective {self.name} d={self.dimension}>"


def quadratic(A: np.ndarray, name: str = "quadratic") -> Objective:
    """``f(x) = 0.5 x^T A x`` for symmetric ``A``; rejects asymmetry above 1e-12.

    The gradient is ``A x`` and the Hessian is the constant matrix ``A``.
    The returned objective carries the matrix as ``.quadratic_matrix`` so the
    harness can recognize exactly linear dynamics.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ObjectiveError(f"quadratic needs a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if float(np.max(np.abs(A - A.T))) > SYMMETRY_TOL * scale:
        raise ObjectiveError("quadratic matrix is not symmetric (tolerance 1e-12)")
    d = A.shape[0]

    def _eval(x):
        return 0.5 * np.sum((x @ A) * x, axis=-1)

    def _grad(x):
        return x @ A  # A symmetric, so x @ A == A @ x for single points

    def _hess(x):
        return A.copy()

    obj = Objective(d, _eval, _grad, _hess, name=name,
                    critical_points=[np.zeros(d)], vectorized=True)
    obj.quadratic_matrix = A.copy()
    return obj


def fig1() -> Objective:
    """The two-dimensional saddle benchmark ``f(x, y) = x^2 - y^2``."""
    return quadratic(np.diag([2.0, -2.0]), name="fig1")


def cubic_perturbed_saddle(a: float) -> Objective:
    """``f(x, y) = x^2/2 - y^2/2 + a x^2 y`` with ``|a| <= 1``.

    The origin is a strict saddle with Hessian ``diag(1, -1)``; the cubic
    term supplies a quadratic-order remainder whose Lipschitz modulus on the
    ball B(0, delta) is bounded by ``6 |a| delta``.
    """
    a = float(a)
    if not np.isfinite(a) or abs(a) > 1.0:
        raise ObjectiveError(f"cubic_perturbed_saddle needs |a| <= 1, got a={a}")

    def _eval(z):
        x, y = z[..., 0], z[..., 1]
        return 0.5 * x * x - 0.5 * y * y + a * x * x * y

    def _grad(z):
        x, y = z[..., 0], z[..., 1]
        return np.stack([x + 2.0 * a * x * y, -y + a * x * x], axis=-1)

    def _hess(z):
        x, y = z[..., 0], z[..., 1]
        return np.array([[1.0 + 2.0 * a * y, 2.0 * a * x],
                         [2.0 * a * x, -1.0]])

    obj = Objective(2, _eval, _grad, _hess, name="cubic",
                    critical_points=[np.zeros(2)], vectorized=True)
    obj.cubic_coefficient = a
    return obj


@dataclass(frozen=True)
class CriticalPointClass:
    """Classification of a point: tag, least Hessian eigenvalue, gradient norm."""

    tag: str
    min_eigenvalue: float
    grad_norm: float


def classify_critical_point(
    obj: Objective,
    x: np.ndarray,
    grad_tol: float = 1e-8,
    eig_tol: float = 1e-8,
) -> CriticalPointClass:
    """Classify ``x`` as strict saddle / local-min candidate / degenerate / not critical.

    A point is critical when ``||grad f(x)|| <= grad_tol``.  Critical points
    split by the least Hessian eigenvalue ``m``: strict saddle when
    ``m < -eig_tol``, degenerate when ``|m| <= eig_tol``, local-min candidate
    when ``m > eig_tol``.  Eigensolver breakdown raises
    :class:`EigensolverError` rather than mis-tagging the point.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (obj.dimension,):
        raise ObjectiveError(
            f"classify_critical_point expects a point of shape ({obj.dimension},), got {x.shape}")
    g = obj.grad(x)
    grad_norm = float(np.linalg.norm(g))
    H = np.asarray(obj.hess(x), dtype=float)
    if H.shape != (obj.dimension, obj.dimension) or not np.all(np.isfinite(H)):
        raise EigensolverError(f"Hessian at {x} is malformed or non-finite")
    try:
        eigenvalues = np.linalg.eigvalsh(0.5 * (H + H.T))
    except np.linalg.LinAlgError as err:
        raise EigensolverError(f"Hessian eigendecomposition failed at {x}: {err}") from err
    if not np.all(np.isfinite(eigenvalues)):
        raise EigensolverError(f"Hessian eigendecomposition returned non-finite values at {x}")
    min_eig = float(eigenvalues[0])

    if grad_norm > grad_tol:
        tag = NOT_CRITICAL
    elif min_eig < -eig_tol:
        tag = STRICT_SADDLE
    elif min_eig > eig_tol:
        tag = LOCAL_MIN_CANDIDATE
    else:
        tag = DEGENERATE
    return CriticalPointClass(tag=tag, min_eigenvalue=min_eig, grad_norm=grad_norm)
