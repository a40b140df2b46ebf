"""First-order update rules with vanishing step sizes, and the trajectory runner.

Implemented methods (registry ids in ``METHOD_IDS``):

- ``gd``:                x_{k+1} = x_k - alpha_k grad f(x_k)
- ``mirror-entropy``:    multiplicative weights on the simplex (entropy mirror map)
- ``mirror-euclidean``:  mirror descent with the Euclidean map; identical to gd
- ``prox``:              x_{k+1} = argmin_z f(z) + ||x_k - z||^2 / (2 alpha_k)
- ``manifold-sphere``:   project-then-renormalize gradient step on the unit sphere
- ``manifold-intrinsic``: x_{k+1} = x_k - alpha_k M(x_k)^{-1} grad f(x_k)

``run`` drives any of them with escape / Cauchy-window convergence / budget
termination and stride-decimated recording.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .objectives import CriticalPointClass, Objective, classify_critical_point
from .schedules import StepSchedule

__all__ = [
    "MethodError",
    "MirrorDomainError",
    "ManifoldError",
    "MirrorMap",
    "EmbeddedManifold",
    "RiemannianMetric",
    "entropy_mirror_map",
    "euclidean_mirror_map",
    "unit_sphere",
    "identity_metric",
    "constant_metric",
    "gd_step",
    "mirror_step",
    "proximal_step",
    "manifold_step",
    "intrinsic_manifold_step",
    "Terminal",
    "TrajectoryRecord",
    "run",
    "METHOD_IDS",
    "ESCAPED_REGION",
    "CONVERGED_TO_POINT",
    "BUDGET_EXHAUSTED",
    "STEP_ERROR",
    "DEFAULT_BUDGET",
    "DEFAULT_ESCAPE_RADIUS",
    "DEFAULT_STRIDE",
    "CONVERGENCE_WINDOW",
    "BOUNDARY_EPS",
]

ESCAPED_REGION = "escaped_region"
CONVERGED_TO_POINT = "converged_to_point"
BUDGET_EXHAUSTED = "budget_exhausted"
STEP_ERROR = "step_error"

DEFAULT_BUDGET = 100_000
DEFAULT_ESCAPE_RADIUS = 1e3
DEFAULT_STRIDE = 10
CONVERGENCE_WINDOW = 50  # consecutive small steps required to declare convergence
BOUNDARY_EPS = 1e-300  # simplex coordinates below this count as boundary contact

METHOD_IDS = ("gd", "mirror-entropy", "mirror-euclidean", "prox",
              "manifold-sphere", "manifold-intrinsic")


class MethodError(RuntimeError):
    """A step could not be computed (singular system, inner solver failure...)."""


class MirrorDomainError(MethodError):
    """Mirror iterate left the mirror map's domain (e.g. simplex boundary)."""


class ManifoldError(MethodError):
    """Manifold projection undefined at the requested point."""


class MirrorMap:
    """Mirror map Phi with gradient and convex-conjugate argmax.

    ``conjugate_argmax(y)`` returns argmax_{z in M} <z, y> - Phi(z); the
    defining identity ``conjugate_argmax(grad_phi(x)) == x`` holds on the
    interior of the domain.  ``domain_check`` raises MirrorDomainError for
    points outside the domain instead of silently projecting.
    """

    def __init__(self, dimension: int, phi, grad_phi, conjugate_argmax,
                 name: str, domain_check=None):
        self.dimension = dimension
        self.phi = phi
        self.grad_phi = grad_phi
        self.conjugate_argmax = conjugate_argmax
        self.name = name
        self._domain_check = domain_check

    def check_domain(self, x: np.ndarray) -> None:
        if self._domain_check is not None:
            self._domain_check(x)


def entropy_mirror_map(dimension: int) -> MirrorMap:
    """Negative-entropy map on the open probability simplex.

    Phi(x) = sum x_i log x_i, grad Phi = 1 + log x, and the conjugate argmax
    is the softmax.  The induced mirror step is exactly the multiplicative
    weights update x_i exp(-alpha g_i) / Z.
    """

    def phi(x):
        return float(np.sum(x * np.log(x)))

    def grad_phi(x):
        return 1.0 + np.log(x)

    def conjugate_argmax(y):
        # max-shifted softmax; invariant under the shift, overflow-safe.
        w = np.exp(y - np.max(y))
        return w / np.sum(w)

    def domain_check(x):
        if np.any(x < BOUNDARY_EPS):
            raise MirrorDomainError(
                "mirror iterate touched the simplex boundary "
                f"(min coordinate {np.min(x):.3e} < {BOUNDARY_EPS:g})")
        total = float(np.sum(x))
        if abs(total - 1.0) > 1e-8:
            raise MirrorDomainError(f"mirror iterate left the simplex (sum {total:.12g})")

    return MirrorMap(dimension, phi, grad_phi, conjugate_argmax,
                     name="entropy", domain_check=domain_check)


def euclidean_mirror_map(dimension: int) -> MirrorMap:
    """Phi(x) = ||x||^2 / 2 on all of R^d; mirror descent reduces to gd."""
    return MirrorMap(
        dimension,
        phi=lambda x: 0.5 * float(x @ x),
        grad_phi=lambda x: x,
        conjugate_argmax=lambda y: y,
        name="euclidean",
    )


class EmbeddedManifold:
    """Embedded manifold given by a point projection and tangent projectors."""

    def __init__(self, ambient_dim: int, project_point, tangent_matrix, name: str):
        self.ambient_dim = ambient_dim
        self.project_point = project_point
        self.tangent_matrix = tangent_matrix
        self.name = name

    def project_tangent(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.tangent_matrix(x) @ v


def unit_sphere(ambient_dim: int) -> EmbeddedManifold:
    """Unit sphere: P_M(v) = v/||v||, P_T(x) = I - x x^T."""

    def project_point(v):
        norm = float(np.linalg.norm(v))
        if norm < 1e-12:
            raise ManifoldError("sphere projection undefined near the origin")
        return v / norm

    def tangent_matrix(x):
        return np.eye(ambient_dim) - np.outer(x, x)

    return EmbeddedManifold(ambient_dim, project_point, tangent_matrix, name="sphere")


class RiemannianMetric:
    """Position-dependent inverse metric; must be symmetric positive definite."""

    def __init__(self, inverse_metric, name: str, constant_matrix: np.ndarray | None = None):
        self._inverse_metric = inverse_metric
        self.name = name
        self.constant_matrix = constant_matrix
        if constant_matrix is not None:
            _require_spd(constant_matrix, name)

    def inverse_metric(self, x: np.ndarray) -> np.ndarray:
        if self.constant_matrix is not None:
            return self.constant_matrix
        M = np.asarray(self._inverse_metric(x), dtype=float)
        _require_spd(M, self.name, x)
        return M


def _require_spd(M: np.ndarray, name: str, x: np.ndarray | None = None) -> None:
    where = "" if x is None else f" at {x}"
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise MethodError(f"inverse metric '{name}'{where} is not square: shape {M.shape}")
    if float(np.max(np.abs(M - M.T))) > 1e-10 * max(1.0, float(np.max(np.abs(M)))):
        raise MethodError(f"inverse metric '{name}'{where} is not symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as err:
        raise MethodError(f"inverse metric '{name}'{where} is not positive definite") from err


def identity_metric(dimension: int) -> RiemannianMetric:
    return RiemannianMetric(None, name="identity", constant_matrix=np.eye(dimension))


def constant_metric(M: np.ndarray, name: str = "constant") -> RiemannianMetric:
    return RiemannianMetric(None, name=name, constant_matrix=np.asarray(M, dtype=float))


# ---------------------------------------------------------------------------
# single-step updates
# ---------------------------------------------------------------------------

def gd_step(obj: Objective, schedule: StepSchedule, k: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = obj.grad(x)
    if not np.all(np.isfinite(g)):
        raise MethodError(f"non-finite gradient at k={k}, x={x}")
    return x - schedule.value(k) * g


def mirror_step(obj: Objective, mirror_map: MirrorMap, schedule: StepSchedule,
                k: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    mirror_map.check_domain(x)
    y = mirror_map.grad_phi(x) - schedule.value(k) * obj.grad(x)
    return mirror_map.conjugate_argmax(y)


def proximal_step(obj: Objective, schedule: StepSchedule, k: int, x: np.ndarray,
                  inner_tol: float = 1e-12, inner_budget: int = 100,
                  use_closed_form: bool | None = None) -> np.ndarray:
    """Proximal point step: solve z + alpha_k grad f(z) = x.

    Quadratic objectives take the closed form z = (I + alpha_k A)^{-1} x;
    everything else runs a damped Newton iteration on the stationarity
    residual F(z) = z + alpha_k grad f(z) - x (Jacobian I + alpha_k hess f).
    ``use_closed_form=False`` forces the Newton path (used to cross-check the
    two routes against each other).
    """
    x = np.asarray(x, dtype=float)
    alpha = schedule.value(k)
    A = getattr(obj, "quadratic_matrix", None)
    if use_closed_form is None:
        use_closed_form = A is not None
    if use_closed_form:
        if A is None:
            raise MethodError("closed-form proximal step requires a quadratic objective")
        M = np.eye(obj.dimension) + alpha * A
        try:
            return np.linalg.solve(M, x)
        except np.linalg.LinAlgError as err:
            raise MethodError(
                f"singular proximal system I + alpha_k A at k={k} (alpha={alpha:g})") from err

    z = x.copy()
    identity = np.eye(obj.dimension)
    res = z + alpha * obj.grad(z) - x
    res_norm = float(np.linalg.norm(res))
    for _ in range(inner_budget):
        if res_norm <= inner_tol:
            return z
        J = identity + alpha * obj.hess(z)
        try:
            delta = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as err:
            raise MethodError(
                f"singular proximal Jacobian I + alpha_k hess f at k={k}") from err
        # damped update: halve until the residual actually decreases
        t = 1.0
        while t >= 1e-12:
            z_try = z + t * delta
            res_try = z_try + alpha * obj.grad(z_try) - x
            res_try_norm = float(np.linalg.norm(res_try))
            if res_try_norm < res_norm or not np.isfinite(res_norm):
                break
            t *= 0.5
        else:
            raise MethodError(f"proximal Newton damping stalled at k={k}")
        z, res, res_norm = z_try, res_try, res_try_norm
    if res_norm <= inner_tol:
        return z
    raise MethodError(
        f"proximal Newton did not reach inner_tol={inner_tol:g} within "
        f"{inner_budget} iterations at k={k} (residual {res_norm:.3e})")


def manifold_step(obj: Objective, manifold: EmbeddedManifold, schedule: StepSchedule,
                  k: int, x: np.ndarray) -> np.ndarray:
    """Extrinsic step: project the gradient to the tangent space, move, re-project."""
    x = np.asarray(x, dtype=float)
    g_tan = manifold.project_tangent(x, obj.grad(x))
    return manifold.project_point(x - schedule.value(k) * g_tan)


def intrinsic_manifold_step(obj: Objective, metric: RiemannianMetric,
                            schedule: StepSchedule, k: int, x: np.ndarray) -> np.ndarray:
    """Intrinsic step in a coordinate chart: x - alpha_k M(x)^{-1} grad f(x)."""
    x = np.asarray(x, dtype=float)
    return x - schedule.value(k) * (metric.inverse_metric(x) @ obj.grad(x))


def make_step(method_id: str, obj: Objective, schedule: StepSchedule, *,
              mirror_map: MirrorMap | None = None,
              manifold: EmbeddedManifold | None = None,
              metric: RiemannianMetric | None = None) -> Callable[[int, np.ndarray], np.ndarray]:
    """Resolve a method id to a ``step(k, x)`` closure with default geometry."""
    if method_id == "gd":
        return lambda k, x: gd_step(obj, schedule, k, x)
    if method_id == "mirror-entropy":
        mmap = mirror_map or entropy_mirror_map(obj.dimension)
        return lambda k, x: mirror_step(obj, mmap, schedule, k, x)
    if method_id == "mirror-euclidean":
        mmap = mirror_map or euclidean_mirror_map(obj.dimension)
        return lambda k, x: mirror_step(obj, mmap, schedule, k, x)
    if method_id == "prox":
        return lambda k, x: proximal_step(obj, schedule, k, x)
    if method_id == "manifold-sphere":
        mani = manifold or unit_sphere(obj.dimension)
        return lambda k, x: manifold_step(obj, mani, schedule, k, x)
    if method_id == "manifold-intrinsic":
        met = metric or identity_metric(obj.dimension)
        return lambda k, x: intrinsic_manifold_step(obj, met, schedule, k, x)
    raise MethodError(f"unknown method id {method_id!r}; expected one of {METHOD_IDS}")


# ---------------------------------------------------------------------------
# trajectory runner
# ---------------------------------------------------------------------------

@dataclass
class Terminal:
    """How a trajectory ended.

    kind is one of ``escaped_region`` / ``converged_to_point`` /
    ``budget_exhausted`` / ``step_error``; ``point`` and ``point_class`` are
    set for convergence, ``message`` for step errors.
    """

    kind: str
    point: Optional[np.ndarray] = None
    point_class: Optional[CriticalPointClass] = None
    message: Optional[str] = None


@dataclass
class TrajectoryRecord:
    """Stride-decimated trajectory with bookkeeping for CSV export."""

    method_id: str
    schedule_id: str
    terminal: Terminal
    k_final: int
    ks: list = field(default_factory=list)
    points: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    seed: Optional[int] = None

    @property
    def final_point(self) -> np.ndarray:
        return self.points[-1]


def run(method_id: str, obj: Objective, schedule: StepSchedule, x0: np.ndarray, *,
        budget: int = DEFAULT_BUDGET, conv_tol: float = 1e-9,
        escape_radius: float = DEFAULT_ESCAPE_RADIUS, stride: int = DEFAULT_STRIDE,
        window: int = CONVERGENCE_WINDOW, grad_tol: float = 1e-8, eig_tol: float = 1e-8,
        mirror_map: MirrorMap | None = None, manifold: EmbeddedManifold | None = None,
        metric: RiemannianMetric | None = None, seed: int | None = None) -> TrajectoryRecord:
    """Iterate ``method_id`` from ``x0`` until escape, convergence, or budget.

    Convergence is declared after ``window`` consecutive steps of motion
    below ``conv_tol`` (a Cauchy-window test); the limit is then classified
    with :func:`classify_critical_point`.  Escape means ``||x_k|| >
    escape_radius``.  Step errors (mirror domain violations, singular
    proximal systems, ...) terminate the run with the ``step_error`` tag
    instead of raising.  Points are recorded every ``stride`` steps plus the
    final state.
    """
    if budget < 1:
        raise MethodError(f"run needs budget >= 1, got {budget}")
    if stride < 1:
        raise MethodError(f"run needs stride >= 1, got {stride}")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (obj.dimension,):
        raise MethodError(f"x0 must have shape ({obj.dimension},), got {x.shape}")
    step = make_step(method_id, obj, schedule,
                     mirror_map=mirror_map, manifold=manifold, metric=metric)

    record = TrajectoryRecord(method_id=method_id, schedule_id=schedule.describe(),
                              terminal=Terminal(BUDGET_EXHAUSTED), k_final=0, seed=seed)

    def note(k: int, pt: np.ndarray) -> None:
        record.ks.append(k)
        record.points.append(pt.copy())
        record.step_sizes.append(schedule.value(k))
        record.grad_norms.append(float(np.linalg.norm(obj.grad(pt))))

    note(0, x)
    quiet = 0  # consecutive sub-conv_tol steps
    k_next_record = stride
    for k in range(budget):
        try:
            x_new = step(k, x)
        except MethodError as err:
            record.terminal = Terminal(STEP_ERROR, message=str(err))
            record.k_final = k
            return record
        x_new = np.asarray(x_new, dtype=float)
        if np.any(np.isnan(x_new)):
            record.terminal = Terminal(STEP_ERROR, message=f"non-finite iterate at k={k + 1}")
            record.k_final = k
            return record
        motion = float(np.linalg.norm(x_new - x))
        x = x_new
        k_now = k + 1
        if k_now >= k_next_record:
            note(k_now, x)
            k_next_record += stride
        if float(np.linalg.norm(x)) > escape_radius:
            if record.ks[-1] != k_now:
                note(k_now, x)
            record.terminal = Terminal(ESCAPED_REGION)
            record.k_final = k_now
            return record
        quiet = quiet + 1 if motion < conv_tol else 0
        if quiet >= window:
            if record.ks[-1] != k_now:
                note(k_now, x)
            cls = classify_critical_point(obj, x, grad_tol=grad_tol, eig_tol=eig_tol)
            record.terminal = Terminal(CONVERGED_TO_POINT, point=x.copy(), point_class=cls)
            record.k_final = k_now
            return record
    if record.ks[-1] != budget:
        note(budget, x)
    record.terminal = Terminal(BUDGET_EXHAUSTED)
    record.k_final = budget
    return record
