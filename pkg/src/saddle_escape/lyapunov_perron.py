"""Local stable manifolds for time non-homogeneous systems, Lyapunov-Perron style.

The dynamics treated here are linear-plus-remainder recursions in the
diagonal frame of a fixed matrix H with eigenvalues lambda_1 >= ... >= lambda_d:

    x_{k+1} = (I - alpha_k H) x_k + eta(k, x_k),    eta(k, 0) = 0,

with a vanishing step schedule alpha_k and a remainder that is
alpha_k-Lipschitz-small near the origin:  ||eta(k,x) - eta(k,y)|| <=
alpha_k * epsilon * ||x - y||.  Coordinates with lambda > 0 form the stable
block E^s (factors 1 - alpha_k lambda < 1); coordinates with lambda <= 0 form
E^u.  The stable manifold is built as the fixed point of an integral operator
T on the space of delta-bounded sequences: forward variation-of-constants on
the stable block, backward tail sums on the unstable block.  T is a
contraction when

    K = 1 - alpha_0 * lambda_stable + epsilon * (K1 + K2) < 1,

where K1 bounds the forward sums  sup_k sum_i alpha_i prod_{j>i}(1-alpha_j
lambda)  and K2 bounds the backward sums of inverse products.  Both constants
are computed numerically here, with the analytic caps that make them
certificates rather than guesses.

Everything in this module works in the diagonal frame (coordinates z = Q x of
:class:`~saddle_escape.spectral.SpectralSplit`); conversion happens at the
boundary, in :func:`remainder_from_objective`.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .objectives import Objective
from .schedules import StepSchedule
from .spectral import SpectralSplit, split

__all__ = [
    "LyapunovError",
    "CertificateError",
    "PerronProblem",
    "ContractionCertificate",
    "SequenceSpaceElement",
    "ManifoldChart",
    "StablePointResult",
    "sup_distance",
    "bound_K1",
    "bound_K2",
    "contraction_constant",
    "apply_T",
    "solve_stable_point",
    "iterate_raw",
    "self_consistency_error",
    "shooting_oracle",
    "chart",
    "remainder_from_objective",
    "DEFAULT_K_PROBES",
    "DEFAULT_TAIL_TOL",
    "MAX_K2_TERMS",
]

DEFAULT_K_PROBES = (-1, 0, 1, 2, 4, 8, 16, 32)
DEFAULT_TAIL_TOL = 1e-10
MAX_K2_TERMS = 10_000_000

# fall back from the cumprod closed forms to sequential scans outside this range
_PRODUCT_UNDERFLOW = 1e-250
_PRODUCT_OVERFLOW = 1e250


class LyapunovError(RuntimeError):
    """Stable-manifold construction failed (neighborhood exit, no convergence...)."""


class CertificateError(LyapunovError):
    """A contraction constant could not be certified."""


# ---------------------------------------------------------------------------
# problem container and sequence space
# ---------------------------------------------------------------------------

@dataclass
class PerronProblem:
    """A linear-plus-remainder system prepared for the operator T.

    Parameters
    ----------
    split : SpectralSplit
        Diagonalization of H; eigenvalues define the stable/unstable blocks.
    schedule : StepSchedule
        Vanishing step sizes alpha_k.
    eta : callable (k, x) -> vector
        Remainder in the diagonal frame, eta(k, 0) = 0.
    delta : float
        Radius of the certified neighborhood B(0, delta).
    epsilon : float
        Lipschitz modulus: ||eta(k,x) - eta(k,y)|| <= alpha_k * epsilon * ||x-y||
        on B(0, delta).
    horizon : int
        Sequence truncation length N; sequences have entries 0..N.
    tail_tol : float
        Target for truncated series tails.
    eta_batch : callable (ks, X) -> matrix, optional
        Vectorized remainder: row i is eta(ks[i], X[i]).  Enables the fast
        cumprod path in :func:`apply_T`.
    tail_estimate : float, optional
        Recorded a-priori estimate of the truncated backward tail at this
        horizon (filled in by :func:`remainder_from_objective`; a
        geometric-ratio extrapolation, i.e. an estimate rather than a bound
        when the series decays subgeometrically).
    """

    split: SpectralSplit
    schedule: StepSchedule
    eta: Callable[[int, np.ndarray], np.ndarray]
    delta: float
    epsilon: float
    horizon: int
    tail_tol: float = DEFAULT_TAIL_TOL
    eta_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    tail_estimate: Optional[float] = None
    alphas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.horizon < 1:
            raise LyapunovError(f"horizon must be >= 1, got {self.horizon}")
        if not (self.delta > 0):
            raise LyapunovError(f"delta must be positive, got {self.delta}")
        if self.epsilon < 0:
            raise LyapunovError(f"epsilon must be nonnegative, got {self.epsilon}")
        self.alphas = np.asarray(self.schedule.values(self.horizon + 1), dtype=float)

    @property
    def dimension(self) -> int:
        return self.split.dimension

    def validate(self, sample_ks: Sequence[int] = (0, 1, 2, 5, 10), pairs: int = 1000,
                 seed: int = 0) -> None:
        """Spot-check the stated remainder properties by sampling.

        Verifies eta(k, 0) = 0 to 1e-14 and that sampled Lipschitz quotients
        on B(0, delta) stay below alpha_k * epsilon * 1.01 for ``pairs``
        random pairs at each sampled k.  Raises LyapunovError on violation.
        """
        rng = np.random.default_rng(seed)
        d = self.dimension
        zero = np.zeros(d)
        for k in sample_ks:
            e0 = np.asarray(self.eta(k, zero), dtype=float)
            if float(np.linalg.norm(e0)) > 1e-14:
                raise LyapunovError(
                    f"eta(k={k}, 0) = {e0} is not zero (norm {np.linalg.norm(e0):.3e})")
            X = _sample_ball(rng, pairs, d, self.delta)
            Y = _sample_ball(rng, pairs, d, self.delta)
            if self.eta_batch is not None:
                ks = np.full(pairs, k)
                EX = np.asarray(self.eta_batch(ks, X), dtype=float)
                EY = np.asarray(self.eta_batch(ks, Y), dtype=float)
            else:
                EX = np.array([self.eta(k, x) for x in X], dtype=float)
                EY = np.array([self.eta(k, y) for y in Y], dtype=float)
            gaps = np.linalg.norm(X - Y, axis=1)
            keep = gaps > 1e-12
            quot = np.linalg.norm(EX - EY, axis=1)[keep] / gaps[keep]
            cap = self.schedule.value(k) * self.epsilon * (1.0 + 1e-2)
            worst = float(np.max(quot)) if quot.size else 0.0
            if worst > cap:
                raise LyapunovError(
                    f"sampled Lipschitz quotient {worst:.6e} at k={k} exceeds "
                    f"alpha_k*epsilon*(1+1e-2) = {cap:.6e}")


def _sample_ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    v = rng.normal(size=(n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return v * r


@dataclass
class SequenceSpaceElement:
    """A truncated sequence u_0..u_N of d-vectors (rows of ``points``)."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise LyapunovError(f"sequence points must be 2-D, got shape {self.points.shape}")

    @property
    def horizon(self) -> int:
        return self.points.shape[0] - 1

    @classmethod
    def zeros(cls, horizon: int, dimension: int) -> "SequenceSpaceElement":
        return cls(np.zeros((horizon + 1, dimension)))

    def copy(self) -> "SequenceSpaceElement":
        return SequenceSpaceElement(self.points.copy())


def _points_of(u) -> np.ndarray:
    if isinstance(u, SequenceSpaceElement):
        return u.points
    return np.asarray(u, dtype=float)


def sup_distance(u, v) -> float:
    """Sequence-space metric: sup over k of the Euclidean gap ||u_k - v_k||."""
    pu, pv = _points_of(u), _points_of(v)
    if pu.shape != pv.shape:
        raise LyapunovError(f"sequence shapes differ: {pu.shape} vs {pv.shape}")
    return float(np.max(np.linalg.norm(pu - pv, axis=1)))


@dataclass(frozen=True)
class ContractionCertificate:
    """Certified contraction data for the operator T.

    ``k`` is the contraction constant  1 - alpha0*lambda_stable +
    epsilon*(k1 + k2); the certificate is ``valid`` only when k < 1.  When it
    is not, ``epsilon_star`` reports the largest Lipschitz modulus
    alpha0*lambda_stable / (K1 + K2) that would certify.
    """

    k1: float
    k2: float
    k: float
    lambda_stable: float
    lambda_unstable: Optional[float]
    alpha0: float
    epsilon: float
    valid: bool
    epsilon_star: float


# ---------------------------------------------------------------------------
# contraction constants
# ---------------------------------------------------------------------------

def bound_K1(split_: SpectralSplit, schedule: StepSchedule, k_max: int = 10_000) -> float:
    """Bound the forward variation-of-constants sums on the stable block.

    With lambda the least positive eigenvalue, the partial sums
    S_k = sum_{t<=k} alpha_t * prod_{j=t+1..k} (1 - alpha_j * lambda)
    obey the recursion S_{k+1} = (1 - alpha_{k+1} lambda) S_k + alpha_{k+1},
    S_0 = alpha_0.  Returns max_{k <= k_max} S_k and asserts the analytic cap
    S_k <= 2/lambda (in fact S_k <= 1/lambda once every alpha_k*lambda < 1).

    Raises CertificateError when no positive eigenvalue exists or
    alpha_0 * lambda >= 1 (the very first factor would not contract).
    """
    evals = split_.eigenvalues
    pos = evals[evals > 0]
    if pos.size == 0:
        raise CertificateError("no positive eigenvalue: the stable block is empty")
    lam = float(np.min(pos))
    alphas = np.asarray(schedule.values(k_max + 1), dtype=float)
    if alphas[0] * lam >= 1.0:
        raise CertificateError(
            f"alpha_0 * lambda = {alphas[0] * lam:.6g} >= 1; "
            "the first stable factor does not contract — shrink the schedule")
    if np.any(alphas * lam >= 1.0):
        raise CertificateError("alpha_k * lambda >= 1 at some k; schedule not admissible")
    s = alphas[0]
    best = s
    for k in range(1, k_max + 1):
        s = (1.0 - alphas[k] * lam) * s + alphas[k]
        if s > best:
            best = s
    if best > 2.0 / lam:
        raise CertificateError(
            f"K1 = {best:.6g} violates the analytic cap 2/lambda = {2.0 / lam:.6g}")
    return float(best)


class _AlphaCache:
    """Grow-on-demand view of a schedule's value array (amortized O(n))."""

    def __init__(self, schedule: StepSchedule, initial: int = 4096):
        self.schedule = schedule
        self.arr = np.asarray(schedule.values(initial), dtype=float)

    def range(self, a: int, b: int) -> np.ndarray:
        if b > self.arr.shape[0]:
            n = max(b, 2 * self.arr.shape[0])
            self.arr = np.asarray(self.schedule.values(n), dtype=float)
        return self.arr[a:b]


def _k2_series(cache: _AlphaCache, lam: float, k: int, tail_tol: float,
               max_terms: int, warn_on_cap: bool = True) -> tuple[float, float, bool]:
    """Sum a_i = alpha_{k+1+i} * prod_{j=k+1}^{k+1+i} (1 - alpha_j lam)^{-1}.

    Stops once the running term drops below tail_tol * (1 - ratio) — the
    remaining geometric-majorant tail is then below tail_tol — and adds the
    extrapolated tail  term * ratio / (1 - ratio).  Returns
    (sum_with_tail, tail_estimate, hit_cap).

    If ``max_terms`` summands are consumed while the terms are still
    decaying, the truncated sum plus the same extrapolation is returned with
    hit_cap=True (and a RuntimeWarning).  Terms that have stopped decaying at
    the cap mean the series cannot be certified numerically: CertificateError.
    """
    chunk = 65536
    start = k + 1
    total = 0.0
    carry = 1.0
    i0 = 0
    prev_last = None
    last = ratio = None
    while i0 < max_terms:
        m = min(chunk, max_terms - i0)
        alph = cache.range(start + i0, start + i0 + m)
        inv = 1.0 / (1.0 - alph * lam)
        cp = carry * np.cumprod(inv)
        terms = alph * cp
        total += float(np.sum(terms))
        carry = float(cp[-1])
        last = float(terms[-1])
        if last == 0.0:  # underflowed: the tail is numerically zero
            return total, 0.0, False
        if m >= 2:
            ratio = last / float(terms[-2])
        elif prev_last is not None:
            ratio = last / prev_last
        else:
            ratio = None
        prev_last = last
        if ratio is not None and ratio < 1.0 and last < tail_tol * (1.0 - ratio):
            tail = last * ratio / (1.0 - ratio)
            return total + tail, tail, False
        i0 += m
    if ratio is None or ratio >= 1.0:
        raise CertificateError(
            f"backward series terms stopped decaying after {max_terms} summands "
            f"(last ratio {ratio}); the bound is not numerically certifiable")
    tail = last * ratio / (1.0 - ratio)
    if warn_on_cap:
        warnings.warn(
            f"backward series truncated at {max_terms} summands before reaching "
            f"tail_tol={tail_tol:g}; adding geometric tail estimate {tail:.3e}",
            RuntimeWarning, stacklevel=3)
    return total + tail, tail, True


def bound_K2(split_: SpectralSplit, schedule: StepSchedule,
             k_probe: Sequence[int] = DEFAULT_K_PROBES,
             tail_tol: float = DEFAULT_TAIL_TOL,
             max_terms: int = MAX_K2_TERMS) -> float:
    """Bound the backward tail sums on the unstable block.

    With lambda the strictly negative eigenvalue closest to zero (the slowest
    inverse decay, hence the dominant coordinate), computes for each probe k

        R_k = sum_{i>=0} alpha_{k+1+i} * prod_{j=k+1}^{k+1+i} (1 - alpha_j lambda)^{-1}

    by direct truncated summation (see :func:`_k2_series` for the stopping
    safeguard) and returns the max over probes.  Probe k = -1 covers the sum
    anchoring the unstable coordinate of the 0-th sequence entry.

    A zero eigenvalue in the unstable block makes the terms non-decaying
    (inverse factors equal to 1), so it is rejected outright.
    """
    evals = split_.eigenvalues
    if np.any(evals == 0.0):
        raise CertificateError(
            "zero eigenvalue in the unstable block: the backward error terms "
            "do not decay, no finite bound exists")
    negs = evals[evals < 0]
    if negs.size == 0:
        return 0.0  # empty unstable block: no backward sums to bound
    lam = float(np.max(negs))
    cache = _AlphaCache(schedule)
    best = 0.0
    for k in k_probe:
        if k < -1:
            raise CertificateError(f"k_probe entries must be >= -1, got {k}")
        value, _, _ = _k2_series(cache, lam, k, tail_tol, max_terms)
        if value > best:
            best = value
    return float(best)


def contraction_constant(prob: PerronProblem, k_max: int = 10_000,
                         k_probe: Sequence[int] = DEFAULT_K_PROBES) -> ContractionCertificate:
    """Assemble the contraction certificate K = 1 - alpha0*lambda + eps*(K1+K2).

    A zero remainder (epsilon = 0) needs no K2: the backward sums carry a
    factor epsilon and drop out, so for problems without a strictly negative
    eigenvalue the certificate is still well defined.
    """
    evals = prob.split.eigenvalues
    pos = evals[evals > 0]
    if pos.size == 0:
        raise CertificateError("no positive eigenvalue: the stable block is empty")
    lam_s = float(np.min(pos))
    negs = evals[evals < 0]
    lam_u = float(np.max(negs)) if negs.size else None
    k1 = bound_K1(prob.split, prob.schedule, k_max)
    if prob.epsilon == 0.0:
        k2 = 0.0  # zero remainder: the K2 term is multiplied by epsilon = 0
    elif negs.size == 0 and not np.any(evals == 0.0):
        k2 = 0.0  # empty unstable block: no backward sums exist
    else:
        k2 = bound_K2(prob.split, prob.schedule, k_probe, prob.tail_tol)
    alpha0 = float(prob.schedule.value(0))
    k_total = 1.0 - alpha0 * lam_s + prob.epsilon * (k1 + k2)
    denom = k1 + k2
    eps_star = alpha0 * lam_s / denom if denom > 0 else math.inf
    return ContractionCertificate(k1=k1, k2=k2, k=float(k_total),
                                  lambda_stable=lam_s, lambda_unstable=lam_u,
                                  alpha0=alpha0, epsilon=prob.epsilon,
                                  valid=bool(k_total < 1.0), epsilon_star=float(eps_star))


# ---------------------------------------------------------------------------
# the operator T
# ---------------------------------------------------------------------------

def _as_stable_vector(prob: PerronProblem, x0_plus) -> np.ndarray:
    xp = np.atleast_1d(np.asarray(x0_plus, dtype=float))
    d_s = len(prob.split.stable_indices)
    if xp.shape != (d_s,):
        raise LyapunovError(
            f"x0_plus must have one coordinate per stable eigenvalue ({d_s}), "
            f"got shape {xp.shape}")
    return xp


def _eta_all(prob: PerronProblem, U: np.ndarray) -> np.ndarray:
    n = U.shape[0]
    if prob.eta_batch is not None:
        E = np.asarray(prob.eta_batch(np.arange(n), U), dtype=float)
        if E.shape != U.shape:
            raise LyapunovError(f"eta_batch returned shape {E.shape}, expected {U.shape}")
        return E
    return np.array([prob.eta(k, U[k]) for k in range(n)], dtype=float)


def apply_T(prob: PerronProblem, x0_plus, u) -> SequenceSpaceElement:
    """One application of the Lyapunov-Perron operator T to the sequence u.

    In the diagonal frame, with B/C the coordinate-wise products of
    (1 - alpha_j lambda) over the stable/unstable blocks:

    - stable block, forward:   v_{k+1}^+ = B(k,0) x0^+ + sum_{i<=k} B(k,i+1) eta^+(i, u_i)
    - unstable block, backward: v_{k+1}^- = -sum_{i=0}^{N-k-1} C(k+1+i, k+1)^{-1} eta^-(k+1+i, u_{k+1+i})
    - entry 0: v_0^+ = x0^+ and v_0^- = -sum_{i=1}^{N} C(i-1, 0)^{-1} eta^-(i-1, u_{i-1})

    The anchor x0_plus is written into v_0^+ directly, which makes the
    0-th entry independent of u; the fixed point then steps forward
    consistently under the raw dynamics from its own entry 0.

    Raises LyapunovError if any output entry leaves B(0, delta*(1+1e-6)).
    """
    U = _points_of(u)
    if U.shape != (prob.horizon + 1, prob.dimension):
        raise LyapunovError(
            f"sequence shape {U.shape} does not match horizon+1 x dim = "
            f"({prob.horizon + 1}, {prob.dimension})")
    xp = _as_stable_vector(prob, x0_plus)
    if float(np.linalg.norm(xp)) > prob.delta:
        raise LyapunovError(
            f"anchor |x0_plus| = {np.linalg.norm(xp):.6g} lies outside B(0, delta={prob.delta})")
    E = _eta_all(prob, U)
    V = _scan_T(prob, xp, E)
    norms = np.linalg.norm(V, axis=1)
    limit = prob.delta * (1.0 + 1e-6)
    if float(np.max(norms)) > limit:
        bad = int(np.argmax(norms > limit))
        raise LyapunovError(
            f"operator image leaves the certified neighborhood at entry {bad}: "
            f"|v_{bad}| = {norms[bad]:.6g} > delta*(1+1e-6) = {limit:.6g}")
    return SequenceSpaceElement(V)


def _scan_T(prob: PerronProblem, xp: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Evaluate T given precomputed remainder rows E; cumprod fast path with
    a sequential-scan fallback when the products leave floating-point range."""
    N = prob.horizon
    S = prob.split.stable_indices
    Uix = prob.split.unstable_indices
    lam_s = prob.split.eigenvalues[S]
    lam_u = prob.split.eigenvalues[Uix]
    alphas = prob.alphas
    Ep = E[:, S]
    Em = E[:, Uix]
    V = np.zeros_like(E)
    V[0, S] = xp

    # stable block: v+_{k+1} = f_k v+_k + eta+_k,  f_k = 1 - alpha_k lam_s
    if len(S):
        facs = 1.0 - alphas[:N, None] * lam_s[None, :]  # rows k = 0..N-1
        with np.errstate(over="ignore", under="ignore"):
            P = np.cumprod(facs, axis=0)  # P[k] = prod_{j<=k} f_j
        if np.all(facs > 0.0) and (P.size == 0 or float(np.min(P)) > _PRODUCT_UNDERFLOW):
            # closed form v+_{k+1} = P_k (x0+ + sum_{i<=k} eta+_i / P_i)
            V[1:, S] = P * (xp[None, :] + np.cumsum(Ep[:N] / P, axis=0))
        else:
            vp = xp.copy()
            for k in range(N):
                vp = facs[k] * vp + Ep[k]
                V[k + 1, S] = vp

    # unstable block: t_m = (eta-_m + t_{m+1}) / g_m backward, v-_m = -t_m
    if len(Uix):
        gfac = 1.0 - alphas[:, None] * lam_u[None, :]  # rows k = 0..N, all >= 1 for lam_u < 0
        with np.errstate(over="ignore", under="ignore"):
            Pc = np.cumprod(gfac, axis=0)  # Pc[m] = prod_{j<=m} g_j
        finite = np.all(np.isfinite(Pc))
        if finite and np.all(gfac > 0.0) and float(np.max(Pc)) < _PRODUCT_OVERFLOW:
            W = Em / Pc
            G = np.cumsum(W, axis=0)
            Pc_shift = np.vstack([np.ones((1, len(Uix))), Pc[:-1]])  # Pc_{m-1}
            T_all = Pc_shift * (G[-1][None, :] - G + W)  # t_m = Pc_{m-1} sum_{i>=m} W_i
            V[1:, Uix] = -T_all[1:]
            v0m = -(T_all[0] - Em[N] / Pc[N])
            V[0, Uix] = v0m
        else:
            t = np.zeros(len(Uix))
            ts = np.empty((N + 1, len(Uix)))
            for m in range(N, -1, -1):
                t = (Em[m] + t) / gfac[m]
                ts[m] = t
            V[1:, Uix] = -ts[1:]
            # entry 0 drops the (N, 0) term of the full backward sum
            cinv_n0 = np.exp(-np.sum(np.log(gfac), axis=0))
            V[0, Uix] = -(ts[0] - cinv_n0 * Em[N])
    return V


class StablePointResult(NamedTuple):
    """Output of solve_stable_point."""

    x0_minus: np.ndarray
    sequence: SequenceSpaceElement
    residual: float
    iterations: int
    history: list


def solve_stable_point(prob: PerronProblem, x0_plus, fp_tol: float = 1e-10,
                       fp_budget: int = 500) -> StablePointResult:
    """Picard-iterate T from the zero sequence until sup-distance < fp_tol.

    Returns the unstable coordinates of the converged 0-th entry (the chart
    value x0_minus), the whole fixed sequence, the final residual, the number
    of applications, and the residual history (geometric at rate <= K for a
    certified problem).
    """
    xp = _as_stable_vector(prob, x0_plus)
    u = SequenceSpaceElement.zeros(prob.horizon, prob.dimension)
    history: list = []
    for j in range(fp_budget):
        v = apply_T(prob, xp, u)
        r = sup_distance(u, v)
        history.append(r)
        u = v
        if r < fp_tol:
            x0_minus = u.points[0, prob.split.unstable_indices].copy()
            return StablePointResult(x0_minus, u, r, j + 1, history)
    raise LyapunovError(
        f"Picard iteration did not reach fp_tol={fp_tol:g} within {fp_budget} "
        f"applications (last residual {history[-1]:.3e})")


# ---------------------------------------------------------------------------
# raw dynamics, self-consistency, shooting
# ---------------------------------------------------------------------------

def _raw_alphas(prob: PerronProblem, num_steps: int) -> np.ndarray:
    if num_steps + 1 <= prob.alphas.shape[0]:
        return prob.alphas
    return np.asarray(prob.schedule.values(num_steps + 1), dtype=float)


def iterate_raw(prob: PerronProblem, x0, num_steps: int,
                stop_radius: Optional[float] = None) -> tuple[np.ndarray, Optional[int]]:
    """Run the raw recursion x_{k+1} = (I - alpha_k H) x_k + eta(k, x_k).

    Works in the diagonal frame.  Returns (trajectory, exit_step); exit_step
    is the first k with ||x_k|| > stop_radius, or None if the trajectory
    stayed inside for all num_steps (trajectory then has num_steps+1 rows).
    """
    lam = prob.split.eigenvalues
    alphas = _raw_alphas(prob, num_steps)
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (prob.dimension,):
        raise LyapunovError(f"x0 must have shape ({prob.dimension},), got {x.shape}")
    traj = [x.copy()]
    for k in range(num_steps):
        x = (1.0 - alphas[k] * lam) * x + np.asarray(prob.eta(k, x), dtype=float)
        traj.append(x.copy())
        if stop_radius is not None and float(np.linalg.norm(x)) > stop_radius:
            return np.asarray(traj), k + 1
    return np.asarray(traj), None


def self_consistency_error(prob: PerronProblem, seq) -> float:
    """Max per-entry gap between seq and its own raw forward step.

    For the converged fixed sequence this is at the fixed-point tolerance:
    the integral form and the recursive form describe the same orbit.
    """
    U = _points_of(seq)
    N = U.shape[0] - 1
    lam = prob.split.eigenvalues
    alphas = _raw_alphas(prob, N)
    E = _eta_all(prob, U[:N])
    stepped = (1.0 - alphas[:N, None] * lam[None, :]) * U[:N] + E
    return float(np.max(np.linalg.norm(stepped - U[1:], axis=1)))


def _exit_side(prob: PerronProblem, x0: np.ndarray, steps: int, uix: int,
               factors: np.ndarray) -> int:
    """-1/+1: escaped B(0, delta) with that sign of the unstable coordinate;
    0: stayed inside for all steps."""
    x = x0.copy()
    delta = prob.delta
    eta = prob.eta
    for k in range(steps):
        x = factors[k] * x + eta(k, x)
        if x @ x > delta * delta:
            return 1 if x[uix] > 0 else -1
    return 0


def _exit_sides_batch(prob: PerronProblem, X0: np.ndarray, steps: int, uix: int,
                      factors: np.ndarray) -> np.ndarray:
    """Per-row _exit_side for a batch of starts, advanced in lockstep."""
    m = X0.shape[0]
    X = X0.copy()
    sides = np.zeros(m, dtype=np.int64)
    active = np.arange(m)
    d2 = prob.delta * prob.delta
    for k in range(steps):
        Xa = X[active]
        Xn = factors[k][None, :] * Xa + np.asarray(
            prob.eta_batch(np.full(active.size, k), Xa), dtype=float)
        X[active] = Xn
        out = np.einsum("ij,ij->i", Xn, Xn) > d2
        if out.any():
            oi = active[out]
            sides[oi] = np.where(Xn[out, uix] > 0.0, 1, -1)
            active = active[~out]
            if active.size == 0:
                break
    return sides


def shooting_oracle(prob: PerronProblem, x0_plus, bracket: float, steps: int,
                    width: float = 1e-12) -> np.ndarray:
    """Independent chart value by bracket refinement on the raw dynamics.

    Requires a one-dimensional unstable block.  Refines the unstable
    coordinate c in [-bracket, +bracket] on the signed outcome of "does the
    trajectory from (x0_plus, c) leave B(0, delta) upward or downward within
    `steps` iterations"; trajectories that stay bounded for the whole horizon
    are treated as not-yet-escaped-downward, so the refinement converges to
    the lower edge of the bounded zone (whose width shrinks like 1/steps).
    Returns the bracket midpoint once it is narrower than ``width``.

    When the problem carries a vectorized remainder each round probes many
    candidates in lockstep (one pass of the dynamics per round instead of
    one per probe); otherwise this is plain bisection.
    """
    if len(prob.split.unstable_indices) != 1:
        raise LyapunovError("shooting validation needs a one-dimensional unstable block")
    xp = _as_stable_vector(prob, x0_plus)
    uix = int(prob.split.unstable_indices[0])
    six = prob.split.stable_indices
    lam = prob.split.eigenvalues
    alphas = _raw_alphas(prob, steps)
    factors = 1.0 - alphas[:steps, None] * lam[None, :]

    def sides_of(cs) -> np.ndarray:
        X0 = np.zeros((len(cs), prob.dimension))
        X0[:, six] = xp[None, :]
        X0[:, uix] = cs
        if prob.eta_batch is not None:
            return _exit_sides_batch(prob, X0, steps, uix, factors)
        return np.array([_exit_side(prob, x0, steps, uix, factors) for x0 in X0])

    lo, hi = -abs(bracket), abs(bracket)
    s_lo, s_hi = sides_of([lo, hi])
    if s_lo == 0 and s_hi == 0:
        raise LyapunovError(
            "both bracket endpoints stay bounded for the whole horizon; "
            "the bracket is too small to straddle the stable point")
    if s_lo == 0 or s_hi == 0:
        raise LyapunovError(
            "one bracket endpoint stays bounded for the whole horizon; "
            "widen the bracket or increase steps")
    if s_lo == s_hi:
        raise LyapunovError(
            "both bracket endpoints escape to the same side; "
            "no stable point bracketed")
    if s_lo == 1:  # orient: lo escapes downward, hi upward
        lo, hi = hi, lo
    m = 33 if prob.eta_batch is not None else 3
    while abs(hi - lo) > width:
        cs = np.linspace(lo, hi, m)
        interior = np.where(sides_of(cs[1:-1]) == -1, -1, 1)
        # first candidate (scanning from lo) that no longer exits downward
        j = 1 + int(np.argmax(np.concatenate([interior, [1]])))
        lo, hi = cs[j - 1], cs[j]
    return np.array([0.5 * (lo + hi)])


# ---------------------------------------------------------------------------
# the chart
# ---------------------------------------------------------------------------

@dataclass
class ManifoldChart:
    """Sampled stable-manifold chart phi: stable block -> unstable block.

    ``grid``, ``phi``, ``residuals``, ``picard_iters`` are parallel; failed
    samples hold None and are listed in ``failures`` with the error message
    (``partial`` is then True).  ``dphi_norms`` maps each finite-difference
    spacing h to the central-difference norm of Dphi(0).
    """

    grid: list
    phi: list
    residuals: list
    picard_iters: list
    phi_zero_norm: float
    dphi_norms: dict
    tangency_ok: bool
    continuity_ok: bool
    partial: bool
    failures: list

    @property
    def phi_samples(self) -> dict:
        return {tuple(np.atleast_1d(g).tolist()): p
                for g, p in zip(self.grid, self.phi) if p is not None}


def chart(prob: PerronProblem, grid: Sequence, fp_tol: float = 1e-10,
          fp_budget: int = 500, delta_grid: Optional[float] = None,
          tangency_spacings: Sequence[float] = (1e-2, 1e-3),
          tangency_tol: float = 1e-3, workers: Optional[int] = None) -> ManifoldChart:
    """Map solve_stable_point over a grid of stable-block anchors.

    Also solves at 0 (the chart must vanish there), takes central
    finite-difference derivatives of phi at 0 for each spacing in
    ``tangency_spacings`` (tangency to the stable block requires
    ||Dphi(0)|| <= tangency_tol), and flags discontinuity when an adjacent
    difference quotient exceeds 3x the median of the others (a heuristic
    jump detector, not a Lipschitz proof).  Individual sample failures mark
    the chart partial instead of aborting the rest.
    """
    if delta_grid is None:
        delta_grid = prob.delta / 2.0
    grid_vecs = [_as_stable_vector(prob, g) for g in grid]
    for g in grid_vecs:
        if float(np.linalg.norm(g)) > delta_grid:
            raise LyapunovError(
                f"grid point {g} lies outside the chart radius delta_grid={delta_grid:g}")

    def solve_many(vecs):
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(_chart_sample, prob, g, fp_tol, fp_budget) for g in vecs]
                return [f.result() for f in futs]
        return [_chart_sample(prob, g, fp_tol, fp_budget) for g in vecs]

    results = solve_many(grid_vecs)
    phi_vals = [r[0] for r in results]
    residuals = [r[1] for r in results]
    iters = [r[2] for r in results]
    failures = [(g, r[3]) for g, r in zip(grid_vecs, results) if r[3] is not None]

    d_s = len(prob.split.stable_indices)
    zero = np.zeros(d_s)
    phi0, res0, _, fail0 = _chart_sample(prob, zero, fp_tol, fp_budget)
    if fail0 is not None:
        failures.append((zero, fail0))
        phi_zero_norm = math.inf
    else:
        phi_zero_norm = float(np.linalg.norm(phi0))

    dphi_norms: dict = {}
    for h in tangency_spacings:
        cols = []
        failed = False
        for i in range(d_s):
            e = np.zeros(d_s)
            e[i] = h
            fp, _, _, f1 = _chart_sample(prob, e, fp_tol, fp_budget)
            fm, _, _, f2 = _chart_sample(prob, -e, fp_tol, fp_budget)
            if f1 is not None or f2 is not None:
                failures.append((e, f1 or f2))
                failed = True
                break
            cols.append((fp - fm) / (2.0 * h))
        if not failed:
            D = np.stack(cols, axis=1)  # d_u x d_s
            dphi_norms[h] = float(np.linalg.norm(D, 2))
    tangency_ok = bool(dphi_norms) and all(v <= tangency_tol for v in dphi_norms.values())

    ratios = []
    for i in range(len(grid_vecs) - 1):
        if phi_vals[i] is None or phi_vals[i + 1] is None:
            continue
        gap = float(np.linalg.norm(grid_vecs[i + 1] - grid_vecs[i]))
        if gap > 0:
            ratios.append(float(np.linalg.norm(phi_vals[i + 1] - phi_vals[i])) / gap)
    if len(ratios) >= 3:
        lip = max(1.0, 3.0 * float(np.median(ratios)))
        continuity_ok = all(r <= lip for r in ratios)
    else:
        continuity_ok = True

    return ManifoldChart(grid=grid_vecs, phi=phi_vals, residuals=residuals,
                         picard_iters=iters, phi_zero_norm=phi_zero_norm,
                         dphi_norms=dphi_norms, tangency_ok=tangency_ok,
                         continuity_ok=continuity_ok, partial=bool(failures),
                         failures=failures)


def _chart_sample(prob, g, fp_tol, fp_budget):
    try:
        res = solve_stable_point(prob, g, fp_tol=fp_tol, fp_budget=fp_budget)
        return res.x0_minus, res.residual, res.iterations, None
    except LyapunovError as err:
        return None, None, None, str(err)


# ---------------------------------------------------------------------------
# from an objective to a problem (conjugation into the diagonal frame)
# ---------------------------------------------------------------------------

def remainder_from_objective(obj: Objective, x_star, schedule: StepSchedule, *,
                             method: str = "gd", delta0: float = 0.1,
                             max_halvings: int = 20, horizon: Optional[int] = None,
                             horizon_cap: int = 100_000,
                             tail_tol: float = DEFAULT_TAIL_TOL,
                             epsilon: Optional[float] = None,
                             n_pairs: int = 10_000, safety: float = 1.5, seed: int = 0,
                             k_max: int = 10_000,
                             k_probe: Sequence[int] = DEFAULT_K_PROBES,
                             ) -> tuple[PerronProblem, ContractionCertificate]:
    """Build the diagonal-frame remainder problem for a method at a saddle.

    For gradient descent the update is g(k,x) = x - alpha_k grad f(x), whose
    deviation from its linearization at the critical point x* is
    theta(k,x) = -alpha_k*(grad f(x) - H (x - x*)) with H the Hessian there.
    Conjugating by the eigenbasis (z = Q(x - x*)) gives the remainder

        eta(k, z) = -alpha_k * Q * (grad f(x* + Q^{-1} z) - H Q^{-1} z),

    which vanishes at 0 and inherits a Lipschitz modulus alpha_k * epsilon
    from the Hessian's modulus of continuity.  epsilon is the analytic bound
    for the builtin objectives (0 for quadratics; 6|a|delta for the cubic
    perturbation, a conservative bound on the Hessian deviation over
    B(0, delta)) and a sampled-quotient estimate (times a 1.5 safety factor)
    otherwise.

    delta starts at delta0 and is halved (at most max_halvings times) until
    the certificate K < 1 holds.  The horizon is grown until the a-priori
    truncation estimate epsilon*delta*(backward-series tail beyond N) falls
    under tail_tol, capped at horizon_cap; the achieved estimate is recorded
    on the problem as ``tail_estimate``.

    Returns (PerronProblem, ContractionCertificate).  Only gradient descent
    is implemented: the other methods linearize differently at critical
    points and their remainders are not this Taylor form.
    """
    if method != "gd":
        raise NotImplementedError(
            f"remainder extraction implemented for 'gd' only, got {method!r}")
    x_star = np.asarray(x_star, dtype=float)
    g_star = np.asarray(obj.grad(x_star), dtype=float)
    if float(np.linalg.norm(g_star)) > 1e-8:
        raise LyapunovError(
            f"x_star is not a critical point: |grad| = {np.linalg.norm(g_star):.3e}")
    H = np.asarray(obj.hess(x_star), dtype=float)
    sp = split(H)
    evals = sp.eigenvalues
    if not np.any(evals > 0) or not np.any(evals < 0):
        raise LyapunovError(
            "need at least one positive and one strictly negative eigenvalue "
            f"at x_star (spectrum {evals}); degenerate-only spectra are rejected")

    Q, Qi = sp.Q, sp.Q_inv

    def psi(z: np.ndarray) -> np.ndarray:
        w = Qi @ z
        return -(Q @ (obj.grad(x_star + w) - H @ w))

    def eta(k: int, z: np.ndarray) -> np.ndarray:
        return schedule.value(k) * psi(z)

    eta_batch = None
    if obj.vectorized:
        alpha_cache = _AlphaCache(schedule)

        def psi_batch(Z: np.ndarray) -> np.ndarray:
            W = Z @ Qi.T
            return -((np.asarray(obj.grad(x_star[None, :] + W)) - W @ H.T) @ Q.T)

        def eta_batch(ks, Z):  # noqa: F811 - deliberate rebind
            ks = np.asarray(ks)
            alph = alpha_cache.range(0, int(ks.max()) + 1)[ks]
            return alph[:, None] * psi_batch(np.asarray(Z, dtype=float))

    a_coef = getattr(obj, "cubic_coefficient", None)
    is_quadratic = getattr(obj, "quadratic_matrix", None) is not None

    k1 = bound_K1(sp, schedule, k_max)
    if is_quadratic and not epsilon:
        # exactly-zero remainder: the backward bound enters with weight 0
        k2 = 0.0
    else:
        k2 = bound_K2(sp, schedule, k_probe, tail_tol)
    lam_s = float(np.min(evals[evals > 0]))
    lam_u = float(np.max(evals[evals < 0]))
    alpha0 = float(schedule.value(0))

    delta = float(delta0)
    eps_val = cert = None
    for _ in range(max_halvings + 1):
        if epsilon is not None:
            eps_val = float(epsilon)
        elif is_quadratic:
            eps_val = 0.0
        elif a_coef is not None:
            eps_val = 6.0 * abs(a_coef) * delta
        else:
            eps_val = _sampled_epsilon(psi, psi_batch if eta_batch else None,
                                       sp.dimension, delta, n_pairs, safety, seed)
        k_total = 1.0 - alpha0 * lam_s + eps_val * (k1 + k2)
        denom = k1 + k2
        cert = ContractionCertificate(
            k1=k1, k2=k2, k=float(k_total), lambda_stable=lam_s,
            lambda_unstable=lam_u, alpha0=alpha0, epsilon=eps_val,
            valid=bool(k_total < 1.0),
            epsilon_star=float(alpha0 * lam_s / denom) if denom > 0 else math.inf)
        if cert.valid or epsilon is not None:
            break
        delta *= 0.5
    if not cert.valid and epsilon is None:
        raise CertificateError(
            f"no contraction after {max_halvings} delta-halvings "
            f"(K = {cert.k:.6g}, epsilon needs to be < {cert.epsilon_star:.6g})")

    cache = _AlphaCache(schedule)
    if horizon is None:
        n = 1024
        while True:
            _, tail_est, capped = _k2_series(cache, lam_u, -1, 0.0, max_terms=n + 1,
                                             warn_on_cap=False)
            if not capped or eps_val * delta * tail_est < tail_tol or n >= horizon_cap:
                break
            n = min(2 * n, horizon_cap)
        horizon = n
        tail_estimate = eps_val * delta * tail_est
    else:
        _, tail_est, _ = _k2_series(cache, lam_u, -1, 0.0, max_terms=horizon + 1,
                                    warn_on_cap=False)
        tail_estimate = eps_val * delta * tail_est

    prob = PerronProblem(split=sp, schedule=schedule, eta=eta, delta=delta,
                         epsilon=eps_val, horizon=int(horizon), tail_tol=tail_tol,
                         eta_batch=eta_batch, tail_estimate=float(tail_estimate))
    return prob, cert


def _sampled_epsilon(psi, psi_batch, d: int, delta: float, n_pairs: int,
                     safety: float, seed: int) -> float:
    """Estimate the Lipschitz modulus of psi on B(0, delta) from random pairs."""
    rng = np.random.default_rng(seed)
    X = _sample_ball(rng, n_pairs, d, delta)
    Y = _sample_ball(rng, n_pairs, d, delta)
    if psi_batch is not None:
        PX, PY = psi_batch(X), psi_batch(Y)
    else:
        PX = np.array([psi(x) for x in X])
        PY = np.array([psi(y) for y in Y])
    gaps = np.linalg.norm(X - Y, axis=1)
    keep = gaps > 1e-12
    quot = np.linalg.norm(PX - PY, axis=1)[keep] / gaps[keep]
    if not quot.size:
        return 0.0
    return float(np.max(quot)) * safety
