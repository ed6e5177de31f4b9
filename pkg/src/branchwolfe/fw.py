"""Continuous node solvers.

The active-set family (standard, away, pairwise, blended pairwise) shares one
corrective loop: per iteration the away vertex ``a`` and local FW vertex ``s``
are read off the active set, a global vertex ``v`` is obtained (from the cache
when lazification is on, from the oracle otherwise), and either the variant's
corrective step or a global FW step with line search is taken.  The
decomposition-invariant variant keeps no active set and instead combines a
global vertex, an in-face away vertex, and an explicit maximum-step oracle.

Whenever ``v`` comes from a true oracle call, ``<grad, x - v>`` is the exact
FW gap, so ``f(x) - gap`` is a valid lower bound on the subproblem optimum;
the best such bound is tracked and reported through ``FWResult.fw_gap``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .core import ATOL, ActiveSet
from .errors import DomainViolation, NonDescentDirection, WarmStartFailure


class FWVariant(Enum):
    STANDARD = "standard"
    AWAY = "afw"
    PAIRWISE = "pfw"
    BPCG = "bpcg"
    DICG = "dicg"


class FWStatus(Enum):
    GAP_REACHED = "gap_reached"
    ITER_LIMIT = "iter_limit"
    TIME_LIMIT = "time_limit"
    CALLBACK_STOP = "callback_stop"
    DOMAIN_FAILURE = "domain_failure"


@dataclass
class FWResult:
    iterate: np.ndarray
    active_set: Optional[ActiveSet]
    primal: float
    fw_gap: float
    iterations: int
    lmo_calls: int
    status: FWStatus

    @property
    def lower_bound(self) -> float:
        return self.primal - self.fw_gap


@dataclass
class FWCallbackState:
    """Per-iteration view handed to callbacks.

    ``fw_gap`` is the most recent gap from a true oracle call (inf before the
    first one), so ``primal - fw_gap`` is always a valid node bound.
    """

    t: int
    primal: float
    fw_gap: float
    lmo_calls: int
    x: np.ndarray


def fw_gap(gradient, iterate, fw_vertex) -> float:
    """``<gradient, iterate - fw_vertex>``; nonnegative (up to round-off) when
    ``fw_vertex`` minimizes the linear function over the feasible region."""
    return float(np.dot(gradient, np.asarray(iterate) - np.asarray(fw_vertex)))


# ---------------------------------------------------------------------------
# line searches
# ---------------------------------------------------------------------------


class LineSearch:
    """Step-size rule for a move ``x + gamma * d`` with ``gamma`` in
    ``[0, gamma_max]``."""

    def step(self, f, grad_at, x, d, gamma_max, derphi0, t):
        raise NotImplementedError

    def _check_descent(self, derphi0) -> bool:
        """True when the step should be skipped (zero directional slope);
        raises on a genuine ascent direction."""
        if derphi0 > 1e-12:
            raise NonDescentDirection(
                f"directional derivative {derphi0} is positive"
            )
        return derphi0 > -1e-15

    @staticmethod
    def _shrink_into_domain(domain_oracle, x, d, gamma, shrink=0.8):
        while gamma > 1e-16 and not domain_oracle(x + gamma * d):
            gamma *= shrink
        return gamma if gamma > 1e-16 else 0.0


class Agnostic(LineSearch):
    """Open-loop rule ``2 / (t + 2)``; only meaningful for standard FW steps."""

    def step(self, f, grad_at, x, d, gamma_max, derphi0, t):
        return max(0.0, min(gamma_max, 2.0 / (t + 2.0)))


class Secant(LineSearch):
    """Secant root-finding on ``phi'(gamma) = <grad f(x + gamma d), d>``.

    With a domain oracle, the upper end of the interval is first shrunk
    geometrically until the trial point lies inside the domain; since the
    domain is convex and ``x`` is inside it, the whole bracket then is.
    Returns a step with ``|phi'| <= tol`` or the best bracketing endpoint.
    """

    def __init__(self, max_iter: int = 40, tol: float = 1e-8,
                 domain_oracle=None, domain_shrink: float = 0.8):
        self.max_iter = max_iter
        self.tol = tol
        self.domain_oracle = domain_oracle
        self.domain_shrink = domain_shrink

    def step(self, f, grad_at, x, d, gamma_max, derphi0, t):
        if gamma_max <= 0.0:
            return 0.0
        if self._check_descent(derphi0):
            return 0.0
        hi = gamma_max
        if self.domain_oracle is not None:
            hi = self._shrink_into_domain(self.domain_oracle, x, d, hi,
                                          self.domain_shrink)
            if hi == 0.0:
                return 0.0

        def derphi(gamma):
            return float(np.dot(grad_at(x + gamma * d), d))

        dhi = derphi(hi)
        while not math.isfinite(dhi) and hi > 1e-16:
            hi *= 0.5
            dhi = derphi(hi)
        if dhi <= 0.0:
            return hi
        # Regula falsi with the Illinois safeguard so neither endpoint stalls.
        lo, dlo = 0.0, derphi0
        side = 0
        for _ in range(self.max_iter):
            denom = dhi - dlo
            if denom > 0.0:
                gamma = hi - dhi * (hi - lo) / denom
            else:
                gamma = 0.5 * (lo + hi)
            if not (lo < gamma < hi):
                gamma = 0.5 * (lo + hi)
            val = derphi(gamma)
            if abs(val) <= self.tol:
                return gamma
            if val > 0.0:
                if side > 0:
                    dlo *= 0.5
                hi, dhi = gamma, val
                side = 1
            else:
                if side < 0:
                    dhi *= 0.5
                lo, dlo = gamma, val
                side = -1
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        # phi is non-increasing on [0, lo], so lo preserves descent.
        return lo


class Backtracking(LineSearch):
    """Sufficient-decrease search with an adaptive smoothness estimate: the
    candidate step is the quadratic-model minimizer for the current estimate,
    and the estimate is multiplied by ``tau`` until the decrease test holds."""

    def __init__(self, tau: float = 2.0, l_est: float = 1.0,
                 domain_oracle=None, max_iter: int = 60):
        self.tau = tau
        self.l_est = l_est
        self._l_floor = l_est * 1e-6
        self.domain_oracle = domain_oracle
        self.max_iter = max_iter

    def step(self, f, grad_at, x, d, gamma_max, derphi0, t):
        if gamma_max <= 0.0:
            return 0.0
        if self._check_descent(derphi0):
            return 0.0
        hi = gamma_max
        if self.domain_oracle is not None:
            hi = self._shrink_into_domain(self.domain_oracle, x, d, hi)
            if hi == 0.0:
                return 0.0
        dd = float(np.dot(d, d))
        f0 = f(x)
        L = self.l_est
        for _ in range(self.max_iter):
            gamma = min(hi, -derphi0 / (L * dd))
            trial = f(x + gamma * d)
            if trial <= f0 + gamma * derphi0 + 0.5 * L * gamma * gamma * dd + 1e-12:
                self.l_est = max(self._l_floor, 0.7 * L)
                return gamma
            L *= self.tau
        self.l_est = L
        return 0.0


# ---------------------------------------------------------------------------
# shadow pool
# ---------------------------------------------------------------------------


class ShadowPool:
    """FIFO-bounded pool of vertices dropped from active sets.

    The pool rides down the tree with the nodes so the lazy scan can reuse
    previously computed vertices instead of calling the oracle again.
    """

    def __init__(self, capacity: int, atol: float = ATOL):
        self.capacity = int(capacity)
        self.atol = atol
        self._items: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def add(self, v) -> None:
        v = np.asarray(v, dtype=float)
        for u in self._items:
            if np.allclose(u, v, rtol=0.0, atol=self.atol):
                return
        self._items.append(v.copy())
        if len(self._items) > self.capacity:
            del self._items[0]

    def extend(self, vertices) -> None:
        for v in vertices:
            self.add(v)

    def copy(self) -> "ShadowPool":
        pool = ShadowPool(self.capacity, self.atol)
        pool._items = [v.copy() for v in self._items]
        return pool


# ---------------------------------------------------------------------------
# corrective loop
# ---------------------------------------------------------------------------


def _evaluate(f, x):
    try:
        val = f(x)
    except DomainViolation:
        return math.nan
    return float(val)


def solve_node_fw(variant: FWVariant, f, grad, lmo, warm_start, epsilon: float, *,
                  line_search: Optional[LineSearch] = None,
                  lazy: bool = False,
                  shadow_pool: Optional[ShadowPool] = None,
                  max_iter: int = 10000,
                  deadline: Optional[float] = None,
                  domain_oracle=None,
                  callback: Optional[Callable[[FWCallbackState], Optional[bool]]] = None,
                  vertex_hook=None,
                  vertex_feasible=None,
                  step_log: Optional[list] = None) -> FWResult:
    """Run an active-set Frank-Wolfe variant until the FW gap drops below
    ``epsilon`` or a limit/callback fires.

    ``grad`` writes into a caller-visible buffer: ``grad(storage, x)``.
    ``warm_start`` is an :class:`ActiveSet` (mutated in place) or a start
    vector.  ``callback`` may return ``False`` to abort with
    ``CALLBACK_STOP``.  ``vertex_hook`` is invoked on every vertex obtained
    from a true oracle call; ``vertex_feasible`` filters shadow-pool vertices
    that violate the current node bounds.
    """
    if variant == FWVariant.DICG:
        raise ValueError("use solve_node_dicg for the decomposition-invariant variant")
    if isinstance(warm_start, ActiveSet):
        active_set = warm_start
    else:
        active_set = ActiveSet.from_point(warm_start)
    ls = line_search if line_search is not None else Secant()
    if isinstance(ls, Agnostic) and variant != FWVariant.STANDARD:
        raise ValueError("the agnostic step rule is only supported for standard FW")

    x = active_set.iterate()
    n = x.shape[0]
    gbuf = np.empty(n)
    ls_buf = np.empty(n)

    def grad_at(y):
        grad(ls_buf, y)
        return ls_buf

    phi = None
    best_bound = -math.inf
    last_true_gap = math.inf
    lmo_calls = 0
    status = FWStatus.ITER_LIMIT
    iterations = 0

    for t in range(max_iter):
        iterations = t + 1
        if deadline is not None and time.monotonic() >= deadline:
            status = FWStatus.TIME_LIMIT
            break
        grad(gbuf, x)
        primal = _evaluate(f, x)
        if math.isnan(primal) or (domain_oracle is not None and not domain_oracle(x)):
            status = FWStatus.DOMAIN_FAILURE
            break
        s_i, a_i = active_set.argmin_argmax(gbuf)
        s_vertex = active_set.vertices[s_i]
        a_vertex = active_set.vertices[a_i]
        local_gap = float(np.dot(gbuf, a_vertex - s_vertex))
        can_correct = (variant != FWVariant.STANDARD
                       and len(active_set) > 1 and a_i != s_i)

        # Candidate global vertex from the cache: the local FW vertex plus
        # whatever the shadow pool holds.  No oracle involved.
        v = None
        from_lmo = False
        if lazy and phi is not None:
            best = s_vertex
            best_dot = float(np.dot(gbuf, s_vertex))
            if shadow_pool is not None:
                for w in shadow_pool:
                    if vertex_feasible is not None and not vertex_feasible(w):
                        continue
                    dot = float(np.dot(gbuf, w))
                    if dot < best_dot:
                        best, best_dot = w, dot
            cached_gap = float(np.dot(gbuf, x)) - best_dot
            if can_correct and local_gap >= phi / 2.0 and local_gap >= cached_gap:
                # The active set alone promises enough progress; the best
                # cached vertex stands in for the global one (pairwise steps).
                v = best
            elif cached_gap >= phi / 2.0:
                v = best
        if v is None:
            v = lmo.compute_extreme_point(gbuf)
            lmo_calls += 1
            from_lmo = True
            true_gap = float(np.dot(gbuf, x - v))
            last_true_gap = true_gap
            best_bound = max(best_bound, primal - true_gap)
            if vertex_hook is not None:
                vertex_hook(v)
            if phi is None:
                phi = true_gap
            elif lazy and true_gap < phi / 2.0:
                # No vertex qualified at the old estimate; tighten it.  The
                # fresh vertex is still used for this iteration's step.
                phi = min(true_gap, phi / 2.0)
            if true_gap <= epsilon:
                status = FWStatus.GAP_REACHED
                break

        if callback is not None:
            state = FWCallbackState(t, primal, last_true_gap, lmo_calls, x)
            if callback(state) is False:
                status = FWStatus.CALLBACK_STOP
                break

        est_gap = float(np.dot(gbuf, x - v))
        corrective = can_correct and local_gap >= est_gap and local_gap > 1e-15

        stepped = False
        if corrective:
            gamma_c = _corrective_step(variant, active_set, x, gbuf, a_i, s_i, v,
                                       f, grad_at, ls, t, step_log)
            stepped = gamma_c > 0.0
        if not stepped:
            if est_gap <= 1e-15:
                if from_lmo:
                    status = FWStatus.GAP_REACHED
                    break
                phi = phi / 2.0 if phi is not None else None
                continue
            d = v - x
            gamma = ls.step(f, grad_at, x, d, 1.0, -est_gap, t)
            if gamma <= 0.0:
                if lazy and not from_lmo:
                    phi = phi / 2.0
                    continue
                # No movement possible (typically a domain-shrunk step); the
                # tracked bound stays valid, so stop here.
                break
            active_set.scale_weights(1.0 - gamma)
            active_set.add_vertex(v, gamma)

        dropped = active_set.cleanup()
        if shadow_pool is not None:
            shadow_pool.extend(dropped)
        x = active_set.iterate()
        if step_log is not None and step_log and "size_after" not in step_log[-1]:
            step_log[-1]["size_after"] = len(active_set)

    final_primal = _evaluate(f, x)
    if math.isnan(final_primal):
        status = FWStatus.DOMAIN_FAILURE
        final_primal = math.inf
    return FWResult(
        iterate=x,
        active_set=active_set,
        primal=final_primal,
        fw_gap=final_primal - best_bound,
        iterations=iterations,
        lmo_calls=lmo_calls,
        status=status,
    )


def _corrective_step(variant, active_set, x, g, a_i, s_i, v, f, grad_at, ls, t,
                     step_log):
    """Apply the variant's corrective step in place and return the step size.

    Drop steps (step size hitting the weight budget of the away vertex) only
    reshuffle weight and cannot increase ``f`` because the line search keeps
    descent up to the boundary; interior steps are genuine descent steps.
    A zero return means the step was blocked (e.g. by a domain shrink) and no
    weight was moved.
    """
    weights = active_set.weights
    a_vertex = active_set.vertices[a_i]
    s_vertex = active_set.vertices[s_i]
    w_a = weights[a_i]
    f_before = f(x) if step_log is not None else None
    size_before = len(active_set)

    if variant == FWVariant.BPCG:
        d = s_vertex - a_vertex
        gamma_max = w_a
        gamma = ls.step(f, grad_at, x, d, gamma_max, float(np.dot(g, d)), t)
        weights[a_i] -= gamma
        weights[s_i] += gamma
        drop = gamma >= gamma_max * (1.0 - 1e-12)
        if drop:
            weights[s_i] += weights[a_i]
            weights[a_i] = 0.0
    elif variant == FWVariant.PAIRWISE:
        d = v - a_vertex
        gamma_max = w_a
        gamma = ls.step(f, grad_at, x, d, gamma_max, float(np.dot(g, d)), t)
        weights[a_i] -= gamma
        drop = gamma >= gamma_max * (1.0 - 1e-12)
        if drop:
            weights[a_i] = 0.0
        active_set.add_vertex(v, gamma)
    elif variant == FWVariant.AWAY:
        d = x - a_vertex
        gamma_max = w_a / (1.0 - w_a) if w_a < 1.0 else 1e12
        gamma = ls.step(f, grad_at, x, d, gamma_max, float(np.dot(g, d)), t)
        active_set.scale_weights(1.0 + gamma)
        weights[a_i] -= gamma
        drop = gamma >= gamma_max * (1.0 - 1e-12)
        if drop:
            weights[a_i] = 0.0
    else:  # pragma: no cover - guarded by the caller
        raise ValueError(f"variant {variant} has no corrective step")

    if step_log is not None and gamma > 0.0:
        x_after = active_set.iterate()
        step_log.append({
            "kind": "drop" if drop else "descent",
            "variant": variant,
            "local_gap": float(np.dot(g, a_vertex - s_vertex)),
            "step_norm2": float(np.dot(d, d)),
            "f_before": f_before,
            "f_after": f(x_after),
            "size_before": size_before,
        })
    return gamma


def solve_node_dicg(f, grad, lmo, start, epsilon: float, *,
                    line_search: Optional[LineSearch] = None,
                    max_iter: int = 10000,
                    deadline: Optional[float] = None,
                    domain_oracle=None,
                    callback=None,
                    vertex_hook=None) -> FWResult:
    """Decomposition-invariant variant: no active set is maintained.

    Per iteration: global FW vertex, in-face away vertex over the minimal face
    containing the iterate, direction ``away - global``, and a step clipped to
    the explicit maximum step keeping the iterate feasible.  Requires the
    oracle to provide ``compute_inface_extreme_point`` and
    ``dicg_maximum_step``.
    """
    x = np.array(start, dtype=float)
    ls = line_search if line_search is not None else Secant()
    n = x.shape[0]
    gbuf = np.empty(n)
    ls_buf = np.empty(n)

    def grad_at(y):
        grad(ls_buf, y)
        return ls_buf

    best_bound = -math.inf
    last_true_gap = math.inf
    lmo_calls = 0
    status = FWStatus.ITER_LIMIT
    iterations = 0

    for t in range(max_iter):
        iterations = t + 1
        if deadline is not None and time.monotonic() >= deadline:
            status = FWStatus.TIME_LIMIT
            break
        grad(gbuf, x)
        primal = _evaluate(f, x)
        if math.isnan(primal) or (domain_oracle is not None and not domain_oracle(x)):
            status = FWStatus.DOMAIN_FAILURE
            break
        v = lmo.compute_extreme_point(gbuf)
        lmo_calls += 1
        true_gap = float(np.dot(gbuf, x - v))
        last_true_gap = true_gap
        best_bound = max(best_bound, primal - true_gap)
        if vertex_hook is not None:
            vertex_hook(v)
        if true_gap <= epsilon:
            status = FWStatus.GAP_REACHED
            break
        if callback is not None:
            state = FWCallbackState(t, primal, last_true_gap, lmo_calls, x)
            if callback(state) is False:
                status = FWStatus.CALLBACK_STOP
                break
        away = lmo.compute_inface_extreme_point(-gbuf, x)
        lmo_calls += 1
        step_dir = v - away
        gamma_max = lmo.dicg_maximum_step(away - v, x)
        derphi0 = float(np.dot(gbuf, step_dir))
        if gamma_max <= 0.0 or derphi0 > -1e-15:
            # In-face direction blocked at the boundary: plain FW step instead.
            step_dir = v - x
            gamma_max = 1.0
            derphi0 = -true_gap
            if derphi0 > -1e-15:
                break
        gamma = ls.step(f, grad_at, x, step_dir, gamma_max, derphi0, t)
        if gamma <= 0.0:
            break
        x = x + gamma * step_dir

    final_primal = _evaluate(f, x)
    if math.isnan(final_primal):
        status = FWStatus.DOMAIN_FAILURE
        final_primal = math.inf
    return FWResult(
        iterate=x,
        active_set=None,
        primal=final_primal,
        fw_gap=final_primal - best_bound,
        iterations=iterations,
        lmo_calls=lmo_calls,
        status=status,
    )


def make_domain_stop_callback(domain_oracle, extra_iters: int = 5):
    """Callback that lets the solve continue for ``extra_iters`` further
    iterations after the iterate first passes the domain oracle, then stops;
    this keeps the returned point off the domain boundary."""
    counter = 0

    def callback(state):
        nonlocal counter
        if domain_oracle(state.x):
            if counter > extra_iters:
                return False
            counter += 1
        return None

    return callback


def domain_warm_start(lmo, x0, domain_oracle, *, extra_iters: int = 5,
                      max_fw_iter: int = 10000) -> ActiveSet:
    """Build an active set whose iterate sits inside the objective's domain,
    away from its boundary.

    Minimizes ``0.5 * ||x - x0||^2`` over the feasible region with lazy BPCG,
    starting from the extreme point on the all-ones direction, and stops a few
    iterations after the iterate first passes the domain oracle.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]

    def f_help(x):
        diff = x - x0
        return 0.5 * float(np.dot(diff, diff))

    def grad_help(storage, x):
        np.subtract(x, x0, out=storage)

    v0 = lmo.compute_extreme_point(np.ones(n))
    result = solve_node_fw(
        FWVariant.BPCG, f_help, grad_help, lmo, ActiveSet.from_point(v0),
        epsilon=1e-12, lazy=True, max_iter=max_fw_iter,
        callback=make_domain_stop_callback(domain_oracle, extra_iters),
    )
    if not domain_oracle(result.iterate):
        raise WarmStartFailure(
            "projection onto the feasible region never entered the domain"
        )
    return result.active_set
