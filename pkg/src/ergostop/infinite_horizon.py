"""Undiscounted infinite-horizon stopping with a negative mean running reward.

The value solves the fixed point  w = max(g, dt * f + P w)  and is reached by
monotone value iteration from w = g (the horizon sweep). Convergence alone
carries no certificate without discounting, so every solve closes the loop:
extract the candidate stop region, evaluate its hitting rule exactly by a
linear solve, and verify the evaluation is a Bellman fixed point. A certified
value is exact up to the linear algebra, not asymptotics.

Hitting rules that strand probability mass have value minus infinity (the
mean running reward is negative, so unstopped mass pays linearly forever);
minus infinity is a first-class outcome here, not an error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DriftNotNegative,
    BoundViolated,
    NoCoords,
    NotIrreducible,
    NoValidN,
    TooManyStates,
)
from .markov import Distribution, MarkovModel, is_irreducible, stationary_distribution
from .rewards import RewardSpec

TIE_TOL = 1e-9
CERT_TOL = 1e-9
DRIFT_TOL = 1e-12
DEFAULT_DELTA = 0.5
MAX_VALUE_ITER = 100_000
MAX_POLICY_ROUNDS = 100


@dataclass
class InfiniteHorizonSolution:
    """Certified value, stop region, and stopping-time bound data.

    ``certified`` is set only when the exact policy evaluation of ``region``
    reproduces the value as a Bellman fixed point; otherwise the fields hold
    the best iterate and the flag is False, never silently.

    ``gamma``, ``d``, ``Z`` and ``expected_tau`` realize the explicit bound
    E^x[tau*] <= Z(x) = (gamma(x) + E[max g+] - g(x) + 1) / (-d(x)).
    """

    w: np.ndarray
    region: np.ndarray                # bool stop set {g >= w - 1e-9}
    excess: np.ndarray                # w - g, defines the relaxed rules
    fixed_point_residual: float
    certified: bool
    iterations: int
    gamma: np.ndarray
    d: np.ndarray
    Z: np.ndarray
    expected_tau: np.ndarray


@dataclass
class OracleResult:
    """Exhaustive enumeration of hitting rules on a small chain."""

    w: np.ndarray
    optimal_regions: list[np.ndarray]
    minimal_time_region: np.ndarray   # union of optimal regions; its hitting
                                      # time is the smallest optimal stopping time


@dataclass
class BoundReport:
    """Stopping-time bound check for one choice of d."""

    d: np.ndarray
    gamma: np.ndarray
    zeta_plus: float
    Z: np.ndarray
    expected_tau: np.ndarray
    ok: bool


@dataclass
class ConditionSReport:
    """Drift-sufficiency check: the auxiliary value with the running reward
    replaced by its scaled invariant mean, terminal reward -q, must match
    gamma - q identically."""

    delta: float
    bar_gamma: np.ndarray
    gamma: np.ndarray
    identity_gap: float
    holds: bool


@dataclass
class CompactifiedReward:
    """Running reward flattened outside a metric ball, keeping the mean negative.

    ``f_bar`` dominates f, has invariant mean at most mu(f)/2 < 0, is
    nonnegative outside the ball of radius N+1, and its sublevel set at its
    own mean sits inside that ball.
    """

    N: int
    center: int
    z: np.ndarray
    f_hat: np.ndarray
    f_bar: np.ndarray
    mu_f_bar: float


# -- exact policy evaluation ---------------------------------------------------

def _can_reach(kernel: np.ndarray, target: np.ndarray) -> np.ndarray:
    adj = kernel > 1e-15
    reach = target.copy()
    while True:
        grown = reach | (adj @ reach)
        if (grown == reach).all():
            return reach
        reach = grown


def _policy_value(
    kernel: np.ndarray, dt: float, run: np.ndarray, term: np.ndarray, region: np.ndarray
) -> np.ndarray:
    """Exact value of the hitting rule of ``region``.

    States from which the region is not hit almost surely get -inf: with
    positive escape probability the running cost accrues forever and the
    capped functionals diverge to minus infinity.
    """
    n = len(term)
    if not region.any():
        return np.full(n, -np.inf)
    v = np.full(n, -np.inf)
    v[region] = term[region]
    cont = ~region
    if not cont.any():
        return v
    reach = _can_reach(kernel, region)
    stranded = ~reach
    doomed = _can_reach(kernel, stranded) if stranded.any() else np.zeros(n, bool)
    good = cont & ~doomed
    if good.any():
        A = np.eye(good.sum()) - kernel[np.ix_(good, good)]
        rhs = dt * run[good] + kernel[np.ix_(good, region)] @ term[region]
        sol = np.linalg.solve(A, rhs)
        sol += np.linalg.solve(A, rhs - A @ sol)
        v[good] = sol
    return v


def region_value(model: MarkovModel, rewards: RewardSpec, region) -> np.ndarray:
    """Value of stopping at the first entry to ``region``; -inf where the
    region is missed with positive probability, everywhere for an empty one."""
    mask = _region_mask(model, region)
    return _policy_value(model.kernel, model.dt, rewards.f, rewards.g, mask)


def expected_hitting_time(model: MarkovModel, region) -> np.ndarray:
    """E^x[first entry time of region] in time units; inf off the a.s.-hit set."""
    mask = _region_mask(model, region)
    n = model.n_states
    if not mask.any():
        return np.full(n, np.inf)
    t = np.zeros(n)
    cont = ~mask
    if cont.any():
        reach = _can_reach(model.kernel, mask)
        stranded = ~reach
        doomed = _can_reach(model.kernel, stranded) if stranded.any() else np.zeros(n, bool)
        good = cont & ~doomed
        t[cont & doomed] = np.inf
        if good.any():
            sub = model.kernel[np.ix_(good, good)]
            t[good] = np.linalg.solve(
                np.eye(good.sum()) - sub, np.full(good.sum(), model.dt)
            )
    return t


# -- certified solver ----------------------------------------------------------

def _certified_solve(
    kernel: np.ndarray,
    dt: float,
    run: np.ndarray,
    term: np.ndarray,
    tol: float,
):
    """Monotone value iteration followed by exact certification.

    Returns (w, region, residual, certified, iterations). If the region
    extracted from the iterate fails the fixed-point check, greedy policy
    improvement rounds retry before conceding an uncertified result.
    """
    v = term.copy()
    run_dt = dt * run
    iterations = 0
    for iterations in range(1, MAX_VALUE_ITER + 1):
        nv = np.maximum(term, run_dt + kernel @ v)
        delta = float(np.max(np.abs(nv - v)))
        v = nv
        if delta < tol:
            break

    region = term >= v - TIE_TOL
    best = (v, region, np.inf, False)
    for _ in range(MAX_POLICY_ROUNDS):
        pv = _policy_value(kernel, dt, run, term, region)
        if np.isfinite(pv).all():
            bell = np.maximum(term, run_dt + kernel @ pv)
            residual = float(np.max(np.abs(pv - bell)))
            if residual <= CERT_TOL:
                return pv, region, residual, True, iterations
            if residual < best[2]:
                best = (pv, region, residual, False)
            improved = term + TIE_TOL >= run_dt + kernel @ pv
        else:
            # stranded mass: stopping dominates -inf continuation everywhere
            improved = region | ~np.isfinite(pv)
        if (improved == region).all():
            break
        region = improved
    w, region, residual, certified = best
    return w, region, residual, certified, iterations


def solve_infinite_horizon(
    model: MarkovModel,
    rewards: RewardSpec,
    tol: float = 1e-10,
    delta: float = DEFAULT_DELTA,
    d=None,
) -> InfiniteHorizonSolution:
    """Solve the undiscounted stopping problem and certify the result.

    Refuses models with mu(f) >= 0 (the mean drift must penalize delay,
    otherwise the value may be infinite) and reducible chains. ``d`` may
    override the default constant delta * mu(f) used for the stopping-time
    bound; it must be negative per state.
    """
    if not is_irreducible(model.kernel):
        raise NotIrreducible("infinite-horizon solver needs an irreducible chain")
    if rewards.mu_f >= 0:
        raise DriftNotNegative(
            f"mu(f) = {rewards.mu_f} >= 0; undiscounted value may be infinite"
        )
    w, region, residual, certified, iterations = _certified_solve(
        model.kernel, model.dt, rewards.f, rewards.g, tol
    )
    d_vec = _resolve_d(model, rewards, delta, d)
    gamma = gamma_value(model, rewards.f, d_vec)
    zeta_plus = float(np.maximum(rewards.g, 0.0).max())
    expected_tau = expected_hitting_time(model, region)
    Z = (gamma + zeta_plus - rewards.g + 1.0) / (-d_vec)
    return InfiniteHorizonSolution(
        w=w,
        region=region,
        excess=w - rewards.g,
        fixed_point_residual=residual,
        certified=certified,
        iterations=iterations,
        gamma=gamma,
        d=d_vec,
        Z=Z,
        expected_tau=expected_tau,
    )


def _resolve_d(model, rewards, delta, d) -> np.ndarray:
    if d is not None:
        d_vec = np.asarray(d, dtype=float) * np.ones(model.n_states)
        if np.any(d_vec >= 0):
            raise DriftNotNegative("override d must be negative per state")
        return d_vec
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return np.full(model.n_states, delta * rewards.mu_f)


def stopping_rule_eps(solution: InfiniteHorizonSolution, eps: float) -> np.ndarray:
    """Relaxed stop region {w <= g + eps}; its hitting rule loses at most eps.

    The region compares w - g against eps directly (not value loss), which
    is what makes the family shrink to the optimal region as eps -> 0; the
    shared tie tolerance keeps eps = 0 equal to the reported stop set.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if not solution.certified:
        raise ValueError("eps-rule requires a certified solution")
    return solution.excess <= eps + TIE_TOL


def gamma_value(model: MarkovModel, f, d) -> np.ndarray:
    """Auxiliary drift value: for each state x, the stopping value with
    running reward f - d(x) (the constant shift of the starting state) and
    zero terminal reward. Nonnegative, since stopping immediately yields 0.

    Finite exactly when mu(f - d(x)) <= 0; the boundary case arises at the
    natural choice d = mu(f) and stays finite on a finite chain, so only a
    strictly positive centred drift is refused.
    """
    fv = np.asarray(f, dtype=float)
    if fv.shape != (model.n_states,):
        raise DimensionMismatch("f has wrong length")
    d_vec = np.asarray(d, dtype=float) * np.ones(model.n_states)
    if np.any(d_vec >= 0):
        raise DriftNotNegative("d must be negative per state")
    mu = stationary_distribution(model)
    mu_f = float(mu.weights @ fv)
    gamma = np.empty(model.n_states)
    zero_term = np.zeros(model.n_states)
    for c in np.unique(d_vec):
        if mu_f - c > DRIFT_TOL * max(1.0, abs(mu_f)):
            raise DriftNotNegative(
                f"mu(f - d) = {mu_f - c} > 0: auxiliary value is infinite"
            )
        vals, _, residual, certified, _ = _certified_solve(
            model.kernel, model.dt, fv - c, zero_term, 1e-12
        )
        if not certified:
            raise ArithmeticError(
                f"auxiliary solve failed certification (residual {residual:.2e})"
            )
        sel = d_vec == c
        gamma[sel] = vals[sel]
    return gamma


def stopping_time_bound(
    model: MarkovModel, rewards: RewardSpec, solution: InfiniteHorizonSolution, d
) -> BoundReport:
    """Explicit bound on the optimal rule's expected stopping time.

    E[max g+] reduces to max g+ by recurrence on an irreducible chain. The
    inequality expected_tau <= Z is guaranteed for certified solutions, so a
    violation is a hard failure, not a diagnostic.
    """
    if not is_irreducible(model.kernel):
        raise NotIrreducible("bound needs an irreducible chain")
    if not solution.certified:
        raise ValueError("stopping-time bound requires a certified solution")
    d_vec = np.asarray(d, dtype=float) * np.ones(model.n_states)
    if np.any(d_vec >= 0):
        raise DriftNotNegative("d must be negative per state")
    gamma = gamma_value(model, rewards.f, d_vec)
    zeta_plus = float(np.maximum(rewards.g, 0.0).max())
    Z = (gamma + zeta_plus - rewards.g + 1.0) / (-d_vec)
    expected_tau = expected_hitting_time(model, solution.region)
    ok = bool(np.all(expected_tau <= Z + 1e-9))
    if not ok:
        worst = int(np.argmax(expected_tau - Z))
        raise BoundViolated(
            f"expected_tau[{worst}] = {expected_tau[worst]} exceeds "
            f"Z[{worst}] = {Z[worst]}: solver bug"
        )
    return BoundReport(
        d=d_vec, gamma=gamma, zeta_plus=zeta_plus, Z=Z,
        expected_tau=expected_tau, ok=ok,
    )


def brute_force_region_oracle(model: MarkovModel, rewards: RewardSpec) -> OracleResult:
    """Independent certification by enumerating every nonempty stop region.

    Returns the pointwise best value, every region achieving it at all
    states simultaneously, and their union, whose hitting time is the
    smallest optimal stopping time.
    """
    n = model.n_states
    if n > 20:
        raise TooManyStates(f"{n} states: 2^n enumeration refused beyond 20")
    best = np.full(n, -np.inf)
    values = []
    for code in range(1, 1 << n):
        mask = np.array([(code >> i) & 1 for i in range(n)], dtype=bool)
        v = _policy_value(model.kernel, model.dt, rewards.f, rewards.g, mask)
        values.append((mask, v))
        best = np.maximum(best, v)
    optimal = [mask for mask, v in values if np.all(v >= best - 1e-9)]
    union = np.zeros(n, dtype=bool)
    for mask in optimal:
        union |= mask
    return OracleResult(w=best, optimal_regions=optimal, minimal_time_region=union)


def check_condition_S(
    model: MarkovModel,
    rewards: RewardSpec,
    zero_potential,
    delta: float,
) -> ConditionSReport:
    """Verify the drift-sufficiency identity bar_gamma = gamma - q.

    bar_gamma is the stopping value with constant running reward
    (1 - delta) * mu(f) and terminal reward -q; gamma uses d = delta * mu(f).
    The identity is exact on the grid because the zero-potential shifts
    every hitting rule's value by -q.
    """
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if rewards.mu_f >= 0:
        raise DriftNotNegative(f"mu(f) = {rewards.mu_f} >= 0")
    q = np.asarray(zero_potential.q if hasattr(zero_potential, "q") else zero_potential)
    run = np.full(model.n_states, (1.0 - delta) * rewards.mu_f)
    bar, _, residual, certified, _ = _certified_solve(
        model.kernel, model.dt, run, -q, 1e-12
    )
    if not certified:
        raise ArithmeticError(
            f"bar-gamma solve failed certification (residual {residual:.2e})"
        )
    gamma = gamma_value(model, rewards.f, np.full(model.n_states, delta * rewards.mu_f))
    gap = float(np.max(np.abs(bar - (gamma - q))))
    return ConditionSReport(
        delta=delta, bar_gamma=bar, gamma=gamma, identity_gap=gap,
        holds=bool(np.isfinite(bar).all() and rewards.mu_f < 0 and gap <= 1e-8),
    )


def compactify_running_reward(
    model: MarkovModel, f, mu: Distribution, center: int = 0
) -> CompactifiedReward:
    """Flatten f outside a ball large enough that the tail cannot spoil the
    negative mean: the smallest radius N with tail integral below -mu(f)/4.

    Needs coords; balls are Euclidean around ``center`` with integer radii.
    """
    if model.coords is None:
        raise NoCoords("compactification needs per-state coordinates")
    fv = np.asarray(f, dtype=float)
    mu_f = float(mu.weights @ fv)
    if mu_f >= 0:
        raise DriftNotNegative(f"mu(f) = {mu_f} >= 0")
    dist_center = np.linalg.norm(model.coords - model.coords[center], axis=1)
    max_radius = int(np.ceil(dist_center.max())) + 1
    N = None
    for radius in range(1, max_radius + 1):
        ball = dist_center <= radius
        tail = float((np.abs(fv) * mu.weights)[~ball].sum())
        if tail < -mu_f / 4.0:
            N = radius
            break
    if N is None:
        raise NoValidN(
            "no ball satisfies the tail condition; the supplied invariant law "
            "does not match the model"
        )
    ball = dist_center <= N
    pairwise = np.linalg.norm(
        model.coords[:, None, :] - model.coords[None, :, :], axis=2
    )
    dist_to_ball = pairwise[:, ball].min(axis=1)
    z = 1.0 - np.minimum(dist_to_ball, 1.0)
    f_hat = z * fv
    f_bar = np.maximum(fv, f_hat)
    mu_f_bar = float(mu.weights @ f_bar)
    outside = dist_center > N + 1
    if np.any(f_bar < fv):
        raise ArithmeticError("compactified reward fails to dominate f")
    if mu_f_bar > mu_f / 2.0 + 1e-12:
        raise ArithmeticError(
            f"mu(f_bar) = {mu_f_bar} exceeds mu(f)/2 = {mu_f / 2.0}"
        )
    if np.any(f_bar[outside] < 0):
        raise ArithmeticError("compactified reward negative outside the fat ball")
    if np.any((f_bar <= mu_f_bar) & outside):
        raise ArithmeticError("sublevel set escapes the fat ball")
    return CompactifiedReward(
        N=N, center=center, z=z, f_hat=f_hat, f_bar=f_bar, mu_f_bar=mu_f_bar
    )


def _region_mask(model: MarkovModel, region) -> np.ndarray:
    r = np.asarray(region)
    if r.dtype == bool:
        if r.shape != (model.n_states,):
            raise DimensionMismatch("region mask has wrong length")
        return r.copy()
    mask = np.zeros(model.n_states, dtype=bool)
    mask[r.astype(int)] = True
    return mask
