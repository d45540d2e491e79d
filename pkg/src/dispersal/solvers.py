"""Equilibrium and optimality solvers for the dispersal game.

Two independent routes to the symmetric equilibrium are kept side by side:
``coverage_optimum`` evaluates the closed-form Pareto-shaped strategy that
is simultaneously the equilibrium of the exclusive policy and the unique
coverage maximizer, while ``solve_ifd`` finds the equilibrium of an
arbitrary non-increasing congestion policy by nested bisection on the
common site value. ``coverage_grid_oracle`` is a brute-force check on the
optimum over a discrete simplex grid, and ``symmetric_price_of_anarchy``
compares equilibrium coverage against the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import (
    SUPPORT_EPS,
    CongestionPolicy,
    GameInstance,
    Strategy,
    ValidationError,
    ValueProfile,
    _check,
    coverage,
    site_values,
)

# Bisection settings. The inner loop resolves per-site probabilities to
# 1e-12; the outer loop on the common value runs until its bracket is
# narrower than 1e-13 * value scale, which leaves enough headroom for the
# 1e-8 residual contract on the returned equilibrium.
INNER_P_TOL = 1e-12
OUTER_REL_TOL = 1e-13
MAX_ITERATIONS = 200

IFD_RESIDUAL_TOL = 1e-8


class SolverError(RuntimeError):
    """A solver failed to meet its convergence contract."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class CoverageOptimum:
    """Closed-form optimal strategy with its support size and normalizer.

    The strategy plays site x with probability 1 - normalizer *
    value(x) ** (-1 / (players - 1)) on a prefix of ``support_size`` sites
    and 0 elsewhere. ``common_value`` is the per-site expected payoff under
    the exclusive policy, equal to normalizer ** (players - 1).
    """

    strategy: Strategy
    support_size: int
    normalizer: float
    common_value: float


@dataclass(frozen=True)
class EquilibriumReport:
    """Diagnostics for a strategy checked against the equilibrium conditions.

    ``residual`` is the largest violation found: the spread of expected
    values across supported sites, or the amount by which an unsupported
    site beats the common value. ``boundary_flag`` marks unsupported sites
    whose value ties the common value within tolerance, where the strict
    outside-support inequality degenerates.
    """

    strategy: Strategy
    support_size: int
    common_value: float
    residual: float
    boundary_flag: bool
    tolerance: float
    site_values: tuple[float, ...]
    support_is_prefix: bool

    @property
    def passed(self) -> bool:
        return self.support_is_prefix and self.residual <= self.tolerance


@dataclass(frozen=True)
class WelfareOptimum:
    """Best symmetric strategy found for the expected individual payoff.

    ``exhaustive`` is True when the search covered a full simplex grid
    (small site counts); otherwise the result is the best of multiple
    seeded local searches and carries no global guarantee.
    """

    strategy: Strategy
    payoff: float
    exhaustive: bool


def coverage_optimum(profile: ValueProfile, players: int) -> CoverageOptimum:
    """Closed-form coverage-maximizing strategy for ``players`` dispersers.

    The support is the largest prefix of sites over which the Pareto shape
    stays a probability vector; the normalizer then makes it sum to one.
    """
    _check(players >= 2, f"players: must be >= 2, got {players}")
    f = profile.as_array()
    m = profile.size
    exponent = 1.0 / (players - 1)
    root = f**exponent
    inv_root = 1.0 / root
    cum_inv = np.cumsum(inv_root)
    # scan[y-1] = sum_{x <= y} (1 - (f(y)/f(x)) ** exponent), non-decreasing in y
    scan = np.arange(1, m + 1) - root * cum_inv
    support = int(np.nonzero(scan <= 1.0 + 1e-12)[0][-1]) + 1
    if support == 1:
        alpha = 0.0
    else:
        alpha = (support - 1) / float(cum_inv[support - 1])
    probs = np.zeros(m)
    probs[:support] = 1.0 - alpha * inv_root[:support]
    probs[probs < SUPPORT_EPS] = 0.0
    probs /= probs.sum()
    strategy = Strategy.from_array(probs)
    return CoverageOptimum(
        strategy=strategy,
        support_size=len(strategy.support()),
        normalizer=float(alpha),
        common_value=float(alpha ** (players - 1)),
    )


def verify_ifd(instance: GameInstance, strategy: Strategy, tolerance: float = IFD_RESIDUAL_TOL) -> EquilibriumReport:
    """Check the equilibrium conditions for ``strategy`` and report violations.

    Supported sites must share a common expected value and every
    unsupported site must fall strictly below it. Violations are reported
    through ``residual``, never raised.
    """
    values = site_values(instance, strategy)
    probs = strategy.as_array()
    supported = probs > SUPPORT_EPS
    n_support = int(np.count_nonzero(supported))
    support_is_prefix = bool(np.all(supported[:n_support]) and not np.any(supported[n_support:]))
    inside = values[supported]
    common = float(np.mean(inside))
    residual_equal = float(np.max(inside) - np.min(inside))
    outside = values[~supported]
    if outside.size:
        residual_outside = max(0.0, float(np.max(outside)) - common)
        boundary = bool(np.any(np.abs(outside - common) <= tolerance))
    else:
        residual_outside = 0.0
        boundary = False
    return EquilibriumReport(
        strategy=strategy,
        support_size=n_support,
        common_value=common,
        residual=max(residual_equal, residual_outside),
        boundary_flag=boundary,
        tolerance=tolerance,
        site_values=tuple(float(v) for v in values),
        support_is_prefix=support_is_prefix,
    )


def _response_evaluator(policy: CongestionPolicy, players: int):
    """Precompiled E[C(1 + B(p))] evaluator for repeated bisection calls."""
    counts = np.arange(players)
    folded = np.array(
        [math.comb(players - 1, int(j)) * policy.at(int(j) + 1) for j in counts]
    )
    tail = players - 1 - counts

    def response(p: np.ndarray) -> np.ndarray:
        pm = p[:, None]
        return (pm**counts * (1.0 - pm) ** tail) @ folded

    return response


def _site_probs_for_value(f: np.ndarray, response, floor_weight: float, target: float) -> np.ndarray:
    """Per-site probabilities that equalize the site value at ``target``.

    Site x gets the unique p with value(x) * E[C(1 + B(p))] = target,
    clamped to 0 where even a sure solo visit is worth at most ``target``
    and to 1 where a sure full collision still beats it. Requires a
    policy that is non-constant on 1..players.
    """
    m = f.size
    probs = np.zeros(m)
    probs[f * floor_weight >= target] = 1.0
    active = (f > target) & (f * floor_weight < target)
    if not np.any(active):
        return probs
    fa = f[active]
    lo = np.zeros(fa.size)
    hi = np.ones(fa.size)
    # [0, 1] halves uniformly, so the iteration count that reaches the
    # tolerance is fixed up front.
    steps = math.ceil(math.log2(1.0 / INNER_P_TOL))
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        above = fa * response(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    probs[active] = 0.5 * (lo + hi)
    return probs


def solve_ifd(instance: GameInstance) -> EquilibriumReport:
    """Symmetric equilibrium of the instance, found by nested bisection.

    The outer loop bisects the common site value nu over
    [value(1) * C(players), value(1)]; the inner loop solves each site's
    probability against nu. The returned strategy is re-checked by
    ``verify_ifd`` and must come back with residual <= 1e-8, otherwise a
    ``SolverError`` carrying diagnostics is raised.

    A congestion policy that is constant on 1..players makes every site
    value independent of play; that degenerate case returns the point mass
    on the first (highest-value) site.
    """
    profile, players, policy = instance.profile, instance.players, instance.policy
    if instance.sites == 1:
        return verify_ifd(instance, Strategy((1.0,)))
    if policy.is_constant_on(players):
        return verify_ifd(instance, Strategy.point_mass(1, instance.sites))

    f = profile.as_array()
    response = _response_evaluator(policy, players)
    floor_weight = policy.at(players)
    lo = float(f[0] * floor_weight)
    hi = float(f[0])
    scale = max(1.0, abs(lo), abs(hi))

    def excess(target: float) -> float:
        return float(np.sum(_site_probs_for_value(f, response, floor_weight, target))) - 1.0

    # The total probability is non-increasing in the target value, >= 0 at
    # the lower end and -1 at the upper end; bisection brackets the root.
    if excess(lo) <= 0.0:
        nu = lo
    else:
        iterations = 0
        while hi - lo > OUTER_REL_TOL * scale and iterations < MAX_ITERATIONS:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if excess(mid) >= 0.0:
                lo = mid
            else:
                hi = mid
            iterations += 1
        if iterations >= MAX_ITERATIONS:
            raise SolverError(
                "equilibrium bisection did not converge",
                bracket=(lo, hi),
                iterations=iterations,
            )
        nu = 0.5 * (lo + hi)

    probs = _site_probs_for_value(f, response, floor_weight, nu)
    probs[probs < SUPPORT_EPS] = 0.0
    total = probs.sum()
    if not 0.5 < total < 2.0:
        raise SolverError("equilibrium probabilities failed to normalize", total=float(total), value=nu)
    probs /= total
    report = verify_ifd(instance, Strategy.from_array(probs))
    if not report.passed:
        raise SolverError(
            "equilibrium residual exceeds tolerance",
            residual=report.residual,
            common_value=report.common_value,
            value=nu,
        )
    return report


def symmetric_payoff(instance: GameInstance, strategy: Strategy) -> float:
    """Expected individual payoff when all players use ``strategy``."""
    return float(np.dot(strategy.as_array(), site_values(instance, strategy)))


def _payoff_batch(f: np.ndarray, policy: CongestionPolicy, players: int, batch: np.ndarray) -> np.ndarray:
    """Symmetric expected payoff for every row of the (n, M) ``batch``."""
    k = players
    w = policy.weights(k)
    acc = np.zeros(batch.shape)
    for j in range(k):
        acc += w[j] * math.comb(k - 1, j) * batch**j * (1.0 - batch) ** (k - 1 - j)
    return (batch * f * acc).sum(axis=1)


def _simplex_grid(m: int, step: float) -> np.ndarray:
    n = round(1.0 / step)
    if m == 1:
        return np.ones((1, 1))
    if m == 2:
        first = np.arange(n + 1) / n
        return np.column_stack([first, 1.0 - first])
    if m == 3:
        i = np.repeat(np.arange(n + 1), np.arange(n + 1, 0, -1))
        j = np.concatenate([np.arange(n + 1 - v) for v in range(n + 1)])
        return np.column_stack([i, j, n - i - j]) / n
    raise ValidationError(f"simplex grid enumeration supports up to 3 sites, got {m}")


def _exchange_refine(objective, probs: np.ndarray, step: float, min_step: float) -> np.ndarray:
    """Hill-climb on the simplex by moving mass between site pairs.

    The step halves each time no pairwise transfer improves the objective,
    stopping below ``min_step``.
    """
    m = probs.size
    probs = probs.copy()
    best = float(objective(probs[None, :])[0])
    while step >= min_step:
        moved = True
        while moved:
            moved = False
            candidates = []
            for src in range(m):
                if probs[src] < step:
                    continue
                for dst in range(m):
                    if dst == src:
                        continue
                    cand = probs.copy()
                    cand[src] -= step
                    cand[dst] += step
                    candidates.append(cand)
            if not candidates:
                break
            cand_arr = np.clip(np.array(candidates), 0.0, 1.0)
            vals = objective(cand_arr)
            top = int(np.argmax(vals))
            if vals[top] > best:
                best = float(vals[top])
                probs = cand_arr[top]
                moved = True
        step /= 2.0
    return probs


def welfare_optimum(
    instance: GameInstance,
    grid_step: float = 1e-3,
    refine_step: float = 1e-7,
    restarts: int = 32,
    seed: int = 0,
) -> WelfareOptimum:
    """Symmetric strategy maximizing the expected individual payoff.

    Up to 3 sites the search is an exhaustive simplex grid at ``grid_step``
    followed by local refinement down to ``refine_step``. For more sites it
    falls back to ``restarts`` seeded local searches from random interior
    points; that result is best-effort and flagged ``exhaustive=False``.
    """
    f = instance.profile.as_array()
    m = instance.sites

    def objective(batch: np.ndarray) -> np.ndarray:
        return _payoff_batch(f, instance.policy, instance.players, batch)

    if m == 1:
        strategy = Strategy((1.0,))
        return WelfareOptimum(strategy, symmetric_payoff(instance, strategy), True)

    if m <= 3:
        grid = _simplex_grid(m, grid_step)
        start = grid[int(np.argmax(objective(grid)))]
        best = _exchange_refine(objective, start, grid_step, refine_step)
        return WelfareOptimum(Strategy.from_array(best), float(objective(best[None, :])[0]), True)

    rng = np.random.default_rng(seed)
    starts = [np.full(m, 1.0 / m)]
    starts.extend(rng.dirichlet(np.ones(m)) for _ in range(max(0, restarts - 1)))
    best_probs, best_val = None, -math.inf
    for start in starts:
        candidate = _exchange_refine(objective, np.asarray(start), 0.05, refine_step)
        val = float(objective(candidate[None, :])[0])
        if val > best_val:
            best_probs, best_val = candidate, val
    assert best_probs is not None
    return WelfareOptimum(Strategy.from_array(best_probs), best_val, False)


def coverage_grid_oracle(profile: ValueProfile, players: int, grid_step: float) -> tuple[Strategy, float]:
    """Best coverage over the simplex grid with resolution ``grid_step``.

    Exhausts every grid point (all ways of splitting 1/step probability
    units across sites) through a per-site allocation table, so the result
    is the exact grid optimum. Intended purely as an independent check of
    the closed-form optimum; limited to 4 sites.
    """
    m = profile.size
    _check(m <= 4, f"profile: grid oracle supports at most 4 sites, got {m}")
    _check(players >= 1, f"players: must be >= 1, got {players}")
    n = round(1.0 / grid_step)
    _check(n >= 1 and abs(n * grid_step - 1.0) < 1e-9, f"grid_step: must evenly divide 1, got {grid_step}")
    f = profile.as_array()
    units = np.arange(n + 1) / n
    gain = f[:, None] * (1.0 - (1.0 - units[None, :]) ** players)  # (m, n+1)

    best = gain[0].copy()
    picks = np.zeros((m, n + 1), dtype=np.int32)
    for s in range(1, m):
        new_best = np.empty(n + 1)
        for t in range(n + 1):
            cand = gain[s, : t + 1] + best[t::-1]
            c = int(np.argmax(cand))
            picks[s, t] = c
            new_best[t] = cand[c]
        best = new_best

    counts = np.zeros(m, dtype=np.int64)
    remaining = n
    for s in range(m - 1, 0, -1):
        counts[s] = picks[s, remaining]
        remaining -= counts[s]
    counts[0] = remaining
    strategy = Strategy.from_array(counts / n)
    return strategy, coverage(profile, players, strategy)


def symmetric_price_of_anarchy(instance: GameInstance) -> float:
    """Coverage of the optimum over coverage of the symmetric equilibrium.

    The symmetric equilibrium is unique for non-increasing congestion
    policies, so the worst equilibrium is the only one; the ratio is 1
    exactly when the policy is exclusive.
    """
    optimum = coverage_optimum(instance.profile, instance.players)
    equilibrium = solve_ifd(instance)
    best = coverage(instance.profile, instance.players, optimum.strategy)
    attained = coverage(instance.profile, instance.players, equilibrium.strategy)
    return best / attained
