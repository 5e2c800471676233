"""Independent reference solvers used to validate the allocators.

Nothing here reuses allocator code: the level solver bisects, the welfare
maximizers enumerate or climb, and the fairness checker searches for
counterexamples.  They are slow by design and exist only for tests and the
``oracle-check`` CLI command.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .metrics import welfare
from .model import STREAM_ORACLE, Allocation, AllocationProblem, substream


def waterfill_bisection(problem: AllocationProblem, tol: float = 1e-10) -> Allocation:
    """Re-derive the welfare-optimal allocation from its level equation.

    Under contention there is a surface level L with
    sum_i psi_i * clamp(L - ice_i, 0, Q_i/psi_i) == q_total; bisect for it
    and return the induced allocation.  Independent of the allocator's
    event-sweep machinery.
    """
    demand = problem.demand
    if demand.sum() <= problem.q_total:
        raise ValueError("not in contention: total demand does not exceed q_total")
    psi = problem.psi
    cost = problem.cost
    active = (psi > 0) & (demand > 0)
    q = np.zeros(problem.n)
    if not active.any():
        return Allocation(quotas=q)
    ice = cost[active] * demand[active] / (psi[active] * problem.qos)
    headroom = demand[active] / psi[active]
    area = psi[active]

    def volume(level: float) -> float:
        return float((area * np.clip(level - ice, 0.0, headroom)).sum())

    lo = float(ice.min())
    hi = float((ice + headroom).max())
    target = min(problem.q_total, volume(hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if volume(mid) < target:
            lo = mid
        else:
            hi = mid
    level = 0.5 * (lo + hi)
    if abs(volume(level) - target) > tol:
        raise ArithmeticError("bisection failed to localize the fill level")
    q[active] = area * np.clip(level - ice, 0.0, headroom)
    return Allocation(quotas=q)


def grid_welfare_max(
    problem: AllocationProblem, step: float
) -> tuple[Allocation, float]:
    """Exhaustive search over a quota grid; the cost guard limits it to
    three users."""
    if problem.n > 3:
        raise ValueError("instance too large for exhaustive search (n > 3)")
    if step <= 0:
        raise ValueError("step must be positive")
    demand = problem.demand
    axes = []
    for i in range(problem.n):
        hi = min(demand[i], problem.q_total)
        pts = np.arange(0.0, hi, step)
        axes.append(np.concatenate([pts, [hi]]))
    best_q = np.zeros(problem.n)
    best_w = welfare(Allocation(quotas=best_q), problem)
    for combo in itertools.product(*axes):
        q = np.array(combo)
        if q.sum() > problem.q_total:
            continue
        w = welfare(Allocation(quotas=q), problem)
        if w > best_w:
            best_w = w
            best_q = q
    return Allocation(quotas=best_q), float(best_w)


def _project_feasible(q: np.ndarray, demand: np.ndarray, q_total: float) -> np.ndarray:
    """Euclidean projection onto {0 <= q <= demand, sum(q) <= q_total}.

    If clipping to the box already satisfies the budget, that is the
    projection; otherwise the projection is clip(q - lam, 0, demand) for the
    shift lam >= 0 that makes the sum hit the budget, found by bisection
    (the clipped sum is monotone in lam).
    """
    clipped = np.clip(q, 0.0, demand)
    if clipped.sum() <= q_total:
        return clipped
    lo, hi = 0.0, float(q.max())
    for _ in range(100):
        lam = 0.5 * (lo + hi)
        if np.clip(q - lam, 0.0, demand).sum() > q_total:
            lo = lam
        else:
            hi = lam
    return np.clip(q - hi, 0.0, demand)


def projected_ascent_welfare(
    problem: AllocationProblem,
    iterations: int = 5000,
    tol: float = 1e-12,
) -> Allocation:
    """Projected gradient ascent on the welfare objective.

    Spectral (Barzilai-Borwein) step lengths with a non-monotone backtracking
    line search; stops once the projected step no longer promises progress
    relative to tol.  Slow next to the allocator, but structurally unlike it.

    Raises ArithmeticError when the iteration cap is hit before the
    first-order residual dies down.
    """
    demand = problem.demand
    psi = problem.psi
    cost = problem.cost
    if (cost <= 0).any():
        raise ValueError("costs must be positive")
    if demand.sum() <= problem.q_total:
        return Allocation(quotas=demand.copy())
    qos = problem.qos

    pos = demand > 0

    def objective(x: np.ndarray) -> float:
        u = np.zeros(problem.n)
        u[pos] = np.log1p(qos * x[pos] / (cost[pos] * demand[pos]))
        return float((psi * u).sum())

    def gradient(x: np.ndarray) -> np.ndarray:
        g = np.zeros(problem.n)
        g[pos] = psi[pos] * qos / (cost[pos] * demand[pos] + qos * x[pos])
        return g

    q = _project_feasible(
        np.where(pos, demand * problem.q_total / demand.sum(), 0.0),
        demand, problem.q_total,
    )
    value = objective(q)
    grad = gradient(q)
    norm = float(np.linalg.norm(grad))
    step = 1.0 / norm if norm > 0 else 1.0
    recent = [value]
    converged = False
    for _ in range(iterations):
        trial = _project_feasible(q + step * grad, demand, problem.q_total)
        direction = trial - q
        promise = float(grad @ direction)
        if promise <= tol * max(1.0, abs(value)):
            converged = True
            break
        t = 1.0
        reference = max(recent[-10:])
        cand = trial
        cand_value = objective(cand)
        for _ in range(60):
            if cand_value >= reference + 1e-4 * t * promise:
                break
            t *= 0.5
            cand = q + t * direction
            cand_value = objective(cand)
        delta_q = cand - q
        delta_g = gradient(cand) - grad
        curvature = float(-(delta_q @ delta_g))
        step = float(delta_q @ delta_q) / curvature if curvature > 1e-18 else 1e6
        step = min(max(step, 1e-12), 1e12)
        q, value = cand, cand_value
        grad = gradient(q)
        recent.append(value)
    if not converged:
        raise ArithmeticError(
            f"projected ascent did not converge within {iterations} iterations"
        )
    return Allocation(quotas=q)


@dataclass(frozen=True)
class FairnessViolation:
    """One alternative allocation contradicting weighted max-min fairness."""

    trial: int
    gainer: int
    description: str


def maxmin_transfer_search(
    allocation: Allocation,
    problem: AllocationProblem,
    epsilon: float = 1e-3,
    trials: int = 10_000,
    seed: int = 0,
) -> list[FairnessViolation]:
    """Hunt for feasible alternatives that raise one user's weighted ratio
    for free.

    Weighted max-min fairness demands that raising q_i/(Q_i psi_i) always
    drags down some user whose ratio already sat at or below the gainer's.
    Each trial perturbs the allocation (a pairwise epsilon transfer, or a
    fresh random feasible point) and reports any gainer without such a
    paying user.  An empty report means no violation was found.
    """
    rng = substream(seed, STREAM_ORACLE)
    q = allocation.quotas
    demand = problem.demand
    psi = problem.psi
    weight = demand * psi
    included = weight > 0
    n = problem.n
    if included.sum() < 2 or trials < 1:
        return []
    x = np.where(included, q / np.where(included, weight, 1.0), 0.0)

    violations: list[FairnessViolation] = []
    idx = np.flatnonzero(included)

    n_transfer = (trials * 4) // 5
    n_random = trials - n_transfer

    # Pairwise epsilon transfers, vectorized over trials.
    gainers = rng.choice(idx, size=n_transfer)
    payers = rng.choice(idx, size=n_transfer)
    ok = (
        (gainers != payers)
        & (q[gainers] + epsilon <= demand[gainers])
        & (q[payers] - epsilon >= 0.0)
    )
    x_gain_new = (q[gainers] + epsilon) / weight[gainers]
    x_pay_new = (q[payers] - epsilon) / weight[payers]
    raised = ok & (x_gain_new > x[gainers])
    # The payer is the only user whose ratio moves; the move satisfies the
    # fairness property only if the payer dropped from at-or-below the
    # gainer's old ratio.  The comparison carries a hair of slack so that
    # users sharing a common ratio up to rounding still qualify.
    paid_fairly = (x_pay_new < x[payers]) & (
        x[payers] <= x[gainers] + 1e-12 + 1e-9 * np.abs(x[gainers])
    )
    for t in np.flatnonzero(raised & ~paid_fairly):
        violations.append(
            FairnessViolation(
                trial=int(t),
                gainer=int(gainers[t]),
                description=(
                    f"transfer of {epsilon} from user {int(payers[t])} "
                    f"(ratio {x[payers[t]]:.6g} > gainer's {x[gainers[t]]:.6g}) "
                    f"raises user {int(gainers[t])} without a lower-ratio payer"
                ),
            )
        )

    # Fresh feasible points: q' ~ U(0, demand), rescaled into the budget.
    for t in range(n_random):
        alt = rng.uniform(0.0, 1.0, n) * demand
        total = alt.sum()
        if total > problem.q_total:
            alt *= problem.q_total / total
        x_alt = np.where(included, alt / np.where(included, weight, 1.0), 0.0)
        gain = included & (x_alt > x + 1e-12)
        if not gain.any():
            continue
        for i in np.flatnonzero(gain):
            payers_ok = included & (x_alt < x - 1e-12) & (
                x <= x[i] + 1e-12 + 1e-9 * abs(x[i])
            )
            if not payers_ok.any():
                violations.append(
                    FairnessViolation(
                        trial=n_transfer + t,
                        gainer=int(i),
                        description=(
                            f"random feasible point raises user {int(i)} "
                            f"(ratio {x[i]:.6g} -> {x_alt[i]:.6g}) with no "
                            "lower-ratio user paying"
                        ),
                    )
                )
                break
    return violations
