"""Baseline allocators: equal split, demand-proportional split, and the
contribution-rate scheme that ignores demand fairness.
"""

from __future__ import annotations

import warnings

import numpy as np

from .model import Allocation, AllocationProblem, DegenerateInputWarning


def allocate_ea(problem: AllocationProblem) -> Allocation:
    """Equal allocation: everyone gets q_total / n, demands ignored.

    Deliberately not capped by the declared demands; over-provision under EA
    is something the metrics measure, not something the scheme prevents.
    """
    share = problem.q_total / problem.n
    return Allocation(quotas=np.full(problem.n, share))


def allocate_da(problem: AllocationProblem) -> Allocation:
    """Demand-proportional allocation.

    Under contention each user gets q_total * Q_i / sum(Q); otherwise the
    demands are met exactly.
    """
    demand = problem.demand
    total = demand.sum()
    if total == 0 and problem.q_total > 0:
        warnings.warn(
            "all demands are zero; demand-proportional split degenerates to zeros",
            DegenerateInputWarning,
            stacklevel=2,
        )
        return Allocation(quotas=np.zeros(problem.n))
    if total <= problem.q_total:
        return Allocation(quotas=demand.copy())
    return Allocation(quotas=problem.q_total * demand / total)


def allocate_proportional_contribution(problem: AllocationProblem) -> Allocation:
    """Grant quota at rates proportional to contribution only.

    Users are processed in ascending order of demand per contribution unit
    (the order in which they saturate); each step grants the remaining quota
    at rate psi_j over the remaining contribution mass, capped by Q_j.
    """
    demand = problem.demand
    psi = problem.psi
    n = problem.n
    if demand.sum() <= problem.q_total:
        return Allocation(quotas=demand.copy())

    # Zero-contribution users sort last (their saturation ratio is infinite);
    # ties resolve by original index so the result is deterministic.
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(psi > 0, demand / np.where(psi > 0, psi, 1.0), np.inf)
    order = np.lexsort((np.arange(n), ratio))

    q = np.zeros(n)
    remaining = problem.q_total
    psi_rem = psi[order].sum()
    for pos, j in enumerate(order):
        if remaining <= 0:
            break
        if psi_rem <= 0:
            # Only zero-contribution users are left: split the remainder in
            # proportion to their demands instead of dividing by zero.
            tail = order[pos:]
            tail_demand = demand[tail]
            tail_total = tail_demand.sum()
            if tail_total > 0:
                scale = min(1.0, remaining / tail_total)
                q[tail] = scale * tail_demand
            break
        grant = min(demand[j], (psi[j] / psi_rem) * remaining)
        q[j] = grant
        remaining -= grant
        psi_rem -= psi[j]
    return Allocation(quotas=q)
