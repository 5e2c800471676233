"""Demand-fairness allocator (IDF).

Grants grow each user's quota at a rate proportional to demand times
contribution, capping at the declared demand, so that among non-capped users
the weighted satisfaction ratio q_i / (Q_i * psi_i) ends up equal.  The
output always decomposes into a fully-satisfied prefix (in descending-psi
order) plus a common-ratio remainder; `idf_water_level` recovers that
decomposition.
"""

from __future__ import annotations

import numpy as np

from .model import LEVEL_TOL, Allocation, AllocationProblem


def descending_psi_order(psi: np.ndarray) -> np.ndarray:
    """Processing order: contribution descending, index ascending on ties."""
    psi = np.asarray(psi, dtype=float)
    return np.lexsort((np.arange(psi.shape[0]), -psi))


def allocate_idf(problem: AllocationProblem) -> Allocation:
    """Demand-fair allocation, returned in the problem's user order."""
    demand = problem.demand
    psi = problem.psi
    if demand.sum() <= problem.q_total:
        return Allocation(quotas=demand.copy())

    order = descending_psi_order(psi)
    weight = demand * psi
    q = np.zeros(problem.n)
    remaining = problem.q_total
    weight_rem = weight[order].sum()
    for j in order:
        if remaining <= 0 or weight_rem <= 0:
            # Remaining users all have zero demand-contribution weight; under
            # contention they earn nothing.
            break
        grant = min(demand[j], remaining * weight[j] / weight_rem)
        q[j] = grant
        remaining -= grant
        weight_rem -= weight[j]
    return Allocation(quotas=q)


def idf_water_level(problem: AllocationProblem) -> tuple[int, float]:
    """Decompose the IDF output into (k, h).

    k is the number of fully satisfied users counted in descending-psi
    order; every later user j holds q_j = h * Q_j * psi_j.  Only defined
    under contention (total demand above q_total).
    """
    demand = problem.demand
    psi = problem.psi
    if demand.sum() <= problem.q_total:
        raise ValueError("not in contention: total demand does not exceed q_total")

    q = allocate_idf(problem).quotas
    order = descending_psi_order(psi)
    q_sorted = q[order]
    d_sorted = demand[order]

    # Scan the longest fully-satisfied prefix; boundary users whose
    # common-ratio grant lands exactly on the cap count as satisfied.
    k = 0
    for j in range(problem.n):
        if q_sorted[j] >= d_sorted[j] - LEVEL_TOL:
            k += 1
        else:
            break

    weight_tail = (demand * psi)[order][k:].sum()
    if weight_tail <= 0:
        return k, 0.0
    h = (problem.q_total - d_sorted[:k].sum()) / weight_tail
    return k, float(h)
