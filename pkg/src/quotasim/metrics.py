"""User utilities, social welfare, Jain's fairness index, over-provisioning."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    Allocation,
    AllocationProblem,
    DegenerateInputWarning,
    RealizedDemand,
)


@dataclass(frozen=True, eq=False)
class UtilityVector:
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True, eq=False)
class OverProvisionStats:
    count: int
    ratios: np.ndarray


def utilities(allocation: Allocation, problem: AllocationProblem) -> UtilityVector:
    """u_i = log(1 + qos * q_i / (cost_i * Q_i)); zero-demand users get 0."""
    q = allocation.quotas
    demand = problem.demand
    cost = problem.cost
    u = np.zeros(problem.n)
    m = demand > 0
    u[m] = np.log1p(problem.qos * q[m] / (cost[m] * demand[m]))
    return UtilityVector(values=u)


def welfare(allocation: Allocation, problem: AllocationProblem) -> float:
    """Contribution-weighted aggregate utility."""
    return float((problem.psi * utilities(allocation, problem).values).sum())


def jain_index(allocation: Allocation, problem: AllocationProblem) -> float:
    """Jain's index over the weighted satisfaction ratios q_i / (Q_i psi_i).

    Users with Q_i * psi_i == 0 have no defined ratio and are excluded; the
    index is computed over the remaining count.  All-zero ratios degenerate
    to 1 (everyone equally, if vacuously, satisfied) with a warning.
    """
    weight = problem.demand * problem.psi
    m = weight > 0
    if not m.any():
        warnings.warn(
            "no user has positive demand*contribution; fairness undefined, returning 1",
            DegenerateInputWarning,
            stacklevel=2,
        )
        return 1.0
    x = allocation.quotas[m] / weight[m]
    sq = float((x * x).sum())
    if sq == 0:
        warnings.warn(
            "all fairness ratios are zero; returning 1 by the all-equal convention",
            DegenerateInputWarning,
            stacklevel=2,
        )
        return 1.0
    s = float(x.sum())
    return s * s / (x.shape[0] * sq)


def jain_closed_form(k: int, h: float, psi_sorted: np.ndarray) -> float:
    """Jain's index of a k-satisfied / common-ratio-h allocation.

    psi_sorted are the contributions in the allocator's processing order
    (descending); the first k entries must be positive since satisfied users
    contribute 1/psi terms.
    """
    psi_sorted = np.asarray(psi_sorted, dtype=float)
    n = psi_sorted.shape[0]
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    head = psi_sorted[:k]
    if (head <= 0).any():
        raise ValueError("satisfied users must have positive contribution")
    inv = 1.0 / head if k else np.zeros(0)
    num = (inv.sum() + (n - k) * h) ** 2
    den = n * ((inv ** 2).sum() + (n - k) * h * h)
    return float(num / den)


def over_provision_stats(
    allocation: Allocation, realized: RealizedDemand
) -> OverProvisionStats:
    """Count and ratio of grants exceeding the realized demands.

    A user with zero realized demand counts as over-provisioned exactly when
    granted anything; the ratio is reported as inf then (1 when both zero).
    """
    q = allocation.quotas
    actual = realized.values
    over = q > actual
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(
            actual > 0, q / np.where(actual > 0, actual, 1.0),
            np.where(q > 0, np.inf, 1.0),
        )
    return OverProvisionStats(count=int(over.sum()), ratios=ratios)
