"""Welfare-maximizing allocator (ITF), its chance-constrained variant, and
the post-slot burst reallocation.

The allocator views each user as a tank of base area psi_i whose bottom is
blocked by ice of height cost_i * Q_i / (psi_i * qos); the head room above
the ice is Q_i / psi_i.  Pouring the total quota into the connected tanks,
lowest exposed surface first, maximizes the contribution-weighted log
utility sum: a user's marginal value is the reciprocal of their current
surface level, so filling the lowest surface is a greedy exact solver for
this separable concave program.

Two interchangeable fill engines are provided:

* ``sweep``  -- sorts the 2N ice/top breakpoints once and walks the level
  upward with a running active area, O(N log N); the default.
* ``literal`` -- the step-by-step simulation of the same pour (find lowest
  surface, fill to the next event, remove full tanks), O(N^2); kept for
  conformance testing and iteration accounting.

Both must agree to 1e-12 on any input; the test suite enforces this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import LEVEL_TOL, Allocation, AllocationProblem, RealizedDemand


@dataclass(eq=False)
class TankState:
    """Fill-problem geometry: per-tank ice level, top level and base area."""

    ice: np.ndarray
    top: np.ndarray
    area: np.ndarray
    removed: np.ndarray

    def __post_init__(self) -> None:
        self.ice = np.asarray(self.ice, dtype=float)
        self.top = np.asarray(self.top, dtype=float)
        self.area = np.asarray(self.area, dtype=float)
        self.removed = np.asarray(self.removed, dtype=bool)
        if (self.top < self.ice).any():
            raise ValueError("tank top below ice level")
        if (self.area <= 0).any():
            raise ValueError("tank areas must be positive")

    @property
    def capacity(self) -> np.ndarray:
        return self.area * (self.top - self.ice)


@dataclass(frozen=True, eq=False)
class FillResult:
    """Outcome of pouring into a tank set.

    water       volume added per tank
    level       final common surface level (inf when every tank filled up)
    iterations  main-loop steps taken by the engine
    """

    water: np.ndarray
    level: float
    iterations: int


def make_tanks(
    psi: np.ndarray, cost: np.ndarray, demand: np.ndarray, qos: float,
    caps: np.ndarray | None = None,
) -> TankState:
    """Tank geometry for a (sub)population with strictly positive areas.

    ``caps`` overrides the head-room volume (used by the chance-constrained
    variant, where head room shrinks to the quantile-adjusted demand while
    the ice keeps using the declared demand).
    """
    caps = demand if caps is None else caps
    ice = cost * demand / (psi * qos)
    top = ice + caps / psi
    return TankState(ice=ice, top=top, area=psi.copy(), removed=np.zeros(len(psi), dtype=bool))


def fill_tanks(tanks: TankState, amount: float, method: str = "sweep") -> FillResult:
    """Pour ``amount`` into the tanks, lowest exposed surface first.

    Tanks flagged as removed take no water.  If the pour exceeds the total
    remaining capacity, every tank fills to its top and the leftover stays
    unallocated (the level is then inf).
    """
    if amount < 0:
        raise ValueError("fill amount must be >= 0")
    if method not in ("sweep", "literal"):
        raise ValueError(f"unknown fill method: {method!r}")
    engine = _fill_sweep if method == "sweep" else _fill_literal
    if tanks.removed.any():
        keep = ~tanks.removed
        inner = engine(tanks.ice[keep], tanks.top[keep], tanks.area[keep], amount)
        water = np.zeros(tanks.ice.shape[0])
        water[keep] = inner.water
        return FillResult(water=water, level=inner.level, iterations=inner.iterations)
    return engine(tanks.ice, tanks.top, tanks.area, amount)


def surface_level(
    lv: np.ndarray, active: np.ndarray, amount: float
) -> tuple[float, int]:
    """Level reached after pouring ``amount`` over sorted breakpoints ``lv``
    with running active area ``active`` (inf when capacity runs out)."""
    vol = np.empty(lv.shape[0])
    vol[0] = 0.0
    np.cumsum(active[:-1] * np.diff(lv), out=vol[1:])
    if amount >= vol[-1]:
        return math.inf, lv.shape[0] - 1
    k = int(np.searchsorted(vol, amount, side="right")) - 1
    if amount > vol[k]:
        return float(lv[k] + (amount - vol[k]) / active[k]), k + 1
    return float(lv[k]), k + 1


def _fill_sweep(
    ice: np.ndarray, top: np.ndarray, area: np.ndarray, amount: float
) -> FillResult:
    levels = np.concatenate([ice, top])
    deltas = np.concatenate([area, -area])
    order = np.argsort(levels, kind="stable")
    level, iterations = surface_level(levels[order], np.cumsum(deltas[order]), amount)
    if math.isinf(level):
        water = area * (top - ice)
    else:
        water = area * np.clip(level - ice, 0.0, top - ice)
    return FillResult(water=water, level=level, iterations=iterations)


def _fill_literal(
    ice: np.ndarray, top: np.ndarray, area: np.ndarray, amount: float
) -> FillResult:
    n = len(ice)
    surface = ice.copy()   # current ice+water level per tank
    top = top.copy()
    water = np.zeros(n)
    remaining = amount
    level = float(surface.min())
    iterations = 0

    # Zero-capacity tanks are immediately full.
    alive = top - ice > 0
    surface[~alive] = np.inf
    top[~alive] = np.inf

    while remaining > 0 and alive.any():
        iterations += 1
        bot = surface[alive].min()
        at_bottom = alive & (surface <= bot + LEVEL_TOL)
        width = area[at_bottom].sum()
        others = alive & ~at_bottom
        cap_next_ice = surface[others].min() if others.any() else np.inf
        cap_lowest_top = top[alive].min()
        height = min(cap_next_ice, cap_lowest_top) - bot
        if width * height < remaining:
            remaining -= width * height
        else:
            height = remaining / width
            remaining = 0.0
        surface[at_bottom] += height
        water[at_bottom] += height * area[at_bottom]
        level = bot + height
        if remaining > 0 and (cap_lowest_top <= cap_next_ice or math.isinf(cap_next_ice)):
            full = alive & (np.abs(top - cap_lowest_top) <= LEVEL_TOL)
            alive &= ~full
            surface[full] = np.inf
            top[full] = np.inf
    if remaining > 0:
        level = math.inf
    return FillResult(water=water, level=level, iterations=iterations)


# ---------------------------------------------------------------------------
# allocators
# ---------------------------------------------------------------------------

def itf_quotas(
    psi: np.ndarray,
    cost: np.ndarray,
    demand: np.ndarray,
    qos: float,
    q_total: float,
    method: str = "sweep",
) -> tuple[np.ndarray, FillResult | None]:
    """Array-level allocator core; also the hot path for sweeps over many
    perturbed demand vectors.

    Returns (quotas, fill diagnostics); the diagnostics are None when total
    demand fits inside q_total (no pouring happens in that regime).
    """
    if demand.sum() <= q_total:
        return demand.copy(), None
    q = np.zeros(demand.shape[0])
    mask = (psi > 0) & (demand > 0)
    if not mask.any():
        return q, None
    area = psi[mask]
    ice = cost[mask] * demand[mask] / (area * qos)
    top = ice + demand[mask] / area
    if method == "sweep":
        result = _fill_sweep(ice, top, area, q_total)
    elif method == "literal":
        result = _fill_literal(ice, top, area, q_total)
    else:
        raise ValueError(f"unknown fill method: {method!r}")
    # the fill never exceeds a cap mathematically; clamp away the last-ulp
    # excess the level arithmetic can leave
    q[mask] = np.minimum(result.water, demand[mask])
    return q, result


def allocate_itf(problem: AllocationProblem, method: str = "sweep") -> Allocation:
    """Welfare-maximizing allocation, demands met outright when they fit."""
    return allocate_itf_info(problem, method)[0]


def allocate_itf_info(
    problem: AllocationProblem, method: str = "sweep"
) -> tuple[Allocation, FillResult | None]:
    """Like `allocate_itf` but also returns the fill diagnostics."""
    q, result = itf_quotas(
        problem.psi, problem.cost, problem.demand, problem.qos,
        problem.q_total, method=method,
    )
    return Allocation(quotas=q), result


def effective_demand_caps(problem: AllocationProblem) -> np.ndarray:
    """Per-user quantile-adjusted caps max(0, Q_i + sigma_i * z(alpha_i))."""
    z = np.array([probit(a) for a in problem.alpha])
    return np.maximum(problem.demand + problem.sigma * z, 0.0)


def allocate_itf_ccp(problem: AllocationProblem, method: str = "sweep") -> Allocation:
    """Chance-constrained variant: head room shrinks to the adjusted caps.

    Replacing each stochastic cap "granted quota stays within the actual
    demand with probability 1 - alpha_i" by its deterministic quantile
    equivalent Q_i + sigma_i * z(alpha_i) reduces the problem to a plain
    fill with smaller tops.  Ice levels keep using the declared demands.
    """
    caps = effective_demand_caps(problem)
    if caps.sum() <= problem.q_total:
        return Allocation(quotas=caps)
    q = np.zeros(problem.n)
    mask = (problem.psi > 0) & (caps > 0)
    if not mask.any():
        return Allocation(quotas=q)
    tanks = make_tanks(
        problem.psi[mask], problem.cost[mask], problem.demand[mask],
        problem.qos, caps=caps[mask],
    )
    result = fill_tanks(tanks, problem.q_total, method=method)
    q[mask] = np.minimum(result.water, caps[mask])
    return Allocation(quotas=q)


def allocate_burst(
    extra_quota: float,
    consumption_start: np.ndarray,
    realized: RealizedDemand,
    method: str = "sweep",
) -> Allocation:
    """Reallocate leftover quota during consumption, first-come-first-serve.

    consumption_start[i] is the time user i exhausted the granted quota; the
    burst grant is capped by what the user still actually wants,
    (realized_i - start_i)^+.  Running the fill engine with unit areas and
    ice at the start times makes earlier finishers drink first, which is
    exactly FCFS.
    """
    if extra_quota < 0:
        raise ValueError("extra quota must be >= 0")
    start = np.asarray(consumption_start, dtype=float)
    want = np.maximum(realized.values - start, 0.0)
    grants = np.zeros(start.shape[0])
    if extra_quota == 0:
        return Allocation(quotas=grants)
    if want.sum() <= extra_quota:
        return Allocation(quotas=want)
    mask = want > 0
    tanks = TankState(
        ice=start[mask],
        top=start[mask] + want[mask],
        area=np.ones(int(mask.sum())),
        removed=np.zeros(int(mask.sum()), dtype=bool),
    )
    result = fill_tanks(tanks, extra_quota, method=method)
    grants[mask] = np.minimum(result.water, want[mask])
    return Allocation(quotas=grants)


# ---------------------------------------------------------------------------
# standard-normal quantile
# ---------------------------------------------------------------------------

# Coefficients of Acklam's rational approximation to the normal quantile.
_PROBIT_A = (
    -3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
    1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00,
)
_PROBIT_B = (
    -5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
    6.680131188771972e+01, -1.328068155288572e+01,
)
_PROBIT_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
    -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00,
)
_PROBIT_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
    3.754408661907416e+00,
)
_PROBIT_SPLIT = 0.02425


def probit(p: float) -> float:
    """Quantile of the standard normal distribution, |error| < 1e-8.

    Rational initial guess refined by one Halley step against erfc, which
    brings the result close to machine precision over (0, 1).  Arguments
    above one half reduce to the lower tail (1 - p is exact there), where
    the CDF residual keeps full relative precision.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probit argument must be in (0, 1), got {p}")
    if p > 0.5:
        return -_probit_lower(1.0 - p)
    return _probit_lower(p)


def _probit_lower(p: float) -> float:
    # p in (0, 0.5]; the result is <= 0
    if p < _PROBIT_SPLIT:
        x = _probit_tail(math.sqrt(-2.0 * math.log(p)))
    else:
        u = p - 0.5
        r = u * u
        a, b = _PROBIT_A, _PROBIT_B
        num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        x = u * num / den
    # Halley refinement: e is the CDF residual at x; erfc of a non-negative
    # argument is relatively precise, so e is accurate even deep in the tail.
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    if not math.isfinite(u):
        return x
    return x - u / (1.0 + x * u / 2.0)


def _probit_tail(t: float) -> float:
    c, d = _PROBIT_C, _PROBIT_D
    num = ((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]
    den = (((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0
    return num / den
