"""Non-cooperative demand-declaration game around the welfare allocator.

Treating each user's declared demand as a strategy and the allocator's
output utility as payoff, the game has a unique Nash equilibrium in closed
form; at that profile the declared demands sum exactly to the available
quota and every user's ice-plus-headroom level coincides.  The equilibrium
simultaneously maximizes aggregate weighted welfare, so it doubles as the
welfare upper bound the simulation harness normalizes against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """One declared-demand vector, position i belonging to player i."""

    demands: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "demands", np.asarray(self.demands, dtype=float))
        if (self.demands < 0).any():
            raise ValueError("demands must be non-negative")


@dataclass(frozen=True)
class NeDiagnostics:
    satisfied: bool
    total_residual: float   # |sum(demands) - q_total|
    level_spread: float     # max_i h_i - min_i h_i over positive-psi players


def nash_demands(
    psi: np.ndarray, cost: np.ndarray, qos: float, q_total: float
) -> StrategyProfile:
    """Closed-form equilibrium demands.

    Each player's share is psi_i / (qos + cost_i) normalized over the
    population and scaled by q_total.  Zero-contribution players get zero.
    """
    psi = np.asarray(psi, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if qos <= 0:
        raise ValueError("qos must be > 0")
    weights = psi / (qos + cost)
    total = weights.sum()
    if total <= 0:
        raise ValueError("all-zero contribution: equilibrium demands undefined")
    return StrategyProfile(demands=q_total * weights / total)


def _levels(demands: np.ndarray, psi: np.ndarray, cost: np.ndarray, qos: float) -> np.ndarray:
    # h_i = Q_i/psi_i + c_i Q_i/(qos psi_i), defined for psi_i > 0
    return demands * (1.0 + cost / qos) / psi


def check_ne_conditions(
    profile: StrategyProfile,
    psi: np.ndarray,
    cost: np.ndarray,
    qos: float,
    q_total: float,
    tol: float = 1e-9,
) -> NeDiagnostics:
    """Verify the equilibrium conditions: demands exhaust q_total and all
    (positive-contribution) players sit at a common ice-plus-water level."""
    psi = np.asarray(psi, dtype=float)
    cost = np.asarray(cost, dtype=float)
    demands = profile.demands
    if demands.shape != psi.shape:
        raise ValueError("profile dimension mismatch")
    total_residual = abs(float(demands.sum()) - q_total)
    m = psi > 0
    if m.any():
        h = _levels(demands[m], psi[m], cost[m], qos)
        level_spread = float(h.max() - h.min())
    else:
        level_spread = 0.0
    return NeDiagnostics(
        satisfied=(total_residual <= tol and level_spread <= tol),
        total_residual=total_residual,
        level_spread=level_spread,
    )


def welfare_bound(psi: np.ndarray, cost: np.ndarray, qos: float) -> float:
    """Global welfare maximum: sum_i psi_i * log(1 + qos / cost_i)."""
    psi = np.asarray(psi, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if qos <= 0:
        raise ValueError("qos must be > 0")
    if (cost <= 0).any():
        raise ValueError("costs must be positive")
    return float((psi * np.log1p(qos / cost)).sum())


DEFAULT_DEVIATION_GRID = np.linspace(0.1, 2.0, 200)


def deviation_sweep(
    player: int,
    profile: StrategyProfile,
    psi: np.ndarray,
    cost: np.ndarray,
    qos: float,
    q_total: float,
    grid: np.ndarray | None = None,
) -> float:
    """Best utility gain the player can get by rescaling their declaration.

    For each multiplier the player's demand is replaced, the allocation
    recomputed, and the player's utility re-evaluated against the deviated
    declaration.  Returns the maximum gain over the grid (non-positive means
    no profitable deviation was found).

    Only the deviating player's tank changes between grid points, so the
    fixed players' fill breakpoints are sorted once and the deviating tank
    is merged in per point; the result is the same allocation the full
    allocator produces on the perturbed demand vector (the unit tests cross
    check the two paths).
    """
    psi = np.asarray(psi, dtype=float)
    cost = np.asarray(cost, dtype=float)
    grid = DEFAULT_DEVIATION_GRID if grid is None else np.asarray(grid, dtype=float)
    if (grid <= 0).any():
        raise ValueError("grid multipliers must be positive")
    base = profile.demands.astype(float)
    n = base.shape[0]
    if not 0 <= player < n:
        raise IndexError(f"player index {player} out of range")
    if psi[player] <= 0 or base[player] <= 0:
        # The player never holds water (zero area) or never declares
        # anything; utility is pinned at zero either way.
        return 0.0

    # Multiplier 1.0 rides along so the baseline utility goes through the
    # exact same computation as every grid point.
    u = _deviation_utilities(
        player, base, psi, cost, qos, q_total, np.concatenate([[1.0], grid])
    )
    return float(np.max(u[1:]) - u[0])


def _deviation_utilities(
    player: int,
    base: np.ndarray,
    psi: np.ndarray,
    cost: np.ndarray,
    qos: float,
    q_total: float,
    multipliers: np.ndarray,
) -> np.ndarray:
    """Player's utility for every rescaled declaration, all grid points at
    once.

    Only the player's tank moves between grid points: its ice level and head
    room both scale linearly with the multiplier.  The fixed players'
    breakpoint levels and cumulative volumes are computed once; each grid
    point then locates its fill level inside that skeleton.  Equivalent to
    re-running the allocator per point (the tests cross-check this).
    """
    n = base.shape[0]
    others = np.ones(n, dtype=bool)
    others[player] = False
    demand_rest = float(base[others].sum())
    active = others & (psi > 0) & (base > 0)

    ice_o = cost[active] * base[active] / (psi[active] * qos)
    levels = np.concatenate([ice_o, ice_o + base[active] / psi[active]])
    delta = np.concatenate([psi[active], -psi[active]])
    order = np.argsort(levels, kind="stable")
    lv = levels[order]
    area_o = np.cumsum(delta[order])
    if lv.shape[0]:
        vol_o = np.concatenate([[0.0], np.cumsum(area_o[:-1] * np.diff(lv))])
        cap_o = float(vol_o[-1])
    else:
        vol_o = np.zeros(0)
        cap_o = 0.0

    psi_p = float(psi[player])
    cost_p = float(cost[player])
    d = multipliers * base[player]
    ice_p = cost_p * d / (psi_p * qos)
    head = d / psi_p
    top_p = ice_p + head

    q = np.empty(multipliers.shape[0])
    fits = demand_rest + d <= q_total
    q[fits] = d[fits]
    pour = ~fits
    if pour.any():
        full = pour & (cap_o + psi_p * head <= q_total)
        q[full] = d[full]
        part = pour & ~full
        if part.any():
            q[part] = _partial_fill_quota(
                lv, area_o, vol_o, q_total,
                psi_p, ice_p[part], top_p[part], head[part],
            )
    return np.log1p(qos * q / (cost_p * d))


def _partial_fill_quota(
    lv: np.ndarray,
    area_o: np.ndarray,
    vol_o: np.ndarray,
    amount: float,
    psi_p: float,
    ice_p: np.ndarray,
    top_p: np.ndarray,
    head: np.ndarray,
) -> np.ndarray:
    """Quota the moving tank receives when the pour stops mid-way.

    lv/area_o/vol_o describe the fixed tanks (sorted breakpoint levels,
    active area and cumulative volume at each); the moving tank contributes
    psi_p * clamp(level - ice_p, 0, head).  Solves for the level where total
    volume hits ``amount``, per grid point.
    """
    m = ice_p.shape[0]
    if lv.shape[0] == 0:
        # No fixed tank holds water; the mover drinks alone.
        return np.minimum(amount, psi_p * head)

    # Total volume at each fixed breakpoint, per grid point.
    total = vol_o[None, :] + psi_p * np.clip(lv[None, :] - ice_p[:, None], 0.0, head[:, None])
    k = np.sum(total <= amount, axis=1) - 1

    q = np.empty(m)
    below = k < 0
    # Level sits below every fixed breakpoint: the mover absorbs the whole
    # pour, up to its own head room.
    q[below] = np.minimum(amount, psi_p * head[below])

    mid = ~below
    if mid.any():
        ki = k[mid]
        last = lv.shape[0] - 1
        l_lo = lv[ki]
        l_hi = np.where(ki == last, np.inf, lv[np.minimum(ki + 1, last)])
        width = np.where(ki == last, 0.0, area_o[ki])
        t_lo = total[mid, ki]
        a = ice_p[mid]
        b = top_p[mid]
        h = head[mid]
        a_c = np.clip(a, l_lo, l_hi)
        b_c = np.clip(b, l_lo, l_hi)
        base_off = np.clip(l_lo - a, 0.0, h)
        t_a = t_lo + width * (a_c - l_lo) + psi_p * (np.clip(a_c - a, 0.0, h) - base_off)
        t_b = t_lo + width * (b_c - l_lo) + psi_p * (np.clip(b_c - a, 0.0, h) - base_off)
        with np.errstate(divide="ignore", invalid="ignore"):
            level = np.select(
                [amount <= t_a, amount <= t_b],
                [
                    np.where(width > 0, l_lo + (amount - t_lo) / np.where(width > 0, width, 1.0), l_lo),
                    a_c + (amount - t_a) / (width + psi_p),
                ],
                default=np.where(width > 0, b_c + (amount - t_b) / np.where(width > 0, width, 1.0), b_c),
            )
        q[mid] = psi_p * np.clip(level - a, 0.0, h)
    return q
