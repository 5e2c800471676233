"""Experiment harness: Monte-Carlo scheme comparison, the uncertainty
(expected-value vs chance-constrained) study, burst reallocation, and the
fixed-population micro studies.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines, game, idf, itf, metrics
from .model import (
    Allocation,
    AllocationProblem,
    RealizedDemand,
    STREAM_BURST,
    STREAM_REALIZE,
    ScenarioConfig,
    generate_scenario,
    realize_demands,
    substream,
)

SCHEME_IDS = ("ea", "da", "pca", "idf", "itf", "ne", "itf-ccp")
DEFAULT_MACRO_SCHEMES = ("ea", "da", "idf", "itf", "ne", "itf-ccp")
DEFAULT_MICRO_SCHEMES = ("ea", "da", "idf", "itf")


def apply_scheme(scheme: str, problem: AllocationProblem) -> tuple[Allocation, AllocationProblem]:
    """Run one scheme; returns the allocation and the problem it was scored
    against (the equilibrium scheme replaces the declared demands first)."""
    if scheme == "ea":
        return baselines.allocate_ea(problem), problem
    if scheme == "da":
        return baselines.allocate_da(problem), problem
    if scheme == "pca":
        return baselines.allocate_proportional_contribution(problem), problem
    if scheme == "idf":
        return idf.allocate_idf(problem), problem
    if scheme == "itf":
        return itf.allocate_itf(problem), problem
    if scheme == "itf-ccp":
        return itf.allocate_itf_ccp(problem), problem
    if scheme == "ne":
        profile = game.nash_demands(
            problem.psi, problem.cost, problem.qos, problem.q_total
        )
        ne_problem = problem.with_demands(profile.demands)
        return itf.allocate_itf(ne_problem), ne_problem
    raise ValueError(f"unknown scheme: {scheme!r}")


# ---------------------------------------------------------------------------
# slot outcomes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SlotOutcome:
    """Everything observed for one scheme in one simulated slot."""

    scheme: str
    problem: AllocationProblem
    allocation: Allocation
    realized: RealizedDemand
    utilities: np.ndarray
    welfare: float
    jain: float
    over_provision_count: int
    burst_grants: np.ndarray
    q_ext: float

    @property
    def total_granted(self) -> float:
        return float(self.allocation.quotas.sum() + self.burst_grants.sum())


def _score_slot(
    scheme: str,
    problem: AllocationProblem,
    allocation: Allocation,
    realized: RealizedDemand,
    q_ext: float = 0.0,
) -> SlotOutcome:
    u = metrics.utilities(allocation, problem).values
    return SlotOutcome(
        scheme=scheme,
        problem=problem,
        allocation=allocation,
        realized=realized,
        utilities=u,
        welfare=float((problem.psi * u).sum()),
        jain=metrics.jain_index(allocation, problem),
        over_provision_count=metrics.over_provision_stats(allocation, realized).count,
        burst_grants=np.zeros(problem.n),
        q_ext=q_ext,
    )


# ---------------------------------------------------------------------------
# macro experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundRecord:
    round: int
    scheme: str
    welfare: float
    jain: float
    over_provision_count: int
    q_ext: float
    ne_fraction: float


@dataclass(frozen=True)
class SchemeAggregate:
    scheme: str
    welfare_mean: float
    welfare_ci95: float
    jain_mean: float
    jain_ci95: float
    ne_fraction_mean: float
    ne_fraction_ci95: float


@dataclass(frozen=True)
class ExperimentReport:
    config: ScenarioConfig
    schemes: tuple[str, ...]
    rounds: tuple[RoundRecord, ...]
    aggregates: tuple[SchemeAggregate, ...]


def _mean_ci(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if values.shape[0] < 2:
        return mean, 0.0
    half = 1.96 * float(values.std(ddof=1)) / np.sqrt(values.shape[0])
    return mean, half


def run_macro_experiment(
    config: ScenarioConfig, schemes: tuple[str, ...] = DEFAULT_MACRO_SCHEMES
) -> ExperimentReport:
    """Monte-Carlo comparison of the selected schemes.

    Each round draws a fresh scenario plus one shared demand realization,
    scores every scheme on it, and normalizes welfare by the round's
    equilibrium welfare bound.  Aggregates are sample means with normal
    95% confidence half-widths.
    """
    for s in schemes:
        if s not in SCHEME_IDS:
            raise ValueError(f"unknown scheme: {s!r}")
    records: list[RoundRecord] = []
    for r in range(config.rounds):
        problem = generate_scenario(config, r)
        realized = realize_demands(
            substream(config.seed, STREAM_REALIZE, r), problem, config.relative_sigma
        )
        bound = game.welfare_bound(problem.psi, problem.cost, problem.qos)
        for scheme in schemes:
            allocation, scored_problem = apply_scheme(scheme, problem)
            q_ext = 0.0
            if scheme == "itf-ccp":
                q_ext = max(
                    0.0, problem.q_total - itf.effective_demand_caps(problem).sum()
                )
            outcome = _score_slot(scheme, scored_problem, allocation, realized, q_ext)
            records.append(
                RoundRecord(
                    round=r,
                    scheme=scheme,
                    welfare=outcome.welfare,
                    jain=outcome.jain,
                    over_provision_count=outcome.over_provision_count,
                    q_ext=q_ext,
                    ne_fraction=outcome.welfare / bound if bound > 0 else 0.0,
                )
            )
    aggregates = []
    for scheme in schemes:
        rows = [rec for rec in records if rec.scheme == scheme]
        welfare_mean, welfare_ci = _mean_ci(np.array([rec.welfare for rec in rows]))
        jain_mean, jain_ci = _mean_ci(np.array([rec.jain for rec in rows]))
        frac_mean, frac_ci = _mean_ci(np.array([rec.ne_fraction for rec in rows]))
        aggregates.append(
            SchemeAggregate(
                scheme=scheme,
                welfare_mean=welfare_mean,
                welfare_ci95=welfare_ci,
                jain_mean=jain_mean,
                jain_ci95=jain_ci,
                ne_fraction_mean=frac_mean,
                ne_fraction_ci95=frac_ci,
            )
        )
    return ExperimentReport(
        config=config,
        schemes=tuple(schemes),
        rounds=tuple(records),
        aggregates=tuple(aggregates),
    )


# ---------------------------------------------------------------------------
# uncertainty study (expected-value vs chance-constrained)
# ---------------------------------------------------------------------------

def run_uncertainty_experiment(
    config: ScenarioConfig, method: str, slot_index: int = 0
) -> SlotOutcome:
    """Score one slot under demand uncertainty.

    method "evm" trusts the declared demands outright; "ccp" applies the
    quantile-adjusted caps.  Both methods draw the realized demands from the
    same per-slot stream, so a ccp run faces bit-identical actual demands as
    the evm run it is compared with.
    """
    problem = generate_scenario(config, slot_index)
    realized = realize_demands(
        substream(config.seed, STREAM_REALIZE, slot_index),
        problem,
        config.relative_sigma,
    )
    if method == "evm":
        allocation = itf.allocate_itf(problem)
        q_ext = 0.0
    elif method == "ccp":
        allocation = itf.allocate_itf_ccp(problem)
        q_ext = max(0.0, problem.q_total - itf.effective_demand_caps(problem).sum())
    else:
        raise ValueError(f"unknown uncertainty method: {method!r}")
    return _score_slot(method, problem, allocation, realized, q_ext)


def run_burst_phase(
    outcome: SlotOutcome, rng: np.random.Generator
) -> SlotOutcome:
    """Roll leftover quota into opportunistic burst grants.

    Draws each user's quota-exhaustion time uniformly between their granted
    quota and the slot end, then reallocates the leftover first-come-first-
    serve, capped by what each user still actually wants.  No-op when there
    is no leftover.
    """
    if outcome.q_ext <= 0:
        return outcome
    q = outcome.allocation.quotas
    # Exhaustion time is uniform on [q_i, 1]; a grant at or past the slot
    # end leaves no burst window.
    draw = rng.uniform(np.minimum(q, 1.0), 1.0)
    start = np.where(q < 1.0, draw, q)
    grants = itf.allocate_burst(outcome.q_ext, start, outcome.realized).quotas
    merged = Allocation(quotas=q + grants)
    u = metrics.utilities(merged, outcome.problem).values
    return SlotOutcome(
        scheme=outcome.scheme,
        problem=outcome.problem,
        allocation=outcome.allocation,
        realized=outcome.realized,
        utilities=u,
        welfare=float((outcome.problem.psi * u).sum()),
        jain=metrics.jain_index(merged, outcome.problem),
        over_provision_count=metrics.over_provision_stats(
            merged, outcome.realized
        ).count,
        burst_grants=grants,
        q_ext=outcome.q_ext,
    )


def burst_rng(config: ScenarioConfig, slot_index: int = 0) -> np.random.Generator:
    """Stream reserved for burst timing draws of one slot."""
    return substream(config.seed, STREAM_BURST, slot_index)


# ---------------------------------------------------------------------------
# micro studies (fixed representative populations)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MicroUser:
    label: str
    demand: float
    psi: float
    cost: float


NORMAL_USER = MicroUser("normal", demand=0.5, psi=0.5, cost=0.5)

# Users a demand-based incentive should disfavor, next to one normal user.
UNWELCOME_USERS = (
    MicroUser("high-demand", demand=1.0, psi=0.5, cost=0.5),
    MicroUser("low-contribution", demand=0.5, psi=0.25, cost=0.5),
    MicroUser("high-cost", demand=0.5, psi=0.5, cost=1.0),
    NORMAL_USER,
)

# Users a demand-based incentive should favor, next to one normal user.
WELCOME_USERS = (
    MicroUser("low-demand", demand=0.25, psi=0.5, cost=0.5),
    MicroUser("high-contribution", demand=0.5, psi=1.0, cost=0.5),
    MicroUser("low-cost", demand=0.5, psi=0.5, cost=0.25),
    NORMAL_USER,
)


@dataclass(frozen=True, eq=False)
class MicroStudyReport:
    labels: tuple[str, ...]
    problem: AllocationProblem
    schemes: tuple[str, ...]
    quotas: dict[str, np.ndarray]
    ratios: dict[str, np.ndarray]
    utilities: dict[str, np.ndarray]


def micro_population(
    special: tuple[MicroUser, ...] = UNWELCOME_USERS,
    n_total: int = 100,
    fill_user: MicroUser = NORMAL_USER,
    q_total_fraction: float = 0.75,
    qos_kappa: float = 1e-3,
) -> tuple[AllocationProblem, tuple[str, ...]]:
    """Fixed population: the special users followed by normal fill users.

    q_total and qos are computed from the population itself (a fixed
    fraction of total demand, and kappa times total contribution), so the
    study is exact, not sampled.
    """
    if n_total < len(special):
        raise ValueError("population smaller than the special-user list")
    users = list(special) + [fill_user] * (n_total - len(special))
    demand = np.array([u.demand for u in users])
    psi = np.array([u.psi for u in users])
    cost = np.array([u.cost for u in users])
    problem = AllocationProblem.from_arrays(
        psi=psi,
        cost=cost,
        demand=demand,
        q_total=q_total_fraction * demand.sum(),
        qos=qos_kappa * psi.sum(),
    )
    labels = tuple(u.label for u in users)
    return problem, labels


def run_micro_study(
    special: tuple[MicroUser, ...] = UNWELCOME_USERS,
    schemes: tuple[str, ...] = DEFAULT_MICRO_SCHEMES,
    n_total: int = 100,
) -> MicroStudyReport:
    """Exact per-user comparison of schemes on a fixed population."""
    problem, labels = micro_population(special, n_total=n_total)
    quotas: dict[str, np.ndarray] = {}
    ratios: dict[str, np.ndarray] = {}
    utils: dict[str, np.ndarray] = {}
    for scheme in schemes:
        allocation, scored_problem = apply_scheme(scheme, problem)
        q = allocation.quotas
        quotas[scheme] = q
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios[scheme] = np.where(
                scored_problem.demand > 0, q / scored_problem.demand, 0.0
            )
        utils[scheme] = metrics.utilities(allocation, scored_problem).values
    return MicroStudyReport(
        labels=labels,
        problem=problem,
        schemes=tuple(schemes),
        quotas=quotas,
        ratios=ratios,
        utilities=utils,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("round", "scheme", "welfare", "jain", "over_provision_count", "q_ext")


def write_round_csv(path: str | Path, report: ExperimentReport) -> None:
    """Per-round records, one row per (round, scheme), fixed column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in report.rounds:
            writer.writerow(
                [
                    rec.round,
                    rec.scheme,
                    f"{rec.welfare:.12g}",
                    f"{rec.jain:.12g}",
                    rec.over_provision_count,
                    f"{rec.q_ext:.12g}",
                ]
            )


def report_to_dict(report: ExperimentReport) -> dict:
    """JSON-ready aggregate view of a macro experiment."""
    return {
        "n_users": report.config.n_users,
        "seed": report.config.seed,
        "rounds": report.config.rounds,
        "schemes": list(report.schemes),
        "aggregates": [
            {
                "scheme": agg.scheme,
                "welfare_mean": _sig(agg.welfare_mean),
                "welfare_ci95": _sig(agg.welfare_ci95),
                "jain_mean": _sig(agg.jain_mean),
                "jain_ci95": _sig(agg.jain_ci95),
                "ne_fraction_mean": _sig(agg.ne_fraction_mean),
                "ne_fraction_ci95": _sig(agg.ne_fraction_ci95),
            }
            for agg in report.aggregates
        ],
    }


def micro_report_to_dict(report: MicroStudyReport, focus: int | None = None) -> dict:
    """JSON-ready micro-study view; focus limits the listed users (the
    leading special users plus one normal representative by default)."""
    if focus is None:
        focus = len([lb for lb in report.labels if lb != NORMAL_USER.label]) + 1
    rows = []
    for i in range(min(focus, len(report.labels))):
        rows.append(
            {
                "user": i + 1,
                "label": report.labels[i],
                **{
                    scheme: {
                        "quota": _sig(float(report.quotas[scheme][i])),
                        "quota_over_demand": _sig(float(report.ratios[scheme][i])),
                        "utility": _sig(float(report.utilities[scheme][i])),
                    }
                    for scheme in report.schemes
                },
            }
        )
    return {"schemes": list(report.schemes), "users": rows}


def _sig(x: float) -> float:
    return float(f"{x:.12g}")
