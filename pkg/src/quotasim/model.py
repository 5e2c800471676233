"""Domain types, random scenario generation and distribution primitives.

Everything downstream (allocators, metrics, simulation) works on the types
defined here.  All randomness flows through numpy Generators derived from a
master seed via `substream`, so any run is bit-reproducible and independent
sub-experiments (slots, rounds) get statistically independent streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

# Absolute tolerance for feasibility assertions (sum and per-user caps).
EPS_FEAS = 1e-9
# Absolute tolerance when comparing fill levels.
LEVEL_TOL = 1e-9
# Costs are floored to keep utilities finite (utilities divide by cost).
COST_FLOOR = 1e-6

# Stream tags so that scenario generation, demand realization and burst
# timing never consume from the same stream.
STREAM_SCENARIO = 0
STREAM_REALIZE = 1
STREAM_BURST = 2
STREAM_ORACLE = 3


class DegenerateInputWarning(UserWarning):
    """Raised-as-warning marker for degenerate but tolerated inputs."""


def substream(seed: int, *path: int) -> np.random.Generator:
    """Derive an independent generator from (seed, path...).

    Same (seed, path) always yields the same stream; distinct paths yield
    independent streams, so concurrent workers can each own one.
    """
    entropy = [int(seed)] + [int(p) for p in path]
    if any(e < 0 for e in entropy):
        raise ValueError("seed and stream path components must be non-negative")
    return np.random.default_rng(np.random.SeedSequence(entropy))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UserProfile:
    """One user's per-slot quadruple plus the stochastic-demand parameters.

    psi     contribution level, application units (e.g. kilobytes), >= 0
    cost    contribution cost, currency units, >= 0
    demand  declared service demand, hours, >= 0
    sigma   standard deviation of the actual demand, hours (0 = deterministic)
    alpha   prescribed exceed-probability in (0, 1); only the
            chance-constrained allocator reads it
    """

    psi: float
    cost: float
    demand: float
    sigma: float = 0.0
    alpha: float = 0.5

    def __post_init__(self) -> None:
        if self.psi < 0:
            raise ValueError(f"psi must be >= 0, got {self.psi}")
        if self.cost < 0:
            raise ValueError(f"cost must be >= 0, got {self.cost}")
        if self.demand < 0:
            raise ValueError(f"demand must be >= 0, got {self.demand}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class AllocationProblem:
    """A population of users plus the slot's total quota and system QoS.

    User order is significant: every allocator returns quota vectors whose
    position i refers to users[i], no matter how it sorts internally.
    """

    users: tuple[UserProfile, ...]
    q_total: float
    qos: float

    def __post_init__(self) -> None:
        if len(self.users) == 0:
            raise ValueError("problem needs at least one user")
        if self.q_total < 0:
            raise ValueError(f"q_total must be >= 0, got {self.q_total}")
        if self.qos <= 0:
            raise ValueError(f"qos must be > 0, got {self.qos}")

    @property
    def n(self) -> int:
        return len(self.users)

    @property
    def psi(self) -> np.ndarray:
        return np.array([u.psi for u in self.users])

    @property
    def cost(self) -> np.ndarray:
        return np.array([u.cost for u in self.users])

    @property
    def demand(self) -> np.ndarray:
        return np.array([u.demand for u in self.users])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([u.sigma for u in self.users])

    @property
    def alpha(self) -> np.ndarray:
        return np.array([u.alpha for u in self.users])

    def with_demands(self, demands: Sequence[float]) -> "AllocationProblem":
        """Copy of the problem with the demand vector replaced."""
        demands = np.asarray(demands, dtype=float)
        if demands.shape != (self.n,):
            raise ValueError("demand vector length mismatch")
        users = tuple(
            replace(u, demand=float(d)) for u, d in zip(self.users, demands)
        )
        return AllocationProblem(users=users, q_total=self.q_total, qos=self.qos)

    @classmethod
    def from_arrays(
        cls,
        psi: Sequence[float],
        cost: Sequence[float],
        demand: Sequence[float],
        q_total: float,
        qos: float,
        sigma: Sequence[float] | None = None,
        alpha: Sequence[float] | None = None,
    ) -> "AllocationProblem":
        psi = np.asarray(psi, dtype=float)
        n = psi.shape[0]
        cost = np.asarray(cost, dtype=float)
        demand = np.asarray(demand, dtype=float)
        sigma = np.zeros(n) if sigma is None else np.asarray(sigma, dtype=float)
        alpha = np.full(n, 0.5) if alpha is None else np.asarray(alpha, dtype=float)
        users = tuple(
            UserProfile(
                psi=float(psi[i]),
                cost=float(cost[i]),
                demand=float(demand[i]),
                sigma=float(sigma[i]),
                alpha=float(alpha[i]),
            )
            for i in range(n)
        )
        return cls(users=users, q_total=float(q_total), qos=float(qos))


@dataclass(frozen=True, eq=False)
class Allocation:
    """Granted quota vector; position i belongs to user i of the problem."""

    quotas: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "quotas", np.asarray(self.quotas, dtype=float))
        if self.quotas.ndim != 1:
            raise ValueError("quotas must be a 1-d vector")
        if (self.quotas < 0).any():
            raise ValueError("quotas must be non-negative")

    @property
    def total(self) -> float:
        return float(self.quotas.sum())


@dataclass(frozen=True, eq=False)
class RealizedDemand:
    """Actual demand realized during consumption, one entry per user."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if (self.values < 0).any():
            raise ValueError("realized demands must be non-negative")


def assert_feasible(
    allocation: Allocation,
    problem: AllocationProblem,
    demand_capped: bool = True,
) -> None:
    """Raise if the allocation violates the feasibility invariants."""
    q = allocation.quotas
    if q.shape != (problem.n,):
        raise ValueError("allocation length does not match problem")
    if q.sum() > problem.q_total + EPS_FEAS:
        raise ValueError("allocation exceeds total quota")
    if demand_capped and (q > problem.demand + EPS_FEAS).any():
        raise ValueError("allocation exceeds a user's declared demand")


# ---------------------------------------------------------------------------
# distribution specs (JSON-serializable, see docs/config-schema.md)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"uniform bounds must satisfy lo < hi, got [{self.lo}, {self.hi})")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, n)


@dataclass(frozen=True)
class TruncNormal:
    mu: float
    sigma: float
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError("truncnormal bounds must satisfy lo < hi")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return truncated_normal_vec(
            rng, np.full(n, self.mu), np.full(n, self.sigma), self.lo, self.hi
        )


@dataclass(frozen=True)
class FixedValue:
    value: float

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.full(n, float(self.value))


@dataclass(frozen=True)
class CostFromContribution:
    """Cost linked to contribution: truncated normal centred on each psi.

    Draws c_i from N_tr(mu_scale*psi_i, sigma_scale*psi_i, lo, hi), the
    "one currency unit per contribution unit on average" model.
    """

    mu_scale: float = 1.0
    sigma_scale: float = 1.0
    lo: float = 0.0
    hi: float = 3.0

    def sample_given(self, rng: np.random.Generator, psi: np.ndarray) -> np.ndarray:
        return truncated_normal_vec(
            rng, self.mu_scale * psi, self.sigma_scale * psi, self.lo, self.hi
        )


DistSpec = Uniform | TruncNormal | FixedValue | CostFromContribution


# --- quota / QoS / alpha policies -----------------------------------------

@dataclass(frozen=True)
class FixedTotal:
    value: float


@dataclass(frozen=True)
class FractionOfDemand:
    """q_total = fraction * sum(declared demands)."""

    fraction: float


@dataclass(frozen=True)
class UniformFractionOfDemand:
    """q_total = U(lo, hi) * sum(declared demands), drawn per slot."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError("fraction bounds must satisfy lo < hi")


@dataclass(frozen=True)
class QosLinkedTotal:
    """q_total = max(1, qos / qos_target) * q_max.

    Implemented exactly as stated; note the factor never drops below 1, so
    q_total >= q_max always.
    """

    qos_target: float
    q_max: float


QTotalPolicy = FixedTotal | FractionOfDemand | UniformFractionOfDemand | QosLinkedTotal


@dataclass(frozen=True)
class FixedQos:
    value: float


@dataclass(frozen=True)
class LinearQos:
    """qos = kappa * sum(contributions)."""

    kappa: float


QosPolicy = FixedQos | LinearQos


@dataclass(frozen=True)
class UniformAlpha:
    alpha0: float


@dataclass(frozen=True)
class ContributionScaledAlpha:
    """alpha_i = alpha0 * psi_i / sum(psi), clamped into (0, 1)."""

    alpha0: float


AlphaPolicy = UniformAlpha | ContributionScaledAlpha

# Clamp bound keeping contribution-scaled alphas inside the open interval.
_ALPHA_CLAMP = 1e-9


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to generate reproducible random scenarios."""

    n_users: int
    seed: int
    q_total_policy: QTotalPolicy = UniformFractionOfDemand(0.5, 1.0)
    qos_policy: QosPolicy = LinearQos(1e-3)
    demand_dist: DistSpec = Uniform(0.0, 1.0)
    contribution_dist: DistSpec = Uniform(0.0, 1.0)
    cost_dist: DistSpec = CostFromContribution()
    relative_sigma: float = 0.25
    alpha_policy: AlphaPolicy = UniformAlpha(0.05)
    rounds: int = 100

    def __post_init__(self) -> None:
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.relative_sigma < 0:
            raise ValueError("relative_sigma must be >= 0")


# ---------------------------------------------------------------------------
# sampling primitives
# ---------------------------------------------------------------------------

def sample_uniform(rng: np.random.Generator, a: float, b: float) -> float:
    """One draw from U(a, b)."""
    if not a < b:
        raise ValueError(f"invalid bounds: need a < b, got a={a}, b={b}")
    return float(rng.uniform(a, b))


# Rejection attempts before switching to the inverse-CDF fallback; rejection
# is exact and cheap whenever the window keeps a few percent of the mass.
_REJECTION_CAP = 400


def sample_truncated_normal(
    rng: np.random.Generator, mu: float, sigma: float, lo: float, hi: float
) -> float:
    """One draw from the normal N(mu, sigma) truncated to [lo, hi].

    sigma == 0 degenerates to clamp(mu, lo, hi).  Sampling rejects parent
    normal draws until one lands in bounds; if the window mass is so small
    that _REJECTION_CAP draws all miss, an exact inverse-CDF transform of a
    single uniform takes over.
    """
    if not lo < hi:
        raise ValueError(f"invalid bounds: need lo < hi, got lo={lo}, hi={hi}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return float(min(max(mu, lo), hi))
    for _ in range(_REJECTION_CAP):
        x = rng.normal(mu, sigma)
        if lo <= x <= hi:
            return float(x)
    return _truncated_normal_inverse_cdf(rng, mu, sigma, lo, hi)


def truncated_normal_vec(
    rng: np.random.Generator,
    mu: np.ndarray,
    sigma: np.ndarray,
    lo: float,
    hi: float,
) -> np.ndarray:
    """Vectorized truncated-normal sampler (per-element mu and sigma)."""
    if not lo < hi:
        raise ValueError(f"invalid bounds: need lo < hi, got lo={lo}, hi={hi}")
    mu, sigma = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float))
    if (sigma < 0).any():
        raise ValueError("sigma must be >= 0")
    out = np.clip(mu, lo, hi)
    idx = np.flatnonzero(sigma > 0)
    pending = np.ones(idx.shape[0], dtype=bool)
    tries = 0
    while pending.any() and tries < _REJECTION_CAP:
        sel = idx[pending]
        draw = rng.normal(mu[sel], sigma[sel])
        ok = (draw >= lo) & (draw <= hi)
        hit = np.flatnonzero(pending)[ok]
        out[idx[hit]] = draw[ok]
        pending[hit] = False
        tries += 1
    for j in np.flatnonzero(pending):
        i = idx[j]
        out[i] = _truncated_normal_inverse_cdf(rng, float(mu[i]), float(sigma[i]), lo, hi)
    return out


def _norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _truncated_normal_inverse_cdf(
    rng: np.random.Generator, mu: float, sigma: float, lo: float, hi: float
) -> float:
    # Exact: map one uniform through the truncated CDF, inverting the parent
    # CDF by bisection.  Only reached when rejection keeps missing.
    p_lo = _norm_cdf((lo - mu) / sigma)
    p_hi = _norm_cdf((hi - mu) / sigma)
    u = rng.uniform(p_lo, p_hi) if p_hi > p_lo else 0.5 * (p_lo + p_hi)
    a, b = (lo - mu) / sigma, (hi - mu) / sigma
    for _ in range(200):
        m = 0.5 * (a + b)
        if _norm_cdf(m) < u:
            a = m
        else:
            b = m
    return float(min(max(mu + sigma * 0.5 * (a + b), lo), hi))


# ---------------------------------------------------------------------------
# scenario generation
# ---------------------------------------------------------------------------

def _sample_dist(spec: DistSpec, rng: np.random.Generator, n: int, psi: np.ndarray | None) -> np.ndarray:
    if isinstance(spec, CostFromContribution):
        if psi is None:
            raise ValueError("contribution-linked distribution needs psi")
        return spec.sample_given(rng, psi)
    return spec.sample(rng, n)


def generate_scenario(config: ScenarioConfig, slot_index: int) -> AllocationProblem:
    """Build the AllocationProblem for one slot of a configured scenario.

    Re-invocation with the same (config, slot_index) is bit-identical; the
    per-slot stream is derived from (seed, STREAM_SCENARIO, slot_index).
    """
    rng = substream(config.seed, STREAM_SCENARIO, slot_index)
    n = config.n_users

    demand = _sample_dist(config.demand_dist, rng, n, None)
    psi = _sample_dist(config.contribution_dist, rng, n, None)
    cost = np.maximum(_sample_dist(config.cost_dist, rng, n, psi), COST_FLOOR)

    qp = config.qos_policy
    if isinstance(qp, FixedQos):
        qos = float(qp.value)
    elif isinstance(qp, LinearQos):
        qos = float(qp.kappa * psi.sum())
    else:
        raise TypeError(f"unknown qos policy: {qp!r}")

    tp = config.q_total_policy
    if isinstance(tp, FixedTotal):
        q_total = float(tp.value)
    elif isinstance(tp, FractionOfDemand):
        q_total = float(tp.fraction * demand.sum())
    elif isinstance(tp, UniformFractionOfDemand):
        q_total = float(sample_uniform(rng, tp.lo, tp.hi) * demand.sum())
    elif isinstance(tp, QosLinkedTotal):
        q_total = float(max(1.0, qos / tp.qos_target) * tp.q_max)
    else:
        raise TypeError(f"unknown q_total policy: {tp!r}")

    ap = config.alpha_policy
    if isinstance(ap, UniformAlpha):
        alpha = np.full(n, float(ap.alpha0))
    elif isinstance(ap, ContributionScaledAlpha):
        total = psi.sum()
        if total > 0:
            alpha = ap.alpha0 * psi / total
        else:
            alpha = np.full(n, ap.alpha0 / n)
        alpha = np.clip(alpha, _ALPHA_CLAMP, 1.0 - _ALPHA_CLAMP)
    else:
        raise TypeError(f"unknown alpha policy: {ap!r}")

    sigma = config.relative_sigma * demand
    return AllocationProblem.from_arrays(
        psi=psi, cost=cost, demand=demand, q_total=q_total, qos=qos,
        sigma=sigma, alpha=alpha,
    )


def realize_demands(
    rng: np.random.Generator, problem: AllocationProblem, relative_sigma: float
) -> RealizedDemand:
    """Draw actual demands around the declarations: N_tr(Q, r*Q, 0, 1)."""
    if relative_sigma < 0:
        raise ValueError("relative_sigma must be >= 0")
    demand = problem.demand
    values = truncated_normal_vec(rng, demand, relative_sigma * demand, 0.0, 1.0)
    return RealizedDemand(values=values)


# ---------------------------------------------------------------------------
# JSON codecs (schemas in docs/config-schema.md)
# ---------------------------------------------------------------------------

_DIST_KINDS = {
    "uniform": Uniform,
    "truncnormal": TruncNormal,
    "fixed": FixedValue,
    "cost_from_contribution": CostFromContribution,
}
_QTOTAL_KINDS = {
    "fixed": FixedTotal,
    "fraction": FractionOfDemand,
    "fraction_uniform": UniformFractionOfDemand,
    "qos_linked": QosLinkedTotal,
}
_QOS_KINDS = {"fixed": FixedQos, "linear": LinearQos}
_ALPHA_KINDS = {"uniform": UniformAlpha, "contribution_scaled": ContributionScaledAlpha}


def _tagged_to_dict(obj, kinds: dict) -> dict:
    for kind, cls in kinds.items():
        if isinstance(obj, cls):
            return {"kind": kind, **{k: getattr(obj, k) for k in cls.__dataclass_fields__}}
    raise TypeError(f"unknown policy/distribution object: {obj!r}")


def _tagged_from_dict(doc: dict, kinds: dict, what: str):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError(f"{what} must be an object with a 'kind' field")
    kind = doc["kind"]
    if kind not in kinds:
        raise ValueError(f"unknown {what} kind: {kind!r}")
    cls = kinds[kind]
    fields = {k: v for k, v in doc.items() if k != "kind"}
    try:
        return cls(**fields)
    except TypeError as exc:
        raise ValueError(f"bad fields for {what} {kind!r}: {exc}") from exc


def scenario_config_to_dict(config: ScenarioConfig) -> dict:
    return {
        "n_users": config.n_users,
        "seed": config.seed,
        "rounds": config.rounds,
        "q_total_policy": _tagged_to_dict(config.q_total_policy, _QTOTAL_KINDS),
        "qos_policy": _tagged_to_dict(config.qos_policy, _QOS_KINDS),
        "demand_dist": _tagged_to_dict(config.demand_dist, _DIST_KINDS),
        "contribution_dist": _tagged_to_dict(config.contribution_dist, _DIST_KINDS),
        "cost_dist": _tagged_to_dict(config.cost_dist, _DIST_KINDS),
        "relative_sigma": config.relative_sigma,
        "alpha_policy": _tagged_to_dict(config.alpha_policy, _ALPHA_KINDS),
    }


def scenario_config_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ValueError("scenario config must be a JSON object")
    required = {"n_users", "seed"}
    missing = required - doc.keys()
    if missing:
        raise ValueError(f"scenario config missing fields: {sorted(missing)}")
    kwargs = {"n_users": int(doc["n_users"]), "seed": int(doc["seed"])}
    if "rounds" in doc:
        kwargs["rounds"] = int(doc["rounds"])
    if "relative_sigma" in doc:
        kwargs["relative_sigma"] = float(doc["relative_sigma"])
    for key, kinds in (
        ("q_total_policy", _QTOTAL_KINDS),
        ("qos_policy", _QOS_KINDS),
        ("demand_dist", _DIST_KINDS),
        ("contribution_dist", _DIST_KINDS),
        ("cost_dist", _DIST_KINDS),
        ("alpha_policy", _ALPHA_KINDS),
    ):
        if key in doc:
            kwargs[key] = _tagged_from_dict(doc[key], kinds, key)
    return ScenarioConfig(**kwargs)


def problem_to_dict(problem: AllocationProblem) -> dict:
    return {
        "users": [
            {
                "psi": u.psi,
                "cost": u.cost,
                "demand": u.demand,
                "sigma": u.sigma,
                "alpha": u.alpha,
            }
            for u in problem.users
        ],
        "q_total": problem.q_total,
        "qos": problem.qos,
    }


def problem_from_dict(doc: dict) -> AllocationProblem:
    if not isinstance(doc, dict):
        raise ValueError("allocation problem must be a JSON object")
    missing = {"users", "q_total", "qos"} - doc.keys()
    if missing:
        raise ValueError(f"allocation problem missing fields: {sorted(missing)}")
    if not isinstance(doc["users"], list) or not doc["users"]:
        raise ValueError("'users' must be a non-empty array")
    users = []
    for i, u in enumerate(doc["users"]):
        if not isinstance(u, dict) or not {"psi", "cost", "demand"} <= u.keys():
            raise ValueError(f"user {i} must carry psi, cost and demand")
        users.append(
            UserProfile(
                psi=float(u["psi"]),
                cost=float(u["cost"]),
                demand=float(u["demand"]),
                sigma=float(u.get("sigma", 0.0)),
                alpha=float(u.get("alpha", 0.5)),
            )
        )
    return AllocationProblem(
        users=tuple(users), q_total=float(doc["q_total"]), qos=float(doc["qos"])
    )


def allocation_to_dict(allocation: Allocation) -> dict:
    return {"quotas": [float(f"{q:.12g}") for q in allocation.quotas]}
