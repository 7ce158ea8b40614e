"""Threshold lockdown policies, daily reward, and policy grid search.

A policy ``(l, u1, u2, theta)`` looks at the documented per-capita signal
``w = (theta * mild + (1 - theta) * severe) / N`` every 14 days of the
test period and picks a lockdown level that then holds for 14 days:

* ``w >= u2``        full lockdown
* ``u1 <= w < u2``   partial lockdown
* ``w <= l``         no lockdown
* otherwise          keep the previous level
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .estimation import TestingSchedule
from .model import (
    Action,
    ModelParams,
    ObservedState,
    PopulationState,
    step_coupled,
)
from .rng import as_stream

DECISION_PERIOD = 14
US_DAILY_LOCKDOWN_COST = 20_000_000_000
VALUE_OF_LIFE = 4_700_000
CAPACITY_FRACTION = 0.40
TREND_T_STAT = 2.0

DEFAULT_THRESHOLDS = (1e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2)
DEFAULT_THETAS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True, order=True)
class PolicyThresholds:
    l: float
    u1: float
    u2: float
    theta: float

    def __post_init__(self):
        if not 0.0 < self.l < self.u1 < self.u2 < 1.0:
            raise ValueError(f"need 0 < l < u1 < u2 < 1, got {self.l}, {self.u1}, {self.u2}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.l, self.u1, self.u2, self.theta)


@dataclass(frozen=True)
class CostConfig:
    """Daily lockdown cost ``c_e``, cost per death ``c_l`` (both dollars).

    Each severe case above ``cap`` costs ``rho * c_l`` per day.
    """

    c_e: float
    c_l: float
    rho: float = 0.25
    cap: int = 10**9

    def __post_init__(self):
        if self.c_e < 0 or self.c_l < 0 or self.rho < 0:
            raise ValueError("costs must be non-negative")
        if self.rho >= 1:
            raise ValueError(f"rho must be < 1, got {self.rho}")
        if self.cap < 0:
            raise ValueError("cap must be non-negative")

    def scaled(self, factor: float) -> "CostConfig":
        return CostConfig(self.c_e * factor, self.c_l * factor, self.rho, self.cap)


@dataclass(frozen=True)
class PolicyGrid:
    l_values: tuple[float, ...] = DEFAULT_THRESHOLDS
    u1_values: tuple[float, ...] = DEFAULT_THRESHOLDS
    u2_values: tuple[float, ...] = DEFAULT_THRESHOLDS
    theta_values: tuple[float, ...] = DEFAULT_THETAS
    extra: tuple[PolicyThresholds, ...] = field(default=())

    def members(self) -> list[PolicyThresholds]:
        """Every ordered combination, sorted lexicographically, without duplicates."""
        out = set(self.extra)
        for l, u1, u2, th in itertools.product(
            self.l_values, self.u1_values, self.u2_values, self.theta_values
        ):
            if 0.0 < l < u1 < u2 < 1.0 and 0.0 <= th <= 1.0:
                out.add(PolicyThresholds(float(l), float(u1), float(u2), float(th)))
        return sorted(out)

    @classmethod
    def of(cls, policies) -> "PolicyGrid":
        return cls((), (), (), (), extra=tuple(policies))


def policy_signal(obs: ObservedState, theta: float, n: int) -> float:
    if n <= 0:
        raise ValueError("population size must be positive")
    return (theta * obs.i_m_o + (1.0 - theta) * obs.i_s_o) / n


def policy_action(t: int, w: float, prev_action: Action | int, thr: PolicyThresholds) -> Action:
    """Lockdown level for policy-clock day ``t`` (decisions when ``t % 14 == 0``)."""
    if t % DECISION_PERIOD != 0:
        return Action(prev_action)
    if w >= thr.u2:
        return Action.FULL
    if w >= thr.u1:
        return Action.PARTIAL
    if w <= thr.l:
        return Action.NONE
    return Action(prev_action)


def immediate_reward(
    prev: PopulationState, next_state: PopulationState, action: Action | int, cost: CostConfig
) -> float:
    """Negative daily cost: deaths, lockdown level, and over-capacity severe cases."""
    new_deaths = next_state.d - prev.d
    overflow = max(next_state.i_s - cost.cap, 0)
    return -(
        cost.c_l * new_deaths
        + (int(action) / 2.0) * cost.c_e
        + cost.rho * cost.c_l * overflow
    )


def state_cost_config(
    gdp_fraction: float,
    *,
    us_daily_cost: float = US_DAILY_LOCKDOWN_COST,
    c_l: float = VALUE_OF_LIFE,
    rho: float = 0.25,
    beds: int,
    raw_beds: bool = False,
) -> CostConfig:
    """Scale the national lockdown cost by a state's GDP share.

    ``beds`` is the covid bed capacity; pass ``raw_beds=True`` to supply
    total hospital beds, of which 40% are counted.
    """
    if gdp_fraction < 0:
        raise ValueError("gdp_fraction must be non-negative")
    cap = int(round(CAPACITY_FRACTION * beds)) if raw_beds else int(beds)
    return CostConfig(c_e=gdp_fraction * us_daily_cost, c_l=c_l, rho=rho, cap=cap)


def _has_trend(values: np.ndarray) -> bool:
    if len(values) < 3:
        return False
    days = np.arange(len(values), dtype=float)
    if np.ptp(values) == 0:
        return False
    fit = stats.linregress(days, values)
    if fit.stderr == 0:
        return fit.slope != 0
    return abs(fit.slope / fit.stderr) > TREND_T_STAT


def extrapolate_testing_probs(schedule: TestingSchedule, horizon: int) -> TestingSchedule:
    """Extend a schedule to cover days up to ``horizon``.

    Each series continues at its last value when its least-squares slope
    is significant (|t| > 2), and at its mean otherwise.
    """
    if len(schedule) == 0:
        raise ValueError("cannot extrapolate an empty schedule")
    extra = horizon - schedule.last_day
    if extra <= 0:
        return schedule
    series = []
    for values in (schedule.mild, schedule.severe):
        if np.ptp(values) == 0 or _has_trend(values):
            fill = float(values[-1])
        else:
            fill = float(np.mean(values))
        fill = min(max(fill, 0.0), 1.0)
        series.append(np.concatenate([values, np.full(extra, fill)]))
    return TestingSchedule(series[0], series[1], first_day=schedule.first_day)


@dataclass
class PolicyRollout:
    """Per-replicate outcomes of one policy over the test period.

    ``actions[j, k]`` is the level in force for the transition out of day
    ``start_day + k``; ``pops``/``obss`` hold the states for days
    ``start_day .. horizon``.
    """

    rewards: np.ndarray
    actions: np.ndarray
    pops: list[list[PopulationState]]
    obss: list[list[ObservedState]]
    start_day: int

    @property
    def mean_reward(self) -> float:
        return float(np.mean(self.rewards))


def _per_replicate(value, n):
    if isinstance(value, (PopulationState, ObservedState)):
        return [value] * n
    value = list(value)
    if len(value) != n:
        raise ValueError(f"need {n} start states, got {len(value)}")
    return value


def rollout_policy(
    thr: PolicyThresholds,
    params: ModelParams,
    cost: CostConfig,
    start,
    obs_start,
    schedule: TestingSchedule,
    horizon: int,
    n_replicates: int,
    rng,
    *,
    prev_action: Action | int = Action.FULL,
    keep_states: bool = False,
) -> PolicyRollout:
    """Simulate ``n_replicates`` test-period trajectories under ``thr``.

    ``start``/``obs_start`` are the end-of-training states, either one
    state shared by all replicates or one per replicate. Replicate ``j``
    draws from child stream ``j`` of ``rng``.
    """
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    streams = as_stream(rng).children(n_replicates)
    starts = _per_replicate(start, n_replicates)
    obs_starts = _per_replicate(obs_start, n_replicates)
    T = starts[0].day_index
    if horizon <= T:
        raise ValueError(f"horizon {horizon} must exceed the training length {T}")
    steps = horizon - T
    mild, severe = schedule.for_days(T + 1, horizon)

    rewards = np.zeros(n_replicates)
    actions = np.zeros((n_replicates, steps), dtype=np.int8)
    all_pops, all_obss = [], []
    for j, stream in enumerate(streams):
        gen = stream.generator()
        pop, obs = starts[j], obs_starts[j]
        n = pop.total
        a = Action(prev_action)
        total = 0.0
        pops, obss = [pop], [obs]
        for k in range(steps):
            a = policy_action(k, policy_signal(obs, thr.theta, n), a, thr)
            nxt, obs = step_coupled(pop, obs, params, a, mild[k], severe[k], gen)
            total += immediate_reward(pop, nxt, a, cost)
            actions[j, k] = a
            pop = nxt
            if keep_states:
                pops.append(pop)
                obss.append(obs)
        rewards[j] = total
        if keep_states:
            all_pops.append(pops)
            all_obss.append(obss)
    return PolicyRollout(rewards, actions, all_pops, all_obss, start_day=T)


def evaluate_policy(
    thr: PolicyThresholds,
    params: ModelParams,
    cost: CostConfig,
    start,
    obs_start,
    schedule: TestingSchedule,
    horizon: int,
    n_replicates: int,
    rng,
    *,
    prev_action: Action | int = Action.FULL,
) -> float:
    """Mean total test-period reward of a policy (days T .. horizon - 1)."""
    return rollout_policy(
        thr, params, cost, start, obs_start, schedule, horizon, n_replicates, rng,
        prev_action=prev_action,
    ).mean_reward


@dataclass
class PolicySearchResult:
    best: PolicyThresholds
    reward: float
    rewards: dict[PolicyThresholds, float]


def optimize_policy(
    grid: PolicyGrid,
    params: ModelParams,
    cost: CostConfig,
    start,
    obs_start,
    schedule: TestingSchedule,
    horizon: int,
    n_replicates: int,
    rng,
    *,
    prev_action: Action | int = Action.FULL,
) -> PolicySearchResult:
    """Exhaustive search of ``grid``; every member sees the same random streams.

    Ties go to the lexicographically smallest ``(l, u1, u2, theta)``.
    """
    members = grid.members()
    if not members:
        raise ValueError("policy grid is empty")
    stream = as_stream(rng)
    rewards = {
        thr: evaluate_policy(
            thr, params, cost, start, obs_start, schedule, horizon, n_replicates, stream,
            prev_action=prev_action,
        )
        for thr in members
    }
    best = members[0]
    for thr in members[1:]:
        if rewards[thr] > rewards[best]:
            best = thr
    return PolicySearchResult(best, rewards[best], rewards)
