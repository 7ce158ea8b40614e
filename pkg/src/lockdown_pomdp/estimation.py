"""Calibration of transition and testing probabilities to reported data.

The fit alternates two steps for a fixed number of rounds:

1. given transition probabilities, estimate daily testing probabilities
   by running the hidden process next to a documented process whose
   imports are the reported new cases;
2. given testing probabilities, grid-search the transition probabilities
   that minimise the simulated-vs-reported ratio loss on active cases and
   smoothed daily deaths.

The round with the smallest minimised loss is returned.
"""

from __future__ import annotations

import datetime as dt
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    PROBABILITY_FIELDS,
    Action,
    InvalidParamsError,
    ModelParams,
    ObservedState,
    PopulationState,
    simulate_coupled,
    step_coupled,
    step_observed_anchored,
    step_population,
)
from .rng import RngStream, as_generator, as_stream

DEFAULT_FACTORS = (0.5, 0.75, 1.0, 1.5, 2.0)
SMOOTHING_HALF_WIDTH = 3


class ConfigurationError(ValueError):
    pass


class DataValidationError(ValueError):
    """Reported data violates the case-series schema.

    ``row`` is the 1-based data row (header excluded) where it was found.
    """

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class RealDataSeries:
    """Reported daily series for days 1..T.

    ``active_cases`` is a current (non-cumulative) count;
    ``cumulative_deaths`` and ``cumulative_recoveries`` are running totals.
    """

    new_cases: np.ndarray
    active_cases: np.ndarray
    cumulative_deaths: np.ndarray
    cumulative_recoveries: np.ndarray | None = None
    dates: tuple[dt.date, ...] | None = None

    def __post_init__(self):
        arrays = {
            "new_cases": self.new_cases,
            "active_cases": self.active_cases,
            "cumulative_deaths": self.cumulative_deaths,
        }
        if self.cumulative_recoveries is not None:
            arrays["cumulative_recoveries"] = self.cumulative_recoveries
        n = len(self.new_cases)
        for name, values in arrays.items():
            values = np.asarray(values, dtype=np.int64)
            object.__setattr__(self, name, values)
            if values.ndim != 1 or len(values) != n:
                raise DataValidationError(f"{name} must be 1-D with length {n}")
            bad = np.flatnonzero(values < 0)
            if bad.size:
                raise DataValidationError(f"negative {name}", row=int(bad[0]) + 1)
        drops = np.flatnonzero(np.diff(self.cumulative_deaths) < 0)
        if drops.size:
            raise DataValidationError("cumulative_deaths decreases", row=int(drops[0]) + 2)
        if self.dates is not None:
            dates = tuple(self.dates)
            object.__setattr__(self, "dates", dates)
            if len(dates) != n:
                raise DataValidationError(f"dates must have length {n}")
            for k in range(1, n):
                if dates[k] - dates[k - 1] != dt.timedelta(days=1):
                    raise DataValidationError(
                        f"dates not contiguous ({dates[k - 1]} -> {dates[k]})", row=k + 1
                    )

    def __len__(self) -> int:
        return len(self.new_cases)

    def head(self, days: int) -> "RealDataSeries":
        rec = None if self.cumulative_recoveries is None else self.cumulative_recoveries[:days]
        dates = None if self.dates is None else self.dates[:days]
        return RealDataSeries(
            self.new_cases[:days], self.active_cases[:days], self.cumulative_deaths[:days], rec, dates
        )

    def __eq__(self, other):
        if not isinstance(other, RealDataSeries):
            return NotImplemented
        rec_equal = (self.cumulative_recoveries is None and other.cumulative_recoveries is None) or (
            self.cumulative_recoveries is not None
            and other.cumulative_recoveries is not None
            and np.array_equal(self.cumulative_recoveries, other.cumulative_recoveries)
        )
        return (
            np.array_equal(self.new_cases, other.new_cases)
            and np.array_equal(self.active_cases, other.active_cases)
            and np.array_equal(self.cumulative_deaths, other.cumulative_deaths)
            and rec_equal
            and self.dates == other.dates
        )


@dataclass(frozen=True)
class TestingSchedule:
    """Daily testing probabilities starting at ``first_day`` (default 2).

    Entry ``k`` is the probability used in the transition into day
    ``first_day + k``.
    """

    __test__ = False

    mild: np.ndarray
    severe: np.ndarray
    first_day: int = 2

    def __post_init__(self):
        mild = np.asarray(self.mild, dtype=float)
        severe = np.asarray(self.severe, dtype=float)
        if mild.shape != severe.shape or mild.ndim != 1:
            raise ValueError("mild and severe schedules must be 1-D and equally long")
        for name, values in (("mild", mild), ("severe", severe)):
            if np.any(~((values >= 0.0) & (values <= 1.0))):
                raise ValueError(f"{name} testing probabilities must lie in [0, 1]")
        object.__setattr__(self, "mild", mild)
        object.__setattr__(self, "severe", severe)

    @property
    def last_day(self) -> int:
        return self.first_day + len(self.mild) - 1

    def __len__(self) -> int:
        return len(self.mild)

    def for_days(self, first: int, last: int) -> tuple[np.ndarray, np.ndarray]:
        """Probabilities for the transitions into days ``first..last``."""
        lo, hi = first - self.first_day, last - self.first_day + 1
        if lo < 0 or hi > len(self.mild):
            raise ValueError(
                f"schedule covers days {self.first_day}..{self.last_day}, asked {first}..{last}"
            )
        return self.mild[lo:hi], self.severe[lo:hi]


@dataclass(frozen=True)
class InitializationSpec:
    """How day-1 hidden and documented states are built from reported values."""

    p_severe: float
    inflation: float
    initial_active: int
    initial_deaths: int
    initial_recoveries: int = 0
    latent_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p_severe <= 1.0:
            raise ConfigurationError(f"p_severe must lie in [0, 1], got {self.p_severe}")
        if self.inflation < 1.0:
            raise ConfigurationError(f"inflation must be >= 1, got {self.inflation}")
        if min(self.initial_active, self.initial_deaths, self.initial_recoveries) < 0:
            raise ConfigurationError("initial reported counts must be non-negative")
        if self.latent_fraction < 0:
            raise ConfigurationError("latent_fraction must be non-negative")

    @property
    def p_mild(self) -> float:
        return 1.0 - self.p_severe

    @classmethod
    def from_data(cls, data: RealDataSeries, p_severe: float, inflation: float, **kw):
        rec = 0 if data.cumulative_recoveries is None else int(data.cumulative_recoveries[0])
        return cls(
            p_severe=p_severe,
            inflation=inflation,
            initial_active=int(data.active_cases[0]),
            initial_deaths=int(data.cumulative_deaths[0]),
            initial_recoveries=rec,
            **kw,
        )


@dataclass
class FitResult:
    params: ModelParams
    schedule: TestingSchedule
    losses: list[float]
    k_min: int
    # per-round candidates, kept for diagnostics
    round_params: list[ModelParams] = field(default_factory=list, repr=False)
    round_schedules: list[TestingSchedule] = field(default_factory=list, repr=False)

    @property
    def loss(self) -> float:
        return self.losses[self.k_min - 1]


@dataclass(frozen=True)
class ParameterGrid:
    """Candidate values for each of the five transition probabilities.

    With ``exhaustive=False`` the search is coordinate-wise: each
    probability in turn is set to the best of its candidates while the
    others stay at the current best. ``exhaustive=True`` evaluates the
    full Cartesian product.
    """

    values: dict[str, tuple[float, ...]]
    exhaustive: bool = False

    def __post_init__(self):
        missing = set(PROBABILITY_FIELDS) - set(self.values)
        extra = set(self.values) - set(PROBABILITY_FIELDS)
        if missing or extra:
            raise ValueError(f"grid needs exactly {PROBABILITY_FIELDS}")
        if any(len(v) == 0 for v in self.values.values()):
            raise ValueError("every grid axis needs at least one value")
        object.__setattr__(
            self, "values", {k: tuple(sorted(float(x) for x in v)) for k, v in self.values.items()}
        )

    @classmethod
    def around(cls, params: ModelParams, factors=DEFAULT_FACTORS, exhaustive=False):
        return cls(
            {name: tuple(getattr(params, name) * f for f in factors) for name in PROBABILITY_FIELDS},
            exhaustive=exhaustive,
        )

    @classmethod
    def singleton(cls, params: ModelParams):
        return cls({name: (getattr(params, name),) for name in PROBABILITY_FIELDS})

    def points(self) -> list[tuple[float, ...]]:
        return list(itertools.product(*(self.values[name] for name in PROBABILITY_FIELDS)))


def default_initial_params(**overrides) -> ModelParams:
    """Starting transition probabilities (5-day mean latency, etc.)."""
    base = dict(p_l_im=0.2, p_im_is=0.017, p_im_r=0.024, p_is_r=0.012, p_is_d1=0.009)
    base.update(overrides)
    return ModelParams(**base)


def split_new_cases(t_total: int, p_severe: float) -> tuple[int, int]:
    """Split a daily case count into (mild, severe); severe is rounded half-up."""
    if t_total < 0:
        raise ValueError("new case count must be non-negative")
    severe = round_half_up(p_severe * t_total)
    return t_total - severe, severe


def initialize_states(spec: InitializationSpec, n: int) -> tuple[PopulationState, ObservedState]:
    i_m_o, i_s_o = split_new_cases(spec.initial_active, spec.p_severe)
    obs = ObservedState(i_m_o, i_s_o, spec.initial_recoveries, spec.initial_deaths, day_index=1)
    i_m = round_half_up(spec.inflation * i_m_o)
    i_s = round_half_up(spec.inflation * i_s_o)
    r = round_half_up(spec.inflation * spec.initial_recoveries)
    d = round_half_up(spec.inflation * spec.initial_deaths)
    latent = round_half_up(spec.latent_fraction * i_m)
    s = n - (latent + i_m + i_s + r + d)
    if s < 0:
        raise ConfigurationError(
            f"inflated initial compartments ({n - s}) exceed the population {n}"
        )
    return PopulationState(s, latent, i_m, i_s, r, d, day_index=1), obs


def _action_sequence(training_action, n_steps: int) -> list[int]:
    if isinstance(training_action, (int, np.integer, Action)):
        return [int(training_action)] * n_steps
    actions = [int(a) for a in training_action]
    if len(actions) < n_steps:
        raise ValueError(f"need {n_steps} training actions, got {len(actions)}")
    return actions[:n_steps]


def estimate_testing_probs(
    params: ModelParams,
    data: RealDataSeries,
    spec: InitializationSpec,
    rng,
    *,
    population: int,
    training_action=Action.FULL,
) -> TestingSchedule:
    """Testing probabilities for days 2..T from reported new cases.

    The hidden process and the data-anchored documented process are run
    side by side; the probability for day ``t`` is the day's reported
    imports divided by the undocumented infected at the end of day
    ``t - 1``. An empty or negative undocumented pool with positive imports
    gives probability 1; no imports gives 0.
    """
    gen = as_generator(rng)
    T = len(data)
    actions = _action_sequence(training_action, T - 1)
    pop, obs = initialize_states(spec, population)
    mild = np.empty(T - 1)
    severe = np.empty(T - 1)
    for k, t in enumerate(range(2, T + 1)):
        new_mild, new_severe = split_new_cases(int(data.new_cases[t - 1]), spec.p_severe)
        mild[k] = _testing_ratio(new_mild, pop.i_m - obs.i_m_o)
        severe[k] = _testing_ratio(new_severe, pop.i_s - obs.i_s_o)
        prev_i_s = pop.i_s
        pop = step_population(pop, params, actions[k], gen)
        obs = step_observed_anchored(obs, params, new_mild, new_severe, gen, prev_i_s=prev_i_s)
    return TestingSchedule(mild, severe, first_day=2)


def _testing_ratio(imports: int, pool: int) -> float:
    if imports <= 0:
        return 0.0
    if pool <= 0:
        return 1.0
    return min(imports / pool, 1.0)


def smooth_daily_deaths(cumulative) -> np.ndarray:
    """Centered 7-day average of daily deaths from a cumulative series.

    For 1-based day ``t`` the value is ``(X[t+3] - X[t-4]) / 7``. The
    result covers days ``5..T-3`` only (``T - 7`` values).
    """
    x = np.asarray(cumulative, dtype=float)
    width = 2 * SMOOTHING_HALF_WIDTH + 1
    if x.ndim != 1 or len(x) < width + 1:
        raise ValueError(f"need at least {width + 1} days of cumulative deaths, got {len(x)}")
    return (x[width:] - x[:-width]) / width


def loss_days(T: int) -> range:
    """1-based days entering the loss: those where the smoothing window fits."""
    return range(SMOOTHING_HALF_WIDTH + 2, T - SMOOTHING_HALF_WIDTH + 1)


def trajectory_loss(sim_deaths, sim_active, real_deaths, real_active) -> float:
    """Squared relative error of smoothed deaths and active cases.

    All inputs are day-aligned arrays for days 1..T. A day whose reported
    denominator is zero contributes only the other term.
    """
    sim_smooth = smooth_daily_deaths(sim_deaths)
    real_smooth = smooth_daily_deaths(real_deaths)
    days = loss_days(len(real_deaths))
    sim_active = np.asarray(sim_active, dtype=float)[days.start - 1 : days.stop - 1]
    real_active = np.asarray(real_active, dtype=float)[days.start - 1 : days.stop - 1]
    total = 0.0
    ok = real_smooth > 0
    total += float(np.sum((sim_smooth[ok] / real_smooth[ok] - 1.0) ** 2))
    ok = real_active > 0
    total += float(np.sum((sim_active[ok] / real_active[ok] - 1.0) ** 2))
    return total


def run_losses(
    params: ModelParams,
    spec: InitializationSpec,
    data: RealDataSeries,
    schedule: TestingSchedule,
    streams: list[RngStream],
    *,
    population: int,
    training_action=Action.FULL,
) -> np.ndarray:
    """Per-run losses, one coupled simulation per stream."""
    T = len(data)
    actions = _action_sequence(training_action, T - 1)
    mild, severe = schedule.for_days(2, T)
    pop0, obs0 = initialize_states(spec, population)
    out = np.empty(len(streams))
    for j, stream in enumerate(streams):
        _, obss = simulate_coupled(pop0, obs0, params, actions, mild, severe, stream.generator())
        deaths = [o.d_o for o in obss]
        active = [o.active for o in obss]
        out[j] = trajectory_loss(deaths, active, data.cumulative_deaths, data.active_cases)
    return out


def simulation_loss(
    params: ModelParams,
    spec: InitializationSpec,
    data: RealDataSeries,
    schedule: TestingSchedule,
    n_runs: int,
    rng,
    *,
    population: int,
    training_action=Action.FULL,
) -> float:
    """Monte-Carlo average of :func:`trajectory_loss` over ``n_runs`` runs.

    Run ``j`` uses the child stream ``j`` of ``rng``, so the same ``rng``
    gives common random numbers across parameter sets.
    """
    streams = as_stream(rng).children(n_runs)
    losses = run_losses(
        params, spec, data, schedule, streams, population=population, training_action=training_action
    )
    return float(np.mean(losses))


def _grid_search(
    start: ModelParams,
    grid: ParameterGrid,
    objective,
) -> tuple[ModelParams, float]:
    cache: dict[tuple[float, ...], float] = {}

    def evaluate(values: tuple[float, ...]) -> float:
        if values not in cache:
            try:
                candidate = start.with_probabilities(values)
            except InvalidParamsError:
                cache[values] = math.inf
            else:
                cache[values] = objective(candidate)
        return cache[values]

    if grid.exhaustive:
        best = min(grid.points(), key=lambda v: (evaluate(v), v))
        return start.with_probabilities(best), cache[best]

    current = tuple(float(x) for x in start.probabilities)
    best_loss = evaluate(current)
    for j, name in enumerate(PROBABILITY_FIELDS):
        for value in grid.values[name]:
            candidate = current[:j] + (value,) + current[j + 1 :]
            loss = evaluate(candidate)
            if loss < best_loss:
                current, best_loss = candidate, loss
    return start.with_probabilities(current), best_loss


def fit(
    data: RealDataSeries,
    spec: InitializationSpec,
    base_params: ModelParams,
    *,
    population: int,
    training_action=Action.FULL,
    grid: ParameterGrid | None = None,
    k_iters: int = 5,
    n_runs: int = 20,
    rng=0,
) -> FitResult:
    """Alternate testing-probability estimation and grid search.

    ``base_params`` supplies the starting probabilities together with the
    reproduction numbers, capacity and death multiplier, which are held
    fixed. Round ``k`` estimates the testing schedule from stream
    ``(k,)``; every loss evaluation in the fit shares the run streams under
    ``(K + 1,)`` (common random numbers).
    """
    if k_iters < 1:
        raise ValueError("k_iters must be >= 1")
    if len(data) < 2 * SMOOTHING_HALF_WIDTH + 2:
        raise ValueError("too few days to compute the loss")
    stream = as_stream(rng)
    grid = grid or ParameterGrid.around(base_params)
    loss_streams = stream.child(k_iters + 1).children(n_runs)

    current = base_params
    losses, round_params, round_schedules = [], [], []
    for k in range(1, k_iters + 1):
        schedule = estimate_testing_probs(
            current, data, spec, stream.child(k), population=population, training_action=training_action
        )

        def objective(p, schedule=schedule):
            return float(
                np.mean(
                    run_losses(
                        p, spec, data, schedule, loss_streams,
                        population=population, training_action=training_action,
                    )
                )
            )

        current, loss = _grid_search(current, grid, objective)
        losses.append(loss)
        round_params.append(current)
        round_schedules.append(schedule)

    k_min = int(np.argmin(losses)) + 1
    return FitResult(
        params=round_params[k_min - 1],
        schedule=round_schedules[k_min - 1],
        losses=losses,
        k_min=k_min,
        round_params=round_params,
        round_schedules=round_schedules,
    )


def synthetic_series(
    params: ModelParams,
    spec: InitializationSpec,
    *,
    population: int,
    days: int,
    test_mild: float,
    test_severe: float,
    training_action=Action.FULL,
    rng=0,
    start_date: dt.date | None = None,
) -> RealDataSeries:
    """Reported-style series generated by the coupled model itself.

    New cases on day ``t`` are the documented imports of that day; the
    first day's new cases are set to the second day's.
    """
    gen = as_generator(rng)
    actions = _action_sequence(training_action, days - 1)
    pop, obs = initialize_states(spec, population)
    active, deaths, recov, new = [obs.active], [obs.d_o], [obs.r_o], [0]
    for a in actions:
        prev = obs
        pop, obs = step_coupled(pop, obs, params, a, test_mild, test_severe, gen)
        imports = (obs.active - prev.active) + (obs.r_o - prev.r_o) + (obs.d_o - prev.d_o)
        new.append(imports)
        active.append(obs.active)
        deaths.append(obs.d_o)
        recov.append(obs.r_o)
    if days > 1:
        new[0] = new[1]
    dates = None
    if start_date is not None:
        dates = tuple(start_date + dt.timedelta(days=k) for k in range(days))
    return RealDataSeries(np.array(new), np.array(active), np.array(deaths), np.array(recov), dates)
