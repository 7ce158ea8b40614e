"""End-to-end runs: calibrate, search policies, build bands, write outputs.

Every run is a pure function of (region config, data, seed, settings).
Seed streams: fitting uses ``(seed, 0, ...)``, policy search
``(seed, 1, ...)`` and bands ``(seed, 2, ...)``.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import dataio
from .dataio import RegionConfig, StoredFit, TrajectoryRecord
from .estimation import (
    DEFAULT_FACTORS,
    FitResult,
    InitializationSpec,
    ParameterGrid,
    RealDataSeries,
    TestingSchedule,
    default_initial_params,
    fit,
    initialize_states,
)
from .model import ModelParams, ObservedState, PopulationState, simulate_coupled
from .policy import (
    DEFAULT_THETAS,
    DEFAULT_THRESHOLDS,
    PolicyGrid,
    PolicyThresholds,
    extrapolate_testing_probs,
    optimize_policy,
    rollout_policy,
)
from .rng import RngStream
from .sensitivity import NOISE_SCALE, SERIES, BandResult, sensitivity_band


@dataclass(frozen=True)
class Settings:
    """Monte-Carlo sizes and search grids; all overridable from the CLI."""

    k_iters: int = 5
    n_runs: int = 20
    factors: tuple[float, ...] = DEFAULT_FACTORS
    exhaustive_grid: bool = False
    n_replicates: int = 50
    l_values: tuple[float, ...] = DEFAULT_THRESHOLDS
    u1_values: tuple[float, ...] = DEFAULT_THRESHOLDS
    u2_values: tuple[float, ...] = DEFAULT_THRESHOLDS
    theta_values: tuple[float, ...] = DEFAULT_THETAS
    outer: int = 100
    inner: int = 20
    noise_scale: float = NOISE_SCALE

    def policy_grid(self) -> PolicyGrid:
        return PolicyGrid(self.l_values, self.u1_values, self.u2_values, self.theta_values)


ALIASES = {"J": "n_replicates", "O": "outer", "I": "inner", "K": "k_iters"}


def apply_overrides(config: RegionConfig, settings: Settings, overrides: dict):
    """Split ``key -> value`` overrides between the region config and settings."""
    config_names = {f.name for f in fields(RegionConfig)}
    setting_names = {f.name for f in fields(Settings)}
    config_changes, setting_changes = {}, {}
    for key, value in overrides.items():
        name = ALIASES.get(key, key)
        if name in setting_names:
            if isinstance(value, list):
                value = tuple(value)
            setting_changes[name] = value
        elif name in config_names:
            config_changes[name] = value
        else:
            raise dataio.ConfigError(f"unknown override {key!r}")
    if config_changes:
        merged = asdict(config) | config_changes
        config = dataio.region_config_from_dict(merged, "overrides")
    return config, replace(settings, **setting_changes)


def init_spec(config: RegionConfig, active: int, deaths: int, recoveries: int) -> InitializationSpec:
    return InitializationSpec(
        p_severe=config.p_severe,
        inflation=config.inflation,
        initial_active=active,
        initial_deaths=deaths,
        initial_recoveries=recoveries,
    )


# --------------------------------------------------------------------- fit


def run_fit(config: RegionConfig, data: RealDataSeries, settings: Settings, seed: int):
    if len(data) < config.train_days:
        raise dataio.DataValidationError(
            f"need {config.train_days} training days, data has {len(data)}"
        )
    data = data.head(config.train_days)
    spec = InitializationSpec.from_data(data, config.p_severe, config.inflation)
    base = config.model_params(default_initial_params().probabilities)
    grid = ParameterGrid.around(base, settings.factors, exhaustive=settings.exhaustive_grid)
    result = fit(
        data,
        spec,
        base,
        population=config.population,
        training_action=config.training,
        grid=grid,
        k_iters=settings.k_iters,
        n_runs=settings.n_runs,
        rng=RngStream(seed, (0,)),
    )
    return result, spec


# ---------------------------------------------------------------- training


@dataclass
class TrainingRuns:
    pops: list[list[PopulationState]]
    obss: list[list[ObservedState]]

    @property
    def end_pops(self) -> list[PopulationState]:
        return [p[-1] for p in self.pops]

    @property
    def end_obss(self) -> list[ObservedState]:
        return [o[-1] for o in self.obss]


def simulate_training(
    config: RegionConfig,
    params: ModelParams,
    spec: InitializationSpec,
    schedule: TestingSchedule,
    streams: list[RngStream],
) -> TrainingRuns:
    pop0, obs0 = initialize_states(spec, config.population)
    T = config.train_days
    mild, severe = schedule.for_days(2, T)
    actions = [config.training] * (T - 1)
    pops, obss = [], []
    for stream in streams:
        p, o = simulate_coupled(pop0, obs0, params, actions, mild, severe, stream.generator())
        pops.append(p)
        obss.append(o)
    return TrainingRuns(pops, obss)


# ---------------------------------------------------------------- optimize


@dataclass
class OptimizeOutput:
    policy: PolicyThresholds
    reward: float
    rewards: dict
    actions: list[int]
    trajectory: list[TrajectoryRecord]


def _mean_states(states, attrs) -> np.ndarray:
    return np.array([[getattr(s, a) for a in attrs] for s in states], dtype=np.int64)


def _modal(values) -> int:
    counts = Counter(int(v) for v in values)
    return min(counts, key=lambda a: (-counts[a], a))


def run_optimize(
    config: RegionConfig,
    params: ModelParams,
    spec: InitializationSpec,
    schedule: TestingSchedule,
    settings: Settings,
    seed: int,
) -> OptimizeOutput:
    """Grid-search the threshold policy over the test period.

    Replicate ``j`` first runs the training period (stream ``(1, 0, j)``)
    and then the test period (stream ``(1, 1, j)``); both are shared by
    every policy in the grid.
    """
    J = settings.n_replicates
    full = extrapolate_testing_probs(schedule, config.horizon)
    training = simulate_training(config, params, spec, full, RngStream(seed, (1, 0)).children(J))
    cost = config.cost_config()
    test_stream = RngStream(seed, (1, 1))
    search = optimize_policy(
        settings.policy_grid(), params, cost, training.end_pops, training.end_obss, full,
        config.horizon, J, test_stream, prev_action=config.training,
    )
    roll = rollout_policy(
        search.best, params, cost, training.end_pops, training.end_obss, full, config.horizon,
        J, test_stream, prev_action=config.training, keep_states=True,
    )
    T = config.train_days
    actions = [int(config.training)] * T + [_modal(roll.actions[:, k]) for k in range(config.horizon - T)]

    pop_attrs = ("s", "l", "i_m", "i_s", "r", "d")
    obs_attrs = ("i_m_o", "i_s_o", "r_o", "d_o")
    pop_sum = sum(_mean_states(tr, pop_attrs) for tr in training.pops)
    obs_sum = sum(_mean_states(tr, obs_attrs) for tr in training.obss)
    pop_test = sum(_mean_states(tr[1:], pop_attrs) for tr in roll.pops)
    obs_test = sum(_mean_states(tr[1:], obs_attrs) for tr in roll.obss)
    pop_mean = np.vstack([pop_sum, pop_test]) / J
    obs_mean = np.vstack([obs_sum, obs_test]) / J

    records = []
    for k in range(config.horizon):
        day = k + 1
        records.append(
            TrajectoryRecord(
                day, config.date_of(day).isoformat(), actions[k],
                *[float(x) for x in pop_mean[k]], *[float(x) for x in obs_mean[k]],
            )
        )
    return OptimizeOutput(search.best, search.reward, search.rewards, actions, records)


# -------------------------------------------------------------------- band


def run_band(
    config: RegionConfig,
    params: ModelParams,
    spec: InitializationSpec,
    schedule: TestingSchedule,
    policy: PolicyThresholds,
    settings: Settings,
    seed: int,
) -> BandResult:
    full = extrapolate_testing_probs(schedule, config.horizon)
    training = simulate_training(config, params, spec, full, [RngStream(seed, (2, 0))])
    return sensitivity_band(
        params,
        training.end_pops[0],
        training.end_obss[0],
        policy,
        full,
        outer=settings.outer,
        inner=settings.inner,
        horizon=config.horizon,
        rng=RngStream(seed, (2, 1)),
        prev_action=config.training,
        noise_scale=settings.noise_scale,
    )


# ----------------------------------------------------------------- outputs


@dataclass
class RunManifest:
    command: str
    seed: int
    out: str
    config: str | None = None
    data: str | None = None
    fit: str | None = None
    policy: str | None = None
    overrides: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = asdict(self)
        payload["settings"] = {k: list(v) if isinstance(v, tuple) else v for k, v in payload["settings"].items()}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def write_fit_outputs(out_dir, result: FitResult, spec: InitializationSpec) -> None:
    out = Path(out_dir)
    dataio.write_fit(result, spec, out / "fit.csv")
    dataio.write_testing_probs(result.schedule, out / "testing_probs.csv")


def load_fit_outputs(config: RegionConfig, fit_path):
    """Read ``fit.csv`` (or a directory holding it) and its testing probabilities."""
    fit_path = Path(fit_path)
    fit_file = fit_path / "fit.csv" if fit_path.is_dir() else fit_path
    stored: StoredFit = dataio.read_fit(fit_file)
    schedule = dataio.read_testing_probs(fit_file.parent / "testing_probs.csv")
    params = config.model_params(stored.probabilities)
    spec = init_spec(config, stored.initial_active, stored.initial_deaths, stored.initial_recoveries)
    return params, spec, schedule


def write_optimize_outputs(out_dir, result: OptimizeOutput) -> None:
    out = Path(out_dir)
    dataio.write_policy(result.policy, result.reward, out / "policy.csv")
    dataio.write_trajectories(result.trajectory, out / "trajectories.csv")


def write_band_outputs(out_dir, config: RegionConfig, band: BandResult) -> None:
    out = Path(out_dir)
    dates = [config.date_of(int(d)).isoformat() for d in band.days]
    for name in SERIES:
        dataio.write_band(band, name, out / f"band_{name}.csv", dates)


SUMMARY_COLUMNS = (
    "region", "day", "date", "severe", "deaths", "severe_observed", "deaths_observed",
    "cap", "no_lockdown", "l", "u1", "u2", "theta",
)


def write_summary(out_dir, config: RegionConfig, result: OptimizeOutput) -> Path:
    last = result.trajectory[-1]
    no_lockdown = all(a == 0 for a in result.actions[config.train_days :])
    row = (
        config.name, last.day, last.date, last.i_s, last.d, last.i_s_o, last.d_o,
        config.cap, int(no_lockdown), *result.policy.as_tuple(),
    )
    return dataio.write_rows(Path(out_dir) / "summary.csv", SUMMARY_COLUMNS, [row])
