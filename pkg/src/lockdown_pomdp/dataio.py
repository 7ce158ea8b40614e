"""Reading case data and region configs; writing fits, trajectories and bands.

All outputs are CSV with a fixed column order. Integers are written as
integers and floats with 6 significant digits, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .estimation import (
    DataValidationError,
    FitResult,
    InitializationSpec,
    RealDataSeries,
    TestingSchedule,
)
from .model import PROBABILITY_FIELDS, Action, ModelParams
from .policy import CostConfig, PolicyThresholds
from .sensitivity import SERIES, BandResult

CASE_COLUMNS = ("date", "new_cases", "active_cases", "cumulative_deaths", "cumulative_recoveries")
REQUIRED_CASE_COLUMNS = CASE_COLUMNS[:4]
TRAJECTORY_COLUMNS = (
    "day", "date", "action", "s", "l", "i_m", "i_s", "r", "d", "i_m_o", "i_s_o", "r_o", "d_o",
)
BAND_COLUMNS = ("day", "date", "lower", "mean", "upper")
POLICY_COLUMNS = ("l", "u1", "u2", "theta", "expected_reward")
BUNDLED_REGIONS = ("AZ", "CA", "FL", "MI", "NJ", "TX")


class ConfigError(ValueError):
    pass


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if float(value).is_integer() and abs(value) < 1e15:
            return str(int(value))
        # shortest text that reads back to the same float
        return repr(float(value))
    return str(value)


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        return header, [row for row in reader if row]


def _number(text: str):
    value = float(text)
    return int(value) if value.is_integer() and "." not in text and "e" not in text.lower() else value


# ---------------------------------------------------------------- case data


def load_case_csv(path) -> RealDataSeries:
    """Read ``date,new_cases,active_cases,cumulative_deaths[,cumulative_recoveries]``."""
    header, rows = _read_rows(path)
    missing = [c for c in REQUIRED_CASE_COLUMNS if c not in header]
    if missing:
        raise DataValidationError(f"{path}: missing columns {missing}")
    unknown = [c for c in header if c not in CASE_COLUMNS]
    if unknown:
        raise DataValidationError(f"{path}: unknown columns {unknown}")
    idx = {c: header.index(c) for c in header}
    has_rec = "cumulative_recoveries" in idx
    dates, cols = [], {c: [] for c in CASE_COLUMNS[1:]}
    for k, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataValidationError(f"expected {len(header)} fields, got {len(row)}", row=k)
        try:
            day = dt.date.fromisoformat(row[idx["date"]].strip())
        except ValueError:
            raise DataValidationError(f"bad ISO date {row[idx['date']]!r}", row=k) from None
        if dates and day - dates[-1] != dt.timedelta(days=1):
            raise DataValidationError(f"dates not contiguous ({dates[-1]} -> {day})", row=k)
        dates.append(day)
        for c in CASE_COLUMNS[1:]:
            if c not in idx:
                continue
            text = row[idx[c]].strip()
            try:
                value = int(text)
            except ValueError:
                raise DataValidationError(f"{c} is not an integer: {text!r}", row=k) from None
            if value < 0:
                raise DataValidationError(f"negative {c}", row=k)
            cols[c].append(value)
    for k in range(1, len(rows)):
        if cols["cumulative_deaths"][k] < cols["cumulative_deaths"][k - 1]:
            raise DataValidationError("cumulative_deaths decreases", row=k + 1)
    return RealDataSeries(
        new_cases=np.array(cols["new_cases"], dtype=np.int64),
        active_cases=np.array(cols["active_cases"], dtype=np.int64),
        cumulative_deaths=np.array(cols["cumulative_deaths"], dtype=np.int64),
        cumulative_recoveries=np.array(cols["cumulative_recoveries"], dtype=np.int64) if has_rec else None,
        dates=tuple(dates),
    )


def write_case_csv(series: RealDataSeries, path) -> Path:
    if series.dates is None:
        raise ValueError("case CSV needs dates")
    has_rec = series.cumulative_recoveries is not None
    header = CASE_COLUMNS if has_rec else REQUIRED_CASE_COLUMNS
    rows = []
    for k, day in enumerate(series.dates):
        row = [day.isoformat(), series.new_cases[k], series.active_cases[k], series.cumulative_deaths[k]]
        if has_rec:
            row.append(series.cumulative_recoveries[k])
        rows.append(row)
    return write_rows(path, header, rows)


# ------------------------------------------------------------ region config


@dataclass(frozen=True)
class RegionConfig:
    """Everything region-specific needed for a full analysis.

    Costs are whole dollars: ``c_e`` per day of full lockdown, ``c_l`` per
    death. ``train_days`` of reported data are followed by a forecast up to
    day ``horizon``.
    """

    name: str
    population: int
    cap: int
    c_e: int
    c_l: int
    rho: float
    p_severe: float
    inflation: float
    r0_base: float
    r1: float
    r2: float
    death_multiplier: float
    training_action: int
    train_days: int
    horizon: int
    start_date: str

    def __post_init__(self):
        if self.population <= 0:
            raise ConfigError("population must be positive")
        if not self.train_days < self.horizon:
            raise ConfigError(f"train_days ({self.train_days}) must be < horizon ({self.horizon})")
        if self.training_action not in (0, 1, 2):
            raise ConfigError(f"training_action must be 0, 1 or 2, got {self.training_action}")
        try:
            dt.date.fromisoformat(self.start_date)
        except ValueError:
            raise ConfigError(f"start_date {self.start_date!r} is not an ISO date") from None
        try:
            self.cost_config()
            InitializationSpec(self.p_severe, self.inflation, 0, 0)
            self.model_params((0.0, 0.0, 0.0, 0.0, 0.0))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def training(self) -> Action:
        return Action(self.training_action)

    @property
    def start(self) -> dt.date:
        return dt.date.fromisoformat(self.start_date)

    def date_of(self, day: int) -> dt.date:
        return self.start + dt.timedelta(days=day - 1)

    def cost_config(self) -> CostConfig:
        return CostConfig(c_e=self.c_e, c_l=self.c_l, rho=self.rho, cap=self.cap)

    def model_params(self, probabilities) -> ModelParams:
        return ModelParams(
            *probabilities,
            r0_base=self.r0_base,
            r1=self.r1,
            r2=self.r2,
            death_multiplier=self.death_multiplier,
            cap=self.cap,
        )


def region_config_from_dict(data: dict, source: str = "<dict>") -> RegionConfig:
    names = [f.name for f in fields(RegionConfig)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}")
    missing = [n for n in names if n not in data]
    if missing:
        raise ConfigError(f"{source}: missing keys {missing}")
    typed = {}
    for f in fields(RegionConfig):
        value = data[f.name]
        kind = f.type if isinstance(f.type, str) else f.type.__name__
        try:
            if kind == "int":
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError(f"{value} is not an integer")
                typed[f.name] = int(value)
            elif kind == "float":
                typed[f.name] = float(value)
            else:
                typed[f.name] = str(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: bad value for {f.name}: {exc}") from None
    return RegionConfig(**typed)


def load_region_config(path) -> RegionConfig:
    """Load a JSON region file, or a bundled region by code (``"MI"``)."""
    if str(path).upper() in BUNDLED_REGIONS and not Path(path).exists():
        return bundled_region(str(path).upper())
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return region_config_from_dict(data, str(path))


def bundled_region(code: str) -> RegionConfig:
    text = resources.files("lockdown_pomdp").joinpath(f"data/regions/{code.upper()}.json").read_text()
    return region_config_from_dict(json.loads(text), f"bundled {code}")


def write_region_config(config: RegionConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(asdict(config), indent=2) + "\n")
    return path


# ----------------------------------------------------------------- fit output


def write_fit(result: FitResult, spec: InitializationSpec, path) -> Path:
    """``field,value`` rows: the five probabilities, selection, losses, day-1 inputs."""
    rows = [(name, getattr(result.params, name)) for name in PROBABILITY_FIELDS]
    rows.append(("k_min", result.k_min))
    rows += [(f"loss_{k}", loss) for k, loss in enumerate(result.losses, start=1)]
    rows += [
        ("initial_active", spec.initial_active),
        ("initial_deaths", spec.initial_deaths),
        ("initial_recoveries", spec.initial_recoveries),
    ]
    return write_rows(path, ("field", "value"), rows)


@dataclass
class StoredFit:
    probabilities: tuple[float, ...]
    k_min: int
    losses: list[float]
    initial_active: int
    initial_deaths: int
    initial_recoveries: int


def read_fit(path) -> StoredFit:
    header, rows = _read_rows(path)
    if header != ["field", "value"]:
        raise DataValidationError(f"{path}: expected header field,value")
    values = {r[0]: r[1] for r in rows}
    try:
        losses = []
        k = 1
        while f"loss_{k}" in values:
            losses.append(float(values[f"loss_{k}"]))
            k += 1
        return StoredFit(
            probabilities=tuple(float(values[n]) for n in PROBABILITY_FIELDS),
            k_min=int(values["k_min"]),
            losses=losses,
            initial_active=int(values["initial_active"]),
            initial_deaths=int(values["initial_deaths"]),
            initial_recoveries=int(values["initial_recoveries"]),
        )
    except KeyError as exc:
        raise DataValidationError(f"{path}: missing field {exc}") from None


def write_testing_probs(schedule: TestingSchedule, path) -> Path:
    rows = [
        (schedule.first_day + k, m, s) for k, (m, s) in enumerate(zip(schedule.mild, schedule.severe))
    ]
    return write_rows(path, ("day", "test_mild", "test_severe"), rows)


def read_testing_probs(path) -> TestingSchedule:
    header, rows = _read_rows(path)
    if header != ["day", "test_mild", "test_severe"]:
        raise DataValidationError(f"{path}: expected header day,test_mild,test_severe")
    if not rows:
        raise DataValidationError(f"{path}: no rows")
    return TestingSchedule(
        [float(r[1]) for r in rows], [float(r[2]) for r in rows], first_day=int(rows[0][0])
    )


# ------------------------------------------------------- policy, trajectories


def write_policy(thr: PolicyThresholds, reward: float, path) -> Path:
    return write_rows(path, POLICY_COLUMNS, [(*thr.as_tuple(), reward)])


def read_policy(path) -> tuple[PolicyThresholds, float]:
    header, rows = _read_rows(path)
    if header != list(POLICY_COLUMNS) or len(rows) != 1:
        raise DataValidationError(f"{path}: expected one row with {POLICY_COLUMNS}")
    values = [float(x) for x in rows[0]]
    return PolicyThresholds(*values[:4]), values[4]


@dataclass(frozen=True)
class TrajectoryRecord:
    day: int
    date: str
    action: int
    s: float
    l: float
    i_m: float
    i_s: float
    r: float
    d: float
    i_m_o: float
    i_s_o: float
    r_o: float
    d_o: float

    def as_row(self):
        return tuple(getattr(self, c) for c in TRAJECTORY_COLUMNS)


def write_trajectories(records, path) -> Path:
    return write_rows(path, TRAJECTORY_COLUMNS, (r.as_row() for r in records))


def read_trajectories(path) -> list[TrajectoryRecord]:
    header, rows = _read_rows(path)
    if header != list(TRAJECTORY_COLUMNS):
        raise DataValidationError(f"{path}: unexpected trajectory header")
    out = []
    for row in rows:
        values = [int(row[0]), row[1], int(row[2])] + [_number(x) for x in row[3:]]
        out.append(TrajectoryRecord(*values))
    return out


def write_band(band: BandResult, series: str, path, dates=None) -> Path:
    if series not in SERIES:
        raise ValueError(f"unknown series {series!r}; choose from {SERIES}")
    rows = []
    for k, day in enumerate(band.days):
        date = "" if dates is None else dates[k]
        rows.append((int(day), date, band.lower[series][k], band.mean[series][k], band.upper[series][k]))
    return write_rows(path, BAND_COLUMNS, rows)


def read_band(path) -> dict[str, np.ndarray]:
    header, rows = _read_rows(path)
    if header != list(BAND_COLUMNS):
        raise DataValidationError(f"{path}: unexpected band header")
    return {
        "day": np.array([int(r[0]) for r in rows]),
        "lower": np.array([float(r[2]) for r in rows]),
        "mean": np.array([float(r[3]) for r in rows]),
        "upper": np.array([float(r[4]) for r in rows]),
    }
