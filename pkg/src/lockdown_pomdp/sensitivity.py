"""Forecast bands from log-odds perturbation of fitted probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import TestingSchedule
from .model import (
    PROBABILITY_FIELDS,
    Action,
    InvalidParamsError,
    ModelParams,
    ObservedState,
    PopulationState,
)
from .policy import CostConfig, PolicyThresholds, rollout_policy
from .rng import as_generator, as_stream

NOISE_SCALE = 1.0 / 3.0
LOWER_Q = 0.05
UPPER_Q = 0.95
SERIES = ("infected", "deaths", "severe")
MAX_RESAMPLES = 10_000


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def perturb_params(p_hat: ModelParams, rng, noise_scale: float = NOISE_SCALE) -> ModelParams:
    """Jitter each transition probability on the log-odds scale.

    ``logit(p)`` gets Gaussian noise with standard deviation
    ``noise_scale * |logit(p)|``. Draws that break the outflow constraints
    are discarded and redrawn.
    """
    gen = as_generator(rng)
    centers = []
    for name in PROBABILITY_FIELDS:
        p = getattr(p_hat, name)
        if not 0.0 < p < 1.0:
            raise ValueError(f"{name}={p}: log-odds undefined at 0 and 1")
        centers.append(logit(p))
    centers = np.array(centers)
    sigmas = noise_scale * np.abs(centers)
    if not np.any(sigmas > 0):
        return p_hat
    originals = p_hat.probabilities
    for _ in range(MAX_RESAMPLES):
        draws = gen.normal(centers, sigmas)
        # a zero-width axis keeps its value exactly (no logit round trip)
        values = [p if s == 0 else logistic(x) for p, s, x in zip(originals, sigmas, draws)]
        try:
            return p_hat.with_probabilities(values)
        except InvalidParamsError:
            continue
    raise RuntimeError(f"no valid perturbation of {p_hat} after {MAX_RESAMPLES} draws")


def nearest_rank_percentile(values: np.ndarray, q: float, axis: int = 0) -> np.ndarray:
    """Nearest-rank percentile: the ``ceil(q * n)``-th smallest value."""
    values = np.sort(np.asarray(values, dtype=float), axis=axis)
    n = values.shape[axis]
    rank = max(int(math.ceil(q * n)), 1)
    return np.take(values, rank - 1, axis=axis)


@dataclass
class BandResult:
    """Per-day bands for ``days`` (test period, first day after training).

    ``curves[name]`` is the ``O x len(days)`` matrix of per-parameter-set
    mean curves the percentiles were taken from.
    """

    days: np.ndarray
    lower: dict[str, np.ndarray]
    upper: dict[str, np.ndarray]
    mean: dict[str, np.ndarray]
    curves: dict[str, np.ndarray]


def _series(pops: list[PopulationState]) -> dict[str, list[int]]:
    return {
        "infected": [p.i_m + p.i_s for p in pops],
        "deaths": [p.d for p in pops],
        "severe": [p.i_s for p in pops],
    }


def sensitivity_band(
    p_hat: ModelParams,
    x_T: PopulationState,
    obs_T: ObservedState,
    thr: PolicyThresholds,
    schedule: TestingSchedule,
    *,
    outer: int = 100,
    inner: int = 20,
    horizon: int,
    rng,
    prev_action: Action | int = Action.FULL,
    noise_scale: float = NOISE_SCALE,
) -> BandResult:
    """5th/95th percentile band of mean forecast curves under perturbation.

    For each of ``outer`` perturbed parameter sets, ``inner`` trajectories
    are run from the end-of-training state under the fixed policy ``thr``
    and averaged per day. Parameter set ``o`` is drawn from stream
    ``(0, o)``; the inner trajectories use streams ``(1, i)`` for every
    set, so the spread between curves comes from the parameters alone.
    """
    if outer < 2 or inner < 1:
        raise ValueError("need outer >= 2 and inner >= 1")
    stream = as_stream(rng)
    no_cost = CostConfig(0.0, 0.0, 0.0, p_hat.cap)
    steps = horizon - x_T.day_index
    totals = {name: np.zeros((outer, steps), dtype=np.int64) for name in SERIES}
    for o in range(outer):
        params = perturb_params(p_hat, stream.child(0, o), noise_scale)
        roll = rollout_policy(
            thr, params, no_cost, x_T, obs_T, schedule, horizon, inner, stream.child(1),
            prev_action=prev_action, keep_states=True,
        )
        for pops in roll.pops:
            for name, values in _series(pops[1:]).items():
                totals[name][o] += values
    curves = {k: v / inner for k, v in totals.items()}
    days = np.arange(x_T.day_index + 1, horizon + 1)
    return BandResult(
        days=days,
        lower={k: nearest_rank_percentile(v, LOWER_Q) for k, v in curves.items()},
        upper={k: nearest_rank_percentile(v, UPPER_Q) for k, v in curves.items()},
        mean={k: v.sum(axis=0) / (outer * inner) for k, v in totals.items()},
        curves=curves,
    )
