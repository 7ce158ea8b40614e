"""Compartment states, model parameters and one-day transition kernels.

Counts are end-of-day totals. The action decided at the end of day ``t``
drives the transition from day ``t`` to day ``t + 1``.

Hidden (population) compartments: S, L, I_m, I_s, R, D.
Observed compartments: I_m, I_s, R, D (documented cases only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import IntEnum

import numpy as np

from .rng import binomial, multinomial2

PROBABILITY_FIELDS = ("p_l_im", "p_im_is", "p_im_r", "p_is_r", "p_is_d1")


class InvalidParamsError(ValueError):
    """Raised when a parameter set would give an invalid multinomial."""


class CouplingError(ValueError):
    """Raised when an observed compartment exceeds its hidden counterpart."""


class Action(IntEnum):
    NONE = 0
    PARTIAL = 1
    FULL = 2


@dataclass(frozen=True)
class PopulationState:
    s: int
    l: int
    i_m: int
    i_s: int
    r: int
    d: int
    day_index: int = 1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"negative count {f.name}={getattr(self, f.name)}")

    @property
    def total(self) -> int:
        return self.s + self.l + self.i_m + self.i_s + self.r + self.d

    @property
    def infected(self) -> int:
        return self.i_m + self.i_s

    def as_tuple(self) -> tuple[int, int, int, int, int, int]:
        return (self.s, self.l, self.i_m, self.i_s, self.r, self.d)


@dataclass(frozen=True)
class ObservedState:
    i_m_o: int
    i_s_o: int
    r_o: int
    d_o: int
    day_index: int = 1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"negative count {f.name}={getattr(self, f.name)}")

    @property
    def active(self) -> int:
        return self.i_m_o + self.i_s_o

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.i_m_o, self.i_s_o, self.r_o, self.d_o)


@dataclass(frozen=True)
class ModelParams:
    """Transition probabilities plus the lockdown-dependent reproduction numbers.

    ``r0_base`` is the reproduction number under full lockdown; partial and
    no lockdown add ``r1`` and ``r2``. When more than ``cap`` people are
    severely ill, the daily death probability becomes
    ``death_multiplier * p_is_d1``.
    """

    p_l_im: float
    p_im_is: float
    p_im_r: float
    p_is_r: float
    p_is_d1: float
    r0_base: float = 0.8
    r1: float = 0.5
    r2: float = 1.0
    death_multiplier: float = 3.0
    cap: int = 10**9

    def __post_init__(self):
        for name in PROBABILITY_FIELDS:
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0) or math.isnan(p):
                raise InvalidParamsError(f"{name}={p} is not a probability")
        if self.p_im_is + self.p_im_r > 1.0:
            raise InvalidParamsError(
                f"p_im_is + p_im_r = {self.p_im_is + self.p_im_r} exceeds 1"
            )
        if self.death_multiplier < 1.0:
            raise InvalidParamsError(f"death_multiplier must be >= 1, got {self.death_multiplier}")
        if self.p_is_r + self.death_multiplier * self.p_is_d1 > 1.0:
            raise InvalidParamsError(
                "p_is_r + death_multiplier * p_is_d1 exceeds 1 "
                f"({self.p_is_r} + {self.death_multiplier} * {self.p_is_d1})"
            )
        if self.r0_base < 0 or not (0.0 < self.r1 < self.r2):
            raise InvalidParamsError(
                f"need r0_base >= 0 and 0 < r1 < r2, got {self.r0_base}, {self.r1}, {self.r2}"
            )
        if self.cap < 0:
            raise InvalidParamsError(f"cap must be non-negative, got {self.cap}")

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PROBABILITY_FIELDS])

    def with_probabilities(self, values) -> "ModelParams":
        return replace(self, **{name: float(v) for name, v in zip(PROBABILITY_FIELDS, values)})

    def is_valid_with(self, **changes) -> bool:
        try:
            replace(self, **changes)
        except InvalidParamsError:
            return False
        return True


def effective_r0(params: ModelParams, action: Action | int) -> float:
    action = Action(action)
    if action == Action.FULL:
        return params.r0_base
    if action == Action.PARTIAL:
        return params.r0_base + params.r1
    return params.r0_base + params.r2


def s_to_l_prob(params: ModelParams, action: Action | int, i_m: int, n: int) -> float:
    """Daily infection probability of a susceptible.

    ``1 - exp(-R * (p_im_is + p_im_r) * i_m / n)``, where ``R`` is the
    reproduction number for ``action`` and ``1 / (p_im_is + p_im_r)`` is
    the mean number of days spent mildly infected.
    """
    if n <= 0:
        raise ValueError("population size must be positive")
    if not 0 <= i_m <= n:
        raise ValueError(f"mild infected count {i_m} outside [0, {n}]")
    rate = effective_r0(params, action) * (params.p_im_is + params.p_im_r)
    return -math.expm1(-rate * i_m / n)


def is_to_d_prob(params: ModelParams, prev_i_s: int) -> float:
    if prev_i_s <= params.cap:
        return params.p_is_d1
    return params.death_multiplier * params.p_is_d1


def step_population(
    state: PopulationState,
    params: ModelParams,
    action: Action | int,
    rng: np.random.Generator,
) -> PopulationState:
    n = state.total
    p_sl = s_to_l_prob(params, action, state.i_m, n)
    y1 = binomial(rng, state.s, p_sl)
    y2 = binomial(rng, state.l, params.p_l_im)
    y3, y4 = multinomial2(rng, state.i_m, params.p_im_is, params.p_im_r)
    y5, y6 = multinomial2(rng, state.i_s, params.p_is_r, is_to_d_prob(params, state.i_s))
    return PopulationState(
        s=state.s - y1,
        l=state.l + y1 - y2,
        i_m=state.i_m + y2 - y3 - y4,
        i_s=state.i_s + y3 - y5 - y6,
        r=state.r + y4 + y5,
        d=state.d + y6,
        day_index=state.day_index + 1,
    )


def _unobserved_pools(pop: PopulationState, obs: ObservedState) -> tuple[int, int]:
    pool_m = pop.i_m - obs.i_m_o
    pool_s = pop.i_s - obs.i_s_o
    if pool_m < 0 or pool_s < 0 or pop.r < obs.r_o or pop.d < obs.d_o:
        raise CouplingError(
            f"observed state {obs.as_tuple()} exceeds population "
            f"{(pop.i_m, pop.i_s, pop.r, pop.d)} on day {pop.day_index}"
        )
    return pool_m, pool_s


def step_observed(
    pop_prev: PopulationState,
    obs: ObservedState,
    params: ModelParams,
    test_mild: float,
    test_severe: float,
    rng: np.random.Generator,
) -> ObservedState:
    """Advance the documented process by one day.

    Documented cases move between compartments like the hidden process;
    new documented cases arrive by testing the undocumented infected of
    ``pop_prev``.
    """
    pool_m, pool_s = _unobserved_pools(pop_prev, obs)
    p_d = is_to_d_prob(params, pop_prev.i_s)
    z_m_s, z_m_r = multinomial2(rng, obs.i_m_o, params.p_im_is, params.p_im_r)
    z_s_r, z_s_d = multinomial2(rng, obs.i_s_o, params.p_is_r, p_d)
    t_m = binomial(rng, pool_m, test_mild)
    t_s = binomial(rng, pool_s, test_severe)
    return ObservedState(
        i_m_o=obs.i_m_o - z_m_s - z_m_r + t_m,
        i_s_o=obs.i_s_o - z_s_r - z_s_d + z_m_s + t_s,
        r_o=obs.r_o + z_m_r + z_s_r,
        d_o=obs.d_o + z_s_d,
        day_index=obs.day_index + 1,
    )


def step_observed_anchored(
    obs: ObservedState,
    params: ModelParams,
    new_mild: int,
    new_severe: int,
    rng: np.random.Generator,
    prev_i_s: int | None = None,
) -> ObservedState:
    """Advance the documented process with real new-case counts as imports.

    ``prev_i_s`` is the hidden severe count used for the capacity rule of
    the death probability; it defaults to the documented severe count.
    """
    if new_mild < 0 or new_severe < 0:
        raise ValueError("new case counts must be non-negative")
    p_d = is_to_d_prob(params, obs.i_s_o if prev_i_s is None else prev_i_s)
    y1, y2 = multinomial2(rng, obs.i_m_o, params.p_im_is, params.p_im_r)
    y3, y4 = multinomial2(rng, obs.i_s_o, params.p_is_r, p_d)
    return ObservedState(
        i_m_o=obs.i_m_o - y1 - y2 + int(new_mild),
        i_s_o=obs.i_s_o + y1 - y3 - y4 + int(new_severe),
        r_o=obs.r_o + y2 + y3,
        d_o=obs.d_o + y4,
        day_index=obs.day_index + 1,
    )


def step_coupled(
    pop: PopulationState,
    obs: ObservedState,
    params: ModelParams,
    action: Action | int,
    test_mild: float,
    test_severe: float,
    rng: np.random.Generator,
) -> tuple[PopulationState, ObservedState]:
    """Advance hidden and documented processes together.

    Documented people are a subset of the hidden compartments, so their
    outflows are drawn first and the undocumented remainder is drawn
    separately; hidden outflows are the sum, which keeps the hidden
    marginals exactly those of :func:`step_population`. Testing draws
    ``Bin(undocumented, p)`` as in :func:`step_observed`, capped at the
    number of undocumented people actually present in the compartment the
    next day so documented counts never exceed hidden ones.
    """
    pool_m, pool_s = _unobserved_pools(pop, obs)
    n = pop.total
    p_sl = s_to_l_prob(params, action, pop.i_m, n)
    p_d = is_to_d_prob(params, pop.i_s)

    y1 = binomial(rng, pop.s, p_sl)
    y2 = binomial(rng, pop.l, params.p_l_im)
    z_m_s, z_m_r = multinomial2(rng, obs.i_m_o, params.p_im_is, params.p_im_r)
    z_s_r, z_s_d = multinomial2(rng, obs.i_s_o, params.p_is_r, p_d)
    w_m_s, w_m_r = multinomial2(rng, pool_m, params.p_im_is, params.p_im_r)
    w_s_r, w_s_d = multinomial2(rng, pool_s, params.p_is_r, p_d)
    t_m = binomial(rng, pool_m, test_mild)
    t_s = binomial(rng, pool_s, test_severe)

    y3, y4 = z_m_s + w_m_s, z_m_r + w_m_r
    y5, y6 = z_s_r + w_s_r, z_s_d + w_s_d
    t_m = min(t_m, pool_m - w_m_s - w_m_r + y2)
    t_s = min(t_s, pool_s - w_s_r - w_s_d + w_m_s)

    new_pop = PopulationState(
        s=pop.s - y1,
        l=pop.l + y1 - y2,
        i_m=pop.i_m + y2 - y3 - y4,
        i_s=pop.i_s + y3 - y5 - y6,
        r=pop.r + y4 + y5,
        d=pop.d + y6,
        day_index=pop.day_index + 1,
    )
    new_obs = ObservedState(
        i_m_o=obs.i_m_o - z_m_s - z_m_r + t_m,
        i_s_o=obs.i_s_o - z_s_r - z_s_d + z_m_s + t_s,
        r_o=obs.r_o + z_m_r + z_s_r,
        d_o=obs.d_o + z_s_d,
        day_index=obs.day_index + 1,
    )
    return new_pop, new_obs


def simulate_coupled(
    pop: PopulationState,
    obs: ObservedState,
    params: ModelParams,
    actions,
    test_mild,
    test_severe,
    rng: np.random.Generator,
) -> tuple[list[PopulationState], list[ObservedState]]:
    """Run ``len(actions)`` coupled steps; returns states including the start.

    ``actions[k]``, ``test_mild[k]`` and ``test_severe[k]`` drive the
    ``k``-th transition.
    """
    pops, obss = [pop], [obs]
    for a, pm, ps in zip(actions, test_mild, test_severe):
        pop, obs = step_coupled(pop, obs, params, a, pm, ps, rng)
        pops.append(pop)
        obss.append(obs)
    return pops, obss
