import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lockdown_pomdp.model import (
    Action,
    CouplingError,
    InvalidParamsError,
    ModelParams,
    ObservedState,
    PopulationState,
    effective_r0,
    is_to_d_prob,
    s_to_l_prob,
    step_coupled,
    step_observed,
    step_observed_anchored,
    step_population,
)
from lockdown_pomdp.rng import RngStream


def zero_params(**kw):
    base = dict(p_l_im=0.0, p_im_is=0.0, p_im_r=0.0, p_is_r=0.0, p_is_d1=0.0)
    base.update(kw)
    return ModelParams(**base)


@pytest.fixture
def params():
    return ModelParams(0.2, 0.017, 0.024, 0.012, 0.009, cap=11320)


@pytest.mark.parametrize("action, expected", [(2, 0.8), (1, 1.3), (0, 1.8)])
def test_effective_r0(params, action, expected):
    assert effective_r0(params, action) == pytest.approx(expected, abs=1e-12)


def test_s_to_l_zero_infected(params):
    assert s_to_l_prob(params, Action.NONE, 0, 1000) == 0.0


@pytest.mark.parametrize(
    "i_m, n, expected",
    [
        # 1 - exp(-1.8 * 0.041 * x), evaluated at 30 digits with mpmath
        (1000, 1000, 0.0711425532452723874131354030286),
        (10, 1000, 0.000737727744978853945479715957205),
    ],
)
def test_s_to_l_closed_form(params, i_m, n, expected):
    assert s_to_l_prob(params, Action.NONE, i_m, n) == pytest.approx(expected, rel=1e-13)


def test_s_to_l_monotone(params):
    probs = [s_to_l_prob(params, Action.NONE, k, 10_000) for k in range(0, 10_001, 500)]
    assert all(a < b for a, b in zip(probs, probs[1:]))
    by_action = [s_to_l_prob(params, a, 100, 10_000) for a in (Action.FULL, Action.PARTIAL, Action.NONE)]
    assert by_action[0] < by_action[1] < by_action[2] < 1.0


def test_is_to_d_capacity_rule(params):
    assert is_to_d_prob(params, 100) == 0.009
    assert is_to_d_prob(params, params.cap) == 0.009
    assert is_to_d_prob(params, params.cap + 1) == pytest.approx(0.027)


@pytest.mark.parametrize(
    "kw",
    [
        dict(p_im_is=0.6, p_im_r=0.5),
        dict(p_is_r=0.5, p_is_d1=0.2),  # 0.5 + 3 * 0.2 > 1
        dict(p_l_im=1.2),
        dict(p_l_im=-0.1),
        dict(death_multiplier=0.5),
        dict(r1=1.0, r2=0.5),
    ],
)
def test_invalid_params_rejected(kw):
    base = dict(p_l_im=0.2, p_im_is=0.017, p_im_r=0.024, p_is_r=0.012, p_is_d1=0.009)
    base.update(kw)
    with pytest.raises(InvalidParamsError):
        ModelParams(**base)


def test_step_population_no_flow():
    state = PopulationState(900, 30, 40, 10, 15, 5, day_index=3)
    out = step_population(state, zero_params(), Action.NONE, np.random.default_rng(0))
    assert out.as_tuple() == state.as_tuple()
    assert out.day_index == 4


def test_step_population_certain_latent_progression():
    state = PopulationState(900, 50, 0, 0, 0, 0)
    out = step_population(state, zero_params(p_l_im=1.0), Action.NONE, np.random.default_rng(0))
    # i_m = 0 so nobody new is infected: l becomes Y1 = 0
    assert out.l == 0 and out.i_m == 50 and out.s == 900


def test_step_population_s_to_l_mean(params):
    state = PopulationState(50_000, 0, 5_000, 0, 0, 0)
    p = s_to_l_prob(params, Action.NONE, state.i_m, state.total)
    flows = np.array(
        [
            state.s - step_population(state, params, Action.NONE, s.generator()).s
            for s in RngStream(11).children(10_000)
        ]
    )
    se = math.sqrt(state.s * p * (1 - p) / len(flows))
    assert abs(flows.mean() - state.s * p) < 3 * se


def test_step_observed_no_flow():
    pop = PopulationState(900, 30, 40, 10, 15, 5)
    obs = ObservedState(4, 1, 2, 1)
    out = step_observed(pop, obs, zero_params(), 0.0, 0.0, np.random.default_rng(1))
    assert out.as_tuple() == obs.as_tuple()


def test_step_observed_certain_testing(params):
    pop = PopulationState(900, 30, 40, 10, 15, 5)
    obs = ObservedState(4, 1, 2, 1)
    gen = np.random.default_rng(5)
    out = step_observed(pop, obs, params, 1.0, 0.0, gen)
    internal_out = obs.i_m_o + 36 - out.i_m_o  # 36 = whole undocumented mild pool
    moved = (out.i_s_o - obs.i_s_o) + (out.r_o - obs.r_o) + (out.d_o - obs.d_o)
    # documented mild lose exactly what the other documented compartments gain net
    assert internal_out >= 0
    assert out.i_m_o == obs.i_m_o + 36 - internal_out
    assert moved + (out.i_m_o - obs.i_m_o) == 36


def test_step_observed_testing_mean(params):
    pop = PopulationState(100_000, 0, 8_000, 500, 0, 0)
    obs = ObservedState(1_000, 100, 0, 0)
    pool = pop.i_m - obs.i_m_o
    p = 0.03
    draws = []
    for s in RngStream(21).children(10_000):
        gen = s.generator()
        out = step_observed(pop, obs, zero_params(), p, 0.0, gen)
        draws.append(out.i_m_o - obs.i_m_o)
    se = math.sqrt(pool * p * (1 - p) / len(draws))
    assert abs(np.mean(draws) - pool * p) < 3 * se


def test_step_observed_rejects_broken_coupling(params):
    pop = PopulationState(900, 30, 3, 10, 15, 5)
    obs = ObservedState(4, 1, 2, 1)
    with pytest.raises(CouplingError):
        step_observed(pop, obs, params, 0.1, 0.1, np.random.default_rng(0))


def test_anchored_no_flow():
    obs = ObservedState(40, 7, 3, 2)
    out = step_observed_anchored(obs, zero_params(), 0, 0, np.random.default_rng(0))
    assert out.as_tuple() == obs.as_tuple()


def test_anchored_imports_exact():
    obs = ObservedState(40, 7, 3, 2)
    out = step_observed_anchored(obs, zero_params(), 10, 0, np.random.default_rng(0))
    assert out.i_m_o == 50 and out.i_s_o == 7


@settings(max_examples=60, deadline=None)
@given(
    st.integers(0, 2_000),
    st.integers(0, 500),
    st.lists(st.tuples(st.integers(0, 300), st.integers(0, 50)), min_size=1, max_size=30),
    st.floats(0.0, 0.3),
    st.floats(0.0, 0.1),
    st.integers(0, 2**32),
)
def test_anchored_deaths_never_decrease(i_m_o, i_s_o, imports, p_is_r, p_is_d1, seed):
    params = zero_params(p_im_is=0.05, p_im_r=0.1, p_is_r=p_is_r, p_is_d1=p_is_d1)
    gen = np.random.default_rng(seed)
    obs = ObservedState(i_m_o, i_s_o, 0, 0)
    for mild, severe in imports:
        nxt = step_observed_anchored(obs, params, mild, severe, gen)
        assert nxt.d_o >= obs.d_o and nxt.r_o >= obs.r_o
        obs = nxt


@settings(max_examples=80, deadline=None)
@given(
    st.tuples(*(st.integers(0, 5_000) for _ in range(6))),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.sampled_from([0, 1, 2]),
    st.integers(0, 2**32),
)
def test_coupled_step_invariants(counts, frac_obs, pm, ps, split, action, seed):
    if sum(counts) == 0:
        counts = (1,) + counts[1:]
    pop = PopulationState(*counts)
    obs = ObservedState(
        int(frac_obs * pop.i_m), int(frac_obs * pop.i_s), int(frac_obs * pop.r), int(frac_obs * pop.d)
    )
    params = ModelParams(0.3, 0.4 * split, 0.5 * (1 - split), 0.2, 0.1, cap=pop.i_s // 2)
    gen = np.random.default_rng(seed)
    for _ in range(5):
        new_pop, new_obs = step_coupled(pop, obs, params, action, pm, ps, gen)
        assert new_pop.total == pop.total
        assert new_pop.r >= pop.r and new_pop.d >= pop.d and new_obs.d_o >= obs.d_o
        assert new_obs.i_m_o <= new_pop.i_m and new_obs.i_s_o <= new_pop.i_s
        assert new_obs.r_o <= new_pop.r and new_obs.d_o <= new_pop.d
        pop, obs = new_pop, new_obs


def test_streams_are_deterministic(params):
    pop = PopulationState(10_000, 100, 500, 50, 0, 0)
    obs = ObservedState(50, 5, 0, 0)

    def run(stream):
        gen = stream.generator()
        p, o = pop, obs
        out = []
        for _ in range(30):
            p, o = step_coupled(p, o, params, Action.PARTIAL, 0.05, 0.3, gen)
            out.append(p.as_tuple() + o.as_tuple())
        return out

    assert run(RngStream(42, (3,))) == run(RngStream(42, (3,)))
    assert run(RngStream(42, (3,))) != run(RngStream(42, (4,)))


def test_dwell_time_in_mild_compartment(params):
    # each day a mild case leaves with probability p_im_is + p_im_r
    q = params.p_im_is + params.p_im_r
    gen = RngStream(3).generator()
    trials = 200_000
    dwell = gen.geometric(q, size=trials)
    assert dwell.mean() == pytest.approx(1.0 / q, rel=0.02)

    # the same through the kernel: a cohort of mild cases with no inflow
    state = PopulationState(0, 0, 100_000, 0, 0, 0)
    gen = RngStream(4).generator()
    person_days = 0
    while state.i_m:
        person_days += state.i_m
        state = step_population(state, params, Action.FULL, gen)
    assert person_days / 100_000 == pytest.approx(1.0 / q, rel=0.02)
