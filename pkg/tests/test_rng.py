import numpy as np
import pytest

from lockdown_pomdp.rng import RngStream, as_generator, as_stream, binomial, multinomial2


def draws(stream, n=5):
    return stream.generator().integers(0, 2**31, size=n).tolist()


def test_same_address_same_draws():
    assert draws(RngStream(7, (1, 2))) == draws(RngStream(7, (1, 2)))
    assert draws(RngStream(7).child(1, 2)) == draws(RngStream(7, (1, 2)))


def test_independent_of_usage_order():
    a = RngStream(3)
    first = draws(a.child(5))
    for s in a.children(5):
        draws(s)
    assert draws(a.child(5)) == first


def test_distinct_addresses_differ():
    seen = {tuple(draws(s)) for s in RngStream(1).children(50)}
    assert len(seen) == 50
    assert draws(RngStream(1)) != draws(RngStream(2))


def test_invalid_seed():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(1, (-2,))


def test_coercions():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert draws(as_stream(4)) == draws(RngStream(4))
    with pytest.raises(TypeError):
        as_stream("x")


def test_binomial_edges():
    g = np.random.default_rng(0)
    assert binomial(g, 0, 0.5) == 0
    assert binomial(g, 10, 0.0) == 0
    assert binomial(g, 10, 1.0) == 10


def test_multinomial2_edges_and_mean():
    g = np.random.default_rng(0)
    assert multinomial2(g, 10, 1.0, 0.0) == (10, 0)
    assert multinomial2(g, 10, 0.0, 1.0) == (0, 10)
    out = np.array([multinomial2(g, 100, 0.2, 0.3) for _ in range(20_000)])
    se = np.sqrt(100 * np.array([0.2 * 0.8, 0.3 * 0.7]) / 20_000)
    assert np.all(np.abs(out.mean(axis=0) - [20, 30]) < 3 * se)
    assert np.all(out.sum(axis=1) <= 100)
