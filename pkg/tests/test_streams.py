import numpy as np

from pvgen.streams import STAGES, stream


def test_same_triple_is_identical():
    a = stream(42, 7, "gmm").normal(size=100)
    b = stream(42, 7, "gmm").normal(size=100)
    assert np.array_equal(a, b)


def test_stages_differ():
    draws = {name: stream(1, 0, name).normal(size=8) for name in STAGES}
    values = list(draws.values())
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            assert not np.array_equal(values[i], values[j])


def test_indices_and_seeds_differ():
    assert not np.array_equal(stream(1, 0, "svf").normal(size=8), stream(1, 1, "svf").normal(size=8))
    assert not np.array_equal(stream(1, 0, "svf").normal(size=8), stream(2, 0, "svf").normal(size=8))


def test_streams_independent_of_consumption():
    # draws from one stage never shift another stage's stream
    a = stream(9, 3, "noise")
    a.normal(size=1000)
    fresh = stream(9, 3, "bias").normal(size=16)
    again = stream(9, 3, "bias").normal(size=16)
    assert np.array_equal(fresh, again)


def test_integer_stage_accepted():
    assert np.array_equal(stream(5, 5, 3).normal(size=4), stream(5, 5, "gmm").normal(size=4))
