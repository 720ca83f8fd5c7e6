import numpy as np
import pytest

from metastab.seeding import child_seed, rng_for, seed_sequence


def test_streams_are_reproducible():
    a = rng_for(0, "states", 3).normal(size=5)
    b = rng_for(0, "states", 3).normal(size=5)
    assert np.array_equal(a, b)


def test_streams_do_not_depend_on_draw_order():
    first = rng_for(1, "x").normal(size=3)
    rng_for(1, "y").normal(size=1000)
    assert np.array_equal(rng_for(1, "x").normal(size=3), first)


def test_distinct_paths_give_distinct_streams():
    draws = {tuple(rng_for(m, *p).integers(0, 2**32, 4)) for m in (0, 1) for p in [("a",), ("b",), ("a", 0), ("a", 1)]}
    assert len(draws) == 8


def test_child_seed_range():
    s = child_seed(7, "hd", 2)
    assert 0 <= s < 2**63
    assert s == child_seed(7, "hd", 2)
    assert seed_sequence(7, "hd").spawn_key == seed_sequence(7, "hd").spawn_key


def test_negative_labels_rejected():
    with pytest.raises(ValueError):
        seed_sequence(0, -1)
