import numpy as np
import pytest
from dpsnn.core.pseudorandom_numbers import keyed_seed_seq, prng, spawn_seed_seqs
from icecream import ic  # type: ignore
from numpy.random import SeedSequence
from numpy.testing import assert_array_equal


def test_keyed_streams_are_repeatable() -> None:
    _a = prng(keyed_seed_seq(42, 1, 3)).normal(size=8)
    _b = prng(keyed_seed_seq(42, 1, 3)).normal(size=8)
    assert_array_equal(_a, _b)
    assert not np.array_equal(_a, prng(keyed_seed_seq(42, 1, 4)).normal(size=8))
    assert not np.array_equal(_a, prng(keyed_seed_seq(43, 1, 3)).normal(size=8))


def test_spawned_match_keyed() -> None:
    _seqs = spawn_seed_seqs(7, 4, stream=(2,))
    ic(_seqs[0])
    for _i, _s in enumerate(_seqs):
        assert_array_equal(
            prng(_s).random(4), prng(keyed_seed_seq(7, 2, _i)).random(4)
        )
    # keyed children agree with SeedSequence.spawn on the same parent
    _parent = SeedSequence(7, spawn_key=(2,), pool_size=8)
    for _a, _b in zip(_parent.spawn(4), _seqs, strict=True):
        assert_array_equal(prng(_a).random(4), prng(_b).random(4))


def test_negative_seed_rejected() -> None:
    with pytest.raises(ValueError):
        keyed_seed_seq(-1)
    with pytest.raises(ValueError):
        keyed_seed_seq(1, -2)
