"""
Seeded random-number generation for parameter initialization and synthetic data.

Uses PCG64DXSM as the bit generator, https://github.com/numpy/numpy/issues/16313.
Independent streams (one per parameter tensor, one per synthesized clip) are
derived from a single integer seed with keyed :class:`numpy.random.SeedSequence`
objects, so draws do not depend on the order or the threads in which streams
are consumed.

"""

from collections.abc import Sequence

from numpy.random import PCG64DXSM, Generator, SeedSequence

from .. import VERSION  # noqa: TID252

__version__ = VERSION


def prng(_s: SeedSequence | int | None = None, /) -> Generator:
    """Adopt the PCG64DXSM bit-generator, the future default in numpy.default_rng().

    Parameters
    ----------
    _s
        SeedSequence or integer seed, for generating random numbers in repeatable
        fashion.

    Returns
    -------
        A numpy random Generator.

    """
    return Generator(PCG64DXSM(_s))


def keyed_seed_seq(_seed: int, /, *_keys: int) -> SeedSequence:
    """SeedSequence for the stream identified by :code:`_keys` under :code:`_seed`

    Equivalent to walking :meth:`SeedSequence.spawn` down the key path, without
    depending on how many children were spawned before.

    Raises
    ------
    ValueError
        If the seed or any key is negative.

    """
    if _seed < 0 or any(_k < 0 for _k in _keys):
        raise ValueError(f"Seed and stream keys must be non-negative, got {_seed}, {_keys}.")
    return SeedSequence(_seed, spawn_key=tuple(_keys), pool_size=8)


def spawn_seed_seqs(
    _seed: int, _count: int, /, *, stream: Sequence[int] = ()
) -> list[SeedSequence]:
    """Return :code:`_count` independent SeedSequences under the given stream

    Parameters
    ----------
    _seed
        Root entropy.
    _count
        Number of SeedSequences to return.
    stream
        Key path of the parent stream, as for :func:`keyed_seed_seq`.

    Returns
    -------
        SeedSequences for non-overlapping streams, suitable for use from
        parallel workers.

    References
    ----------
    *See*, https://numpy.org/doc/stable/reference/random/parallel.html

    """
    return [keyed_seed_seq(_seed, *stream, _i) for _i in range(_count)]
