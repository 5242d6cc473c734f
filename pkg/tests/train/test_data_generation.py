import numpy as np
import pytest
from dpsnn import ConfigError, NoiseKind
from dpsnn.core.pseudorandom_numbers import prng
from dpsnn.train import SynthSpec
from dpsnn.train.data_generation import (
    TEXTURE_SEGMENT_SECONDS,
    harmonic_clean,
    mix_at_snr,
    noise,
    synth_batch,
)
from icecream import ic  # type: ignore
from numpy.testing import assert_allclose, assert_array_equal, assert_equal

_SPEC = SynthSpec(clip_seconds=0.5)


def _snr_db(_clean: np.ndarray, _noise: np.ndarray) -> float:
    return float(10 * np.log10(np.mean(_clean**2) / np.mean(_noise**2)))


@pytest.mark.parametrize("_snr", (-5.0, 0.0, 7.5, 15.0))
def test_mix_at_snr(_snr: float) -> None:
    _rng = prng(11)
    _clean = harmonic_clean(_SPEC, _rng)
    _noisy, _scaled = mix_at_snr(_clean, noise(NoiseKind.WHITE, _SPEC, _rng), _snr)
    ic(_snr_db(_clean, _scaled))
    assert_allclose(_snr_db(_clean, _scaled), _snr, atol=1e-9)
    assert_allclose(_noisy - _scaled, _clean, atol=1e-12)


def test_harmonic_clean() -> None:
    _x = harmonic_clean(_SPEC, prng(3))
    assert_equal(_x.shape, (_SPEC.clip_samples,))
    assert_allclose(np.sqrt(np.mean(_x**2)), _SPEC.clean_rms, rtol=1e-12)
    # onset and offset ramps start and end at silence
    assert_equal((_x[0], _x[-1]), (0.0, 0.0))
    assert not np.array_equal(_x, harmonic_clean(_SPEC, prng(4)))


@pytest.mark.parametrize("_kind", tuple(NoiseKind))
def test_noise_unit_std(_kind: NoiseKind) -> None:
    _n = noise(_kind, _SPEC, prng(5))
    assert_equal(_n.shape, (_SPEC.clip_samples,))
    assert_allclose(_n.std(), 1.0, rtol=1e-12)
    assert np.isfinite(_n).all()


def test_pink_noise_tilts_toward_low_frequencies() -> None:
    _p = np.abs(np.fft.rfft(noise(NoiseKind.PINK, _SPEC, prng(6)))) ** 2
    _f = np.fft.rfftfreq(_SPEC.clip_samples, 1 / _SPEC.sample_rate)
    _low = _p[(_f > 50) & (_f < 500)].mean()
    _high = _p[(_f > 4000) & (_f < 7500)].mean()
    ic(_low / _high)
    assert _low > 5 * _high


def test_texture_noise_loops() -> None:
    _n = noise(NoiseKind.TEXTURE, _SPEC, prng(7))
    _seg = int(TEXTURE_SEGMENT_SECONDS * _SPEC.sample_rate)
    assert_array_equal(_n[_seg : 2 * _seg], _n[:_seg])


def test_synth_batch_layout_and_snr() -> None:
    _batch = synth_batch(_SPEC, 20240731, 6, stream=(0, 0))
    for _a in (_batch.noisy, _batch.clean, _batch.noise):
        assert_equal(_a.shape, (6, 1, _SPEC.clip_samples))
    assert_allclose(_batch.noisy - _batch.noise, _batch.clean, atol=1e-12)
    assert set(_batch.snr_db) <= set(_SPEC.snr_db)
    assert set(_batch.kinds) <= set(_SPEC.noise_kinds)
    for _c, _n, _s in zip(_batch.clean, _batch.noise, _batch.snr_db, strict=True):
        assert_allclose(_snr_db(_c, _n), _s, atol=1e-9)


def test_synth_batch_reproducible_across_threads() -> None:
    _a = synth_batch(_SPEC, 9, 4, stream=(1,), n_jobs=1)
    _b = synth_batch(_SPEC, 9, 4, stream=(1,), n_jobs=2)
    assert_array_equal(_a.noisy, _b.noisy)
    assert_equal(_a.kinds, _b.kinds)

    # clips are keyed by index, so a larger batch extends a smaller one
    assert_array_equal(synth_batch(_SPEC, 9, 6, stream=(1,)).noisy[:4], _a.noisy)
    assert not np.array_equal(synth_batch(_SPEC, 9, 4, stream=(2,)).noisy, _a.noisy)


def test_synth_spec_validation() -> None:
    with pytest.raises(ConfigError):
        SynthSpec(clip_seconds=0)
    with pytest.raises(ConfigError):
        SynthSpec(snr_db=())
    with pytest.raises(ConfigError):
        SynthSpec(noise_kinds=())
    with pytest.raises(ValueError):
        SynthSpec(noise_kinds=("brown",))
    assert_equal(SynthSpec(snr_db=(5,), noise_kinds=("pink",)).noise_kinds, (NoiseKind.PINK,))
