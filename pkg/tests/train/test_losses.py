import numpy as np
import pytest
from dpsnn import DimensionError, NumericError
from dpsnn.core import autodiff as ad
from dpsnn.core.autodiff import Tape, Tensor, backward, gradcheck
from dpsnn.core.pseudorandom_numbers import prng
from dpsnn.eval import metrics
from dpsnn.train import LossConfig
from dpsnn.train.losses import loss, si_snr_db
from icecream import ic  # type: ignore
from numpy.testing import assert_allclose, assert_array_equal, assert_equal

_RNG_SEED = 41


def _pair(_batch: int = 3, _t: int = 400) -> tuple[np.ndarray, np.ndarray]:
    _rng = prng(_RNG_SEED)
    _ref = _rng.normal(size=(_batch, 1, _t))
    return _ref + 0.5 * _rng.normal(size=_ref.shape), _ref


def test_si_snr_db_matches_metric() -> None:
    _est, _ref = _pair()
    _got = si_snr_db(Tensor(_est), _ref).value
    _want = [metrics.si_snr(_e, _r).value_db for _e, _r in zip(_est, _ref, strict=True)]
    ic(_got, _want)
    assert_equal(_got.shape, (3, 1))
    assert_allclose(_got.ravel(), _want, rtol=1e-12)


def test_si_snr_db_scale_invariant() -> None:
    _est, _ref = _pair()
    _base = si_snr_db(Tensor(_est), _ref).value
    # power-of-two scaling is exact in floating point
    assert_array_equal(si_snr_db(Tensor(4.0 * _est), _ref).value, _base)
    assert_array_equal(si_snr_db(Tensor(_est), 0.5 * _ref).value, _base)
    assert_allclose(si_snr_db(Tensor(_est + 3.0), _ref).value, _base, rtol=1e-10)


def test_si_snr_db_capped_for_perfect_estimate() -> None:
    _, _ref = _pair()
    assert_array_equal(si_snr_db(Tensor(_ref.copy()), _ref).value, metrics.SI_SNR_CAP_DB)


def test_si_snr_db_errors() -> None:
    _est, _ref = _pair()
    with pytest.raises(NumericError):
        si_snr_db(Tensor(_est), np.ones_like(_ref))
    with pytest.raises(DimensionError):
        si_snr_db(Tensor(_est[..., :-1]), _ref)


def test_si_snr_db_silent_estimate_scores_floor() -> None:
    _est, _ref = _pair()
    _est[1] = 0.25
    _tape = Tape()
    _x = _tape.parameter("est", _est)
    _db = si_snr_db(_x, _ref)
    ic(_db.value)
    assert_equal(_db.value[1, 0], metrics.SI_SNR_FLOOR_DB)
    assert_allclose(
        _db.value[[0, 2], 0],
        [metrics.si_snr(_est[_i], _ref[_i]).value_db for _i in (0, 2)],
        rtol=1e-12,
    )
    _g = backward(_tape, ad.sum_(_db))["est"]
    assert np.isfinite(_g).all()
    assert_array_equal(_g[1], 0.0)
    assert np.abs(_g[0]).sum() > 0


def test_si_snr_db_gradcheck() -> None:
    _est, _ref = _pair(2, 64)
    _wt = np.array([[1.0], [0.5]])
    _res = gradcheck(
        lambda _p: ad.sum_(ad.mul(si_snr_db(_p["est"], _ref), _wt)), {"est": _est}
    )
    ic(_res.rel_error)
    assert _res.max_rel_error < 1e-5


def _acts(_seed: int = 5) -> tuple[Tensor, Tensor]:
    _rng = prng(_seed)
    return (
        Tensor((_rng.uniform(size=(3, 4, 12)) > 0.6).astype(np.float64)),
        Tensor(np.maximum(_rng.normal(size=(3, 4, 12)), 0.0)),
    )


def test_loss_total_is_sum_of_components() -> None:
    _est, _ref = _pair()
    _bn, _ro = _acts()
    _lb = loss(Tensor(_est), _ref, _bn, _ro, LossConfig())
    ic(_lb)
    assert_equal(float(_lb.total.value), _lb.offset + _lb.sisnr + _lb.mse + _lb.l1_bn + _lb.l1_ro)
    assert_equal(_lb.offset, 100.0)
    assert_allclose(_lb.sisnr, -np.mean(si_snr_db(Tensor(_est), _ref).value), rtol=1e-12)
    assert_allclose(_lb.mse, 0.001 * np.mean((_est - _ref) ** 2), rtol=1e-12)
    assert_allclose(_lb.l1_bn, 0.001 * np.mean(_bn.value), rtol=1e-12)
    assert_allclose(_lb.l1_ro, 0.001 * np.mean(_ro.value), rtol=1e-12)


def test_loss_zero_weights_drop_terms() -> None:
    _est, _ref = _pair()
    _bn, _ro = _acts()
    _lb = loss(Tensor(_est), _ref, _bn, _ro, LossConfig(w_mse=0, lambda2=0, lambda3=0))
    assert_equal((_lb.mse, _lb.l1_bn, _lb.l1_ro), (0.0, 0.0, 0.0))


def test_loss_pads_short_output() -> None:
    _est, _ref = _pair()
    _bn, _ro = _acts()
    _short = _est[..., :380]
    _padded = np.concatenate([_short, np.zeros((3, 1, 20))], axis=-1)
    _a = loss(Tensor(_short), _ref, _bn, _ro, LossConfig())
    _b = loss(Tensor(_padded), _ref, _bn, _ro, LossConfig())
    assert_allclose(float(_a.total.value), float(_b.total.value), rtol=1e-14)
    with pytest.raises(DimensionError):
        loss(Tensor(np.concatenate([_est, _est], axis=-1)), _ref, _bn, _ro, LossConfig())


def test_loss_offset_leaves_gradients_unchanged() -> None:
    _est, _ref = _pair()
    _bn, _ro = _acts()
    _grads = []
    for _offset in (0.0, 100.0):
        _tape = Tape()
        _x = _tape.parameter("x", _est)
        _lb = loss(_x, _ref, _bn, _ro, LossConfig(offset=_offset))
        _grads.append(backward(_tape, _lb.total)["x"])
    assert_array_equal(*_grads)
    assert np.abs(_grads[0]).max() > 0
