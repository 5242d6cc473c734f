import numpy as np
import pytest
from dpsnn import ConfigError, DimensionError, GateMode, SurrogateKind
from dpsnn.core import autodiff as ad
from dpsnn.core.autodiff import Tape, Tensor, backward, gradcheck
from dpsnn.core.neurons import NeuronState, alif_step, surrogate_grad
from dpsnn.core.pseudorandom_numbers import prng
from dpsnn.model import SuppressionGate
from dpsnn.model.layers import (
    decode,
    encode,
    mask_head,
    readout_forward,
    scnn_forward,
    srnn_forward,
    suppress_binarize,
    suppress_pass_above,
)
from icecream import ic  # type: ignore
from numpy.testing import assert_allclose, assert_array_equal, assert_equal

_RNG_SEED = 2_024_09


def _gate(_mode: GateMode, _thr: float) -> SuppressionGate:
    return SuppressionGate(_mode, np.array([_thr]))


def test_encode_shapes_and_oracle() -> None:
    _rng = prng(_RNG_SEED)
    _kernel = _rng.normal(size=(3, 1, 80))
    assert_array_equal(
        encode(Tensor(np.zeros((1, 1, 200))), Tensor(_kernel), stride=40).value, 0.0
    )
    _out = encode(Tensor(_rng.normal(size=(1, 1, 16000))), Tensor(_kernel), stride=40)
    assert_equal(_out.shape, (1, 3, 399))

    _wave = _rng.normal(size=(2, 1, 100))
    _feats = encode(Tensor(_wave), Tensor(_kernel), stride=10).value
    for _t in (0, 1, 2):
        _frame = _wave[:, 0, 10 * _t : 10 * _t + 80]
        assert_allclose(
            _feats[..., _t], np.maximum(_frame @ _kernel[:, 0, :].T, 0.0), rtol=1e-12
        )
    assert (_feats >= 0).all()


def test_encode_rejects_short_input() -> None:
    with pytest.raises(DimensionError):
        encode(Tensor(np.zeros((1, 1, 79))), Tensor(np.ones((2, 1, 80))), stride=40)
    with pytest.raises(DimensionError):
        encode(Tensor(np.zeros((1, 2, 100))), Tensor(np.ones((2, 1, 80))), stride=40)


def test_suppress_binarize() -> None:
    _eps = 1e-9
    _out = suppress_binarize(
        Tensor(np.array([0.3 - _eps, 0.3 + _eps])), _gate(GateMode.BINARIZE, 0.3)
    )
    assert_array_equal(_out.value, [0.0, 1.0])

    _x = prng(_RNG_SEED).normal(size=(2, 5, 7))
    _counts = []
    for _thr in np.linspace(-2, 2, 9):
        _b = suppress_binarize(Tensor(_x), _gate(GateMode.BINARIZE, _thr)).value
        assert np.isin(_b, (0.0, 1.0)).all()
        _counts.append(_b.sum())
    assert (np.diff(_counts) <= 0).all()

    # idempotent on binary maps for thresholds in (0, 1)
    _g = _gate(GateMode.BINARIZE, 0.4)
    _once = suppress_binarize(Tensor(_x), _g)
    assert_array_equal(suppress_binarize(_once, _g).value, _once.value)


def test_suppress_binarize_gradient() -> None:
    _x = prng(_RNG_SEED).normal(size=(1, 2, 3))
    _tape = Tape()
    _px = _tape.parameter("x", _x)
    _pt = _tape.parameter("threshold", np.array([0.2]))
    _out = suppress_binarize(_px, SuppressionGate(GateMode.BINARIZE, _pt))
    _grads = backward(_tape, ad.sum_(_out))
    _expected = surrogate_grad(SurrogateKind.ARCTAN, _x - 0.2)
    assert_allclose(_grads["x"], _expected, rtol=1e-14)
    assert_allclose(_grads["threshold"], [-_expected.sum()], rtol=1e-12)


def test_suppress_pass_above() -> None:
    _out = suppress_pass_above(
        Tensor(np.array([0.1, 0.9])), _gate(GateMode.PASS_ABOVE, 0.5)
    )
    assert_array_equal(_out.value, [0.0, 0.9])

    _x = prng(_RNG_SEED).normal(size=(2, 4, 6))
    assert_array_equal(
        suppress_pass_above(Tensor(_x), _gate(GateMode.PASS_ABOVE, -1e9)).value, _x
    )
    _l1 = [
        np.abs(suppress_pass_above(Tensor(_x), _gate(GateMode.PASS_ABOVE, _t)).value).sum()
        for _t in np.linspace(-3, 3, 13)
    ]
    assert (np.diff(_l1) <= 0).all()


def test_gate_mode_mismatch() -> None:
    with pytest.raises(ConfigError):
        suppress_binarize(Tensor(np.zeros(2)), _gate(GateMode.PASS_ABOVE, 0.0))
    with pytest.raises(ConfigError):
        suppress_pass_above(Tensor(np.zeros(2)), _gate(GateMode.BINARIZE, 0.0))
    with pytest.raises(ValueError):
        _gate(GateMode.BINARIZE, np.nan)


def _scnn_inputs(
    _b: int = 2, _bch: int = 3, _h: int = 6, _k: int = 4, _t: int = 10
) -> tuple[np.ndarray, np.ndarray, NeuronState, np.ndarray]:
    _rng = prng(_RNG_SEED)
    _x = (_rng.random((_b, _bch, _t)) < 0.5).astype(float)
    _kernel = _rng.normal(scale=1.5, size=(_h, 1, _k))
    return _x, _kernel, NeuronState.zeros((_b, _h)), np.zeros((_b, _bch, _k - 1))


def test_scnn_zero_input() -> None:
    _x, _kernel, _st, _ctx = _scnn_inputs()
    _spikes, _, _ = scnn_forward(
        Tensor(np.zeros_like(_x)),
        Tensor(_kernel),
        Tensor(np.zeros(6)),
        Tensor(np.zeros(1)),
        _st,
        _ctx,
    )
    assert_array_equal(_spikes.value, 0.0)


def test_scnn_causality_and_context() -> None:
    _x, _kernel, _st, _ctx = _scnn_inputs()
    _args = (Tensor(_kernel), Tensor(np.zeros(6)), Tensor(np.zeros(1)), _st, _ctx)
    _spikes, _, _next = scnn_forward(Tensor(_x), *_args)
    assert np.isin(_spikes.value, (0.0, 1.0)).all()
    assert _spikes.value.sum() > 0
    assert_equal(_spikes.shape, (2, 6, 10))
    assert_array_equal(_next, _x[..., -3:])

    _x2 = _x.copy()
    _x2[..., 6:] = 1.0 - _x2[..., 6:]
    _spikes2, _, _ = scnn_forward(Tensor(_x2), *_args)
    assert_array_equal(_spikes2.value[..., :6], _spikes.value[..., :6])


def test_scnn_context_window() -> None:
    _x, _kernel, _st, _ctx = _scnn_inputs()
    # a large PLIF parameter makes the neurons memoryless: u_t ~ I_t
    _args = (Tensor(_kernel), Tensor(np.zeros(6)), Tensor(np.array([40.0])), _st, _ctx)
    _full, _, _ = scnn_forward(Tensor(_x), *_args)
    for _t in (3, 7, 9):
        _win = np.zeros_like(_x)
        _win[..., _t - 3 : _t + 1] = _x[..., _t - 3 : _t + 1]
        _part, _, _ = scnn_forward(Tensor(_win), *_args)
        assert_array_equal(_part.value[..., _t], _full.value[..., _t])


def test_scnn_rejects_bad_shapes() -> None:
    _x, _kernel, _st, _ctx = _scnn_inputs()
    with pytest.raises(DimensionError):
        scnn_forward(
            Tensor(_x),
            Tensor(np.zeros((7, 1, 4))),
            Tensor(np.zeros(7)),
            Tensor(np.zeros(1)),
            NeuronState.zeros((2, 7)),
            _ctx,
        )
    with pytest.raises(DimensionError):
        scnn_forward(
            Tensor(_x),
            Tensor(_kernel),
            Tensor(np.zeros(6)),
            Tensor(np.zeros(1)),
            _st,
            np.zeros((2, 3, 2)),
        )


def test_srnn_zero_input_and_feedforward() -> None:
    _rng = prng(_RNG_SEED)
    _tau_m = Tensor(np.full(3, 20.0))
    _tau_adp = Tensor(np.full(3, 200.0))
    _spikes, _ = srnn_forward(
        Tensor(np.zeros((2, 5, 12))),
        Tensor(_rng.normal(size=(3, 5))),
        Tensor(_rng.normal(size=(3, 3))),
        _tau_m,
        _tau_adp,
        NeuronState.zeros((2, 3)),
        b0=0.1,
        beta=1.8,
    )
    assert_array_equal(_spikes.value, 0.0)

    _x = (_rng.random((2, 5, 12)) < 0.6).astype(float)
    _w_in = _rng.normal(scale=3.0, size=(3, 5))
    _spikes, _ = srnn_forward(
        Tensor(_x),
        Tensor(_w_in),
        Tensor(np.zeros((3, 3))),
        _tau_m,
        _tau_adp,
        NeuronState.zeros((2, 3)),
        b0=0.1,
        beta=1.8,
    )
    _st = NeuronState.zeros((2, 3))
    for _t in range(12):
        _s, _st = alif_step(
            _st, Tensor(_x[..., _t] @ _w_in.T), _tau_m, _tau_adp, b0=0.1, beta=1.8
        )
        assert_array_equal(_spikes.value[..., _t], _s.value)


def test_srnn_hand_trace() -> None:
    _w_in = np.array([[2.0, -0.5], [0.5, 1.5]])
    _w_rec = np.array([[0.0, -1.0], [0.8, 0.0]])
    _tau_m, _tau_adp = np.array([5.0, 3.0]), np.array([50.0, 20.0])
    _x = np.array([[[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]])
    _b0, _beta = 0.1, 1.8

    _alpha, _rho = np.exp(-1 / _tau_m), np.exp(-1 / _tau_adp)
    _u, _eta, _s = np.zeros(2), np.zeros(2), np.zeros(2)
    _expected = []
    for _t in range(3):
        _i = _w_in @ _x[0, :, _t] + _w_rec @ _s
        _eta = _rho * _eta + (1 - _rho) * _s
        _theta = _b0 + _beta * _eta
        _u = _alpha * _u + (1 - _alpha) * _i - _s * _theta
        _s = (_u - _theta >= 0).astype(float)
        _expected.append(_s)

    _spikes, _st = srnn_forward(
        Tensor(_x),
        Tensor(_w_in),
        Tensor(_w_rec),
        Tensor(_tau_m),
        Tensor(_tau_adp),
        NeuronState.zeros((1, 2)),
        b0=_b0,
        beta=_beta,
    )
    ic(_spikes.value, _expected)
    assert_array_equal(_spikes.value[0], np.stack(_expected, axis=-1))
    assert_allclose(_st.u.value[0], _u, rtol=1e-12)
    assert_allclose(_st.eta.value[0], _eta, rtol=1e-12)


def test_readout_dynamics() -> None:
    _rng = prng(_RNG_SEED)
    _w = _rng.normal(size=(3, 4))
    _c = (_rng.random(4) < 0.5).astype(float)
    _x = np.broadcast_to(_c[None, :, None], (1, 4, 80)).copy()

    _out, _u = readout_forward(
        Tensor(_x), Tensor(_w), Tensor(np.array([2.0])), Tensor(np.zeros((1, 3)))
    )
    assert_allclose(_out.value[0, :, -1], _w @ _c, rtol=1e-12, atol=1e-14)
    assert_array_equal(_u.value, _out.value[..., -1])

    _x = _rng.normal(size=(2, 4, 5))
    _out, _ = readout_forward(
        Tensor(_x), Tensor(_w), Tensor(np.array([1.0])), Tensor(_rng.normal(size=(2, 3)))
    )
    assert_allclose(_out.value, np.einsum("oi,bit->bot", _w, _x), rtol=1e-12)


def test_readout_gradients() -> None:
    _rng = prng(_RNG_SEED)
    _x = (_rng.random((2, 4, 6)) < 0.5).astype(float)
    _u0 = _rng.normal(size=(2, 3))
    _wt = _rng.normal(size=(2, 3, 6))
    _res = gradcheck(
        lambda _p: ad.sum_(
            ad.mul(readout_forward(Tensor(_x), _p["w"], _p["tau"], Tensor(_u0))[0], _wt)
        ),
        {"w": _rng.normal(size=(3, 4)), "tau": np.array([2.5])},
    )
    ic(_res.rel_error)
    assert _res.max_rel_error < 1e-5


def test_mask_head() -> None:
    _rng = prng(_RNG_SEED)
    _kernel = _rng.normal(size=(5, 2, 1))
    assert_array_equal(
        mask_head(Tensor(np.zeros((1, 2, 3))), Tensor(_kernel), Tensor(np.zeros(5))).value,
        0.5,
    )
    _big = mask_head(
        Tensor(50 * _rng.normal(size=(2, 2, 4))), Tensor(_kernel), Tensor(np.zeros(5))
    ).value
    assert ((_big >= 0) & (_big <= 1)).all()

    _x = _rng.normal(size=(2, 3, 4))
    _k = _rng.normal(size=(5, 3, 1))
    _bias = _rng.normal(size=5)
    _expected = np.zeros((2, 5, 4))
    for _b in range(2):
        for _o in range(5):
            for _t in range(4):
                _z = _bias[_o] + sum(_k[_o, _c, 0] * _x[_b, _c, _t] for _c in range(3))
                _expected[_b, _o, _t] = 1 / (1 + np.exp(-_z))
    _out = mask_head(Tensor(_x), Tensor(_k), Tensor(_bias)).value
    assert_allclose(_out, _expected, rtol=1e-12)
    assert ((_out > 0) & (_out < 1)).all()


def test_decode() -> None:
    _rng = prng(_RNG_SEED)
    _kernel = _rng.normal(size=(4, 1, 16))
    _out = decode(Tensor(np.zeros((1, 4, 6))), Tensor(_kernel), stride=8)
    assert_array_equal(_out.value, 0.0)
    assert_equal(_out.shape, (1, 1, 56))

    _feats = np.zeros((1, 4, 6))
    _feats[0, :, 2] = _rng.normal(size=4)
    _out = decode(Tensor(_feats), Tensor(_kernel), stride=8).value[0, 0]
    _frame = _feats[0, :, 2] @ _kernel[:, 0, :]
    assert_allclose(_out[16:32], _frame, rtol=1e-12)
    assert_array_equal(_out[:16], 0.0)
    assert_array_equal(_out[32:], 0.0)
