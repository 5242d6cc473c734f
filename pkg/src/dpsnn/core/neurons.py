"""
Spiking neuron dynamics: LIF, parametric LIF (PLIF) and adaptive LIF (ALIF).

Time is discrete, one step per encoder frame hop, and every time constant is
expressed in steps. Resting potential is 0 and membrane resistance is 1 unless
given otherwise.

Step functions take and return :class:`~dpsnn.core.autodiff.Tensor` values, so
the same code runs with a gradient tape (training) or without (inference).

"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from attrs import Attribute, field, frozen

from .. import VERSION, ArrayDouble, ArrayFloat, NumericError, SurrogateKind  # noqa: TID252
from .autodiff import Tensor, as_tensor, detach, exp, heaviside, neg, sigmoid

__version__ = VERSION

MG_HEIGHT = 0.15
"""Weight of the negative lobes of the multi-Gaussian surrogate"""

MG_SIGMA = 0.5
"""Width of the central lobe of the multi-Gaussian surrogate"""

MG_WIDE = 4.0
"""Width of the negative lobes, relative to :data:`MG_SIGMA`"""

PLIF_THRESHOLD = 1.0
ALIF_B0 = 0.1
ALIF_BETA = 1.8


def _gauss(_x: ArrayFloat, _sigma: float, /) -> ArrayFloat:
    return np.exp(-(_x * _x) / (2 * _sigma**2)) / (np.sqrt(2 * np.pi) * _sigma)


def surrogate_grad(_kind: SurrogateKind, _x: ArrayFloat, /) -> ArrayFloat:
    """Surrogate derivative of the Heaviside step at :code:`_x`.

    Parameters
    ----------
    _kind
        :attr:`SurrogateKind.ARCTAN`, :math:`1 / (1 + (\\pi x)^2)`, the derivative
        of :math:`\\arctan(\\pi x) / \\pi + 1/2`; or
        :attr:`SurrogateKind.MULTI_GAUSSIAN`,
        :math:`(1 + h) G(x; 0, \\sigma) - h G(x; 0, 4\\sigma)`, with :math:`G`
        the Gaussian density, :math:`h = 0.15`, :math:`\\sigma = 0.5`.
    _x
        Distance of the membrane potential from threshold.

    Returns
    -------
        Surrogate derivative, same shape as :code:`_x`.

    """
    match _kind:
        case SurrogateKind.ARCTAN:
            return 1 / (1 + (np.pi * _x) ** 2)
        case SurrogateKind.MULTI_GAUSSIAN:
            return (1 + MG_HEIGHT) * _gauss(_x, MG_SIGMA) - MG_HEIGHT * _gauss(
                _x, MG_WIDE * MG_SIGMA
            )
        case _:
            raise ValueError(f"Unknown surrogate, {_kind!r}.")


def fire(_x: Tensor, _kind: SurrogateKind = SurrogateKind.ARCTAN, /) -> Tensor:
    """Binary spikes where :code:`_x >= 0`, with the given surrogate derivative."""
    return heaviside(_x, lambda _v: surrogate_grad(_kind, _v))


@frozen
class LifConfig:
    """Constants of a leaky integrate-and-fire neuron."""

    u_rest: float = field(default=0.0, converter=float)
    r: float = field(default=1.0, converter=float)
    """Membrane resistance"""

    theta: float = field(default=PLIF_THRESHOLD, converter=float)

    @theta.validator
    def _check_theta(_i: LifConfig, _a: Attribute[float], _v: float) -> None:
        if not _v > _i.u_rest:
            raise ValueError(
                f"Firing threshold, {_v}, must exceed the resting potential, {_i.u_rest}."
            )

    tau_m: float = field(default=2.0, converter=float)
    """Membrane time constant, in steps"""

    @tau_m.validator
    def _check_tau_m(_i: LifConfig, _a: Attribute[float], _v: float) -> None:
        if not _v > 1:
            raise ValueError(f"Membrane time constant must exceed 1 step, got {_v}.")


class NeuronState(NamedTuple):
    """Membrane potentials, adaptation traces and previous-step spikes."""

    u: Tensor
    eta: Tensor
    s_prev: Tensor

    @classmethod
    def zeros(
        cls, _shape: tuple[int, ...], /, *, dtype: type[np.floating] = np.float64
    ) -> NeuronState:
        return cls(*(Tensor(np.zeros(_shape, dtype=dtype)) for _ in range(3)))

    def values(self) -> tuple[ArrayFloat, ArrayFloat, ArrayFloat]:
        return self.u.value, self.eta.value, self.s_prev.value

    def detached(self) -> NeuronState:
        """Untaped copy, for carrying state across independent forward passes."""
        return NeuronState(detach(self.u), detach(self.eta), detach(self.s_prev))


def _check_finite(_current: Tensor, /) -> None:
    if not np.isfinite(_current.value).all():
        raise NumericError("Non-finite input current to a spiking neuron.")


def _integrate_and_fire(
    _state: NeuronState,
    _current: Tensor,
    _k: Tensor | float,
    /,
    *,
    u_rest: float,
    r: float,
    theta: float,
) -> tuple[Tensor, NeuronState]:
    # u' = (1 - k) u + k (u_rest + R I), hard reset to u_rest
    _u = (1 - as_tensor(_k)) * _state.u + _k * (u_rest + r * _current)
    _s = fire(_u - theta, SurrogateKind.ARCTAN)
    _sd = detach(_s)
    _u = _u * (1 - _sd) + u_rest * _sd
    return _s, NeuronState(_u, _state.eta, _s)


def lif_step(
    _state: NeuronState, _current: Tensor, _cfg: LifConfig, /
) -> tuple[Tensor, NeuronState]:
    """Advance LIF neurons one step.

    Parameters
    ----------
    _state
        State before the step.
    _current
        Input current, same shape as the membrane potentials.
    _cfg
        Neuron constants.

    Returns
    -------
        Binary spikes and the state after the step.

    Raises
    ------
    NumericError
        If the input current is not finite.

    """
    _check_finite(_current)
    return _integrate_and_fire(
        _state, _current, 1 / _cfg.tau_m, u_rest=_cfg.u_rest, r=_cfg.r, theta=_cfg.theta
    )


def plif_step(
    _state: NeuronState,
    _current: Tensor,
    _a: Tensor,
    /,
    *,
    theta: float = PLIF_THRESHOLD,
    u_rest: float = 0.0,
    r: float = 1.0,
) -> tuple[Tensor, NeuronState]:
    """Advance PLIF neurons one step.

    As :func:`lif_step`, with :math:`1/\\tau_m = \\mathrm{sigmoid}(a)` for the
    learnable, layer-shared scalar :code:`_a`; :math:`\\tau_m > 1` for any finite
    :code:`_a`.
    """
    _check_finite(_current)
    return _integrate_and_fire(
        _state, _current, sigmoid(_a), u_rest=u_rest, r=r, theta=theta
    )


def alif_step(
    _state: NeuronState,
    _current: Tensor,
    _tau_m: Tensor,
    _tau_adp: Tensor,
    /,
    *,
    b0: float = ALIF_B0,
    beta: float = ALIF_BETA,
    r: float = 1.0,
) -> tuple[Tensor, NeuronState]:
    """Advance ALIF neurons one step.

    .. math::

        \\eta' &= \\rho \\eta + (1 - \\rho) s_{t-1} \\\\
        \\theta &= b_0 + \\beta \\eta' \\\\
        u' &= \\alpha u + (1 - \\alpha) R I_t - s_{t-1} \\theta \\\\
        s_t &= \\Theta(u' - \\theta)

    with :math:`\\alpha = e^{-1/\\tau_m}`, :math:`\\rho = e^{-1/\\tau_{adp}}`.
    Reset is by subtraction only. The spike factor of the reset term carries
    no gradient; the adaptation and recurrent paths do.

    Parameters
    ----------
    _state
        State before the step.
    _current
        Input current.
    _tau_m
        Per-neuron membrane time constants, in steps.
    _tau_adp
        Per-neuron adaptation time constants, in steps.
    b0
        Minimal threshold.
    beta
        Adaptation coefficient.
    r
        Membrane resistance.

    Returns
    -------
        Binary spikes and the state after the step.

    """
    _check_finite(_current)
    _alpha = exp(neg(1 / _tau_m))
    _rho = exp(neg(1 / _tau_adp))
    _eta = _rho * _state.eta + (1 - _rho) * _state.s_prev
    _theta = b0 + beta * _eta
    _u = (
        _alpha * _state.u
        + (1 - _alpha) * (r * _current)
        - detach(_state.s_prev) * _theta
    )
    _s = fire(_u - _theta, SurrogateKind.MULTI_GAUSSIAN)
    return _s, NeuronState(_u, _eta, _s)


def alif_threshold(
    _state: NeuronState, /, *, b0: float = ALIF_B0, beta: float = ALIF_BETA
) -> ArrayDouble:
    """Threshold in force at the most recent step."""
    return b0 + beta * _state.eta.value
