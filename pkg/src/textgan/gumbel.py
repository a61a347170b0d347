"""Gumbel noise, the Gumbel-Softmax relaxation and its straight-through variant."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import NumericError, ParameterError
from .tensor import Tensor

_U_CLAMP = 1e-12


def sample_gumbel(shape, rng):
    """Gumbel(0, 1) draws by inverse CDF, ``-log(-log(U))``.

    ``U`` is clamped to ``[1e-12, 1 - 1e-12]`` so neither log sees 0.
    """
    u = np.clip(rng.random(shape), _U_CLAMP, 1.0 - _U_CLAMP)
    return Tensor(-np.log(-np.log(u)))


@dataclass
class GumbelSample:
    logits: Tensor
    noise: np.ndarray
    tau: float
    y: Tensor
    hard: bool = False

    @property
    def index(self):
        """Category chosen in each row (argmax of the perturbed logits)."""
        return np.argmax(self.y.data, axis=-1)


def _prepare(u, tau):
    if not tau > 0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    u = u if isinstance(u, Tensor) else Tensor(u)
    if not np.all(np.isfinite(u.data)):
        raise NumericError("gumbel_softmax: logits must be finite")
    return u


def gumbel_softmax(u, tau, rng, noise=None):
    """Relaxed categorical sample ``softmax((u + g) / tau)`` over the last axis.

    Fresh noise is drawn from ``rng`` unless ``noise`` is given (useful for
    holding ``g`` fixed while varying ``tau``). Differentiable in ``u``.
    """
    u = _prepare(u, tau)
    g = sample_gumbel(u.shape, rng).data if noise is None else np.asarray(noise, dtype=np.float64)
    y = T.softmax(T.scale(T.add(u, Tensor(g)), 1.0 / tau))
    return GumbelSample(logits=u, noise=g, tau=float(tau), y=y)


def one_hot_argmax(values):
    """One-hot rows marking the first maximum of each row."""
    idx = np.argmax(values, axis=-1)
    out = np.zeros_like(values, dtype=np.float64)
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


def gumbel_softmax_hard(u, tau, rng, noise=None):
    """Straight-through sample: exact one-hot forward, soft-sample gradient."""
    soft = gumbel_softmax(u, tau, rng, noise=noise)
    y = T.straight_through(soft.y, one_hot_argmax(soft.y.data))
    return GumbelSample(logits=soft.logits, noise=soft.noise, tau=soft.tau, y=y, hard=True)


@dataclass(frozen=True)
class TemperatureSchedule:
    """Exponential decay from ``tau_start`` towards ``tau_end``."""

    tau_start: float = 1.0
    tau_end: float = 0.3
    decay: float = 1e-3

    def __post_init__(self):
        if not self.tau_end > 0:
            raise ParameterError(f"tau_end must be positive, got {self.tau_end}")
        if self.tau_start < self.tau_end:
            raise ParameterError(f"tau_start={self.tau_start} is below tau_end={self.tau_end}")
        if self.decay < 0:
            raise ParameterError(f"decay must be >= 0, got {self.decay}")

    def __call__(self, step):
        return anneal(self, step)


def anneal(schedule, step):
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    s = schedule
    tau = s.tau_end + (s.tau_start - s.tau_end) * math.exp(-s.decay * step)
    return min(max(tau, s.tau_end), s.tau_start)
