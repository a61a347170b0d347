import math

import numpy as np
import pytest

from textgan import tensor as T
from textgan.errors import ParameterError
from textgan.gumbel import TemperatureSchedule, anneal, gumbel_softmax, gumbel_softmax_hard, one_hot_argmax, sample_gumbel
from textgan.tensor import Tensor

from _reference import central_difference, rel_err

EULER_GAMMA = 0.5772156649015329


def softmax_np(u):
    e = np.exp(u - u.max())
    return e / e.sum()


def argmax_frequencies(u, n, seed, hard=True):
    rng = np.random.default_rng(seed)
    batch = np.broadcast_to(u, (n, len(u)))
    sampler = gumbel_softmax_hard if hard else gumbel_softmax
    idx = sampler(batch, 1.0, rng).index
    return np.bincount(idx, minlength=len(u)) / n


def test_gumbel_moments():
    g = sample_gumbel((1_000_000,), np.random.default_rng(0)).data
    assert abs(g.mean() - EULER_GAMMA) < 0.01
    assert abs(g.var() - math.pi**2 / 6) < 0.02


def test_gumbel_seeded():
    a = sample_gumbel((5, 3), np.random.default_rng(4)).data
    b = sample_gumbel((5, 3), np.random.default_rng(4)).data
    np.testing.assert_array_equal(a, b)


def test_gumbel_clamped_finite():
    class Extremes:
        def random(self, shape):
            return np.array([0.0, 1.0])

    g = sample_gumbel((2,), Extremes()).data
    assert np.all(np.isfinite(g))


def test_uniform_logits_give_uniform_argmax():
    freq = argmax_frequencies(np.zeros(4), 100_000, seed=1, hard=False)
    assert 0.5 * np.abs(freq - 0.25).sum() < 0.01


def test_gumbel_max_two_zeros():
    freq = argmax_frequencies(np.array([2.0, 0.0, 0.0]), 100_000, seed=2, hard=False)
    expected = math.e**2 / (math.e**2 + 2)
    assert abs(expected - 0.7869) < 1e-4
    assert abs(freq[0] - expected) < 0.01


def test_hard_and_soft_argmax_agree_under_paired_seeds():
    u = np.array([0.3, -1.0, 1.2, 0.0, 0.5])
    np.testing.assert_array_equal(
        argmax_frequencies(u, 100_000, seed=3, hard=True), argmax_frequencies(u, 100_000, seed=3, hard=False)
    )


def test_soft_rows_sum_to_one_across_temperatures():
    rng = np.random.default_rng(5)
    u = rng.uniform(-3, 3, (50, 6))
    for tau in (0.01, 0.1, 1.0, 10.0):
        y = gumbel_softmax(u, tau, rng).y.data
        assert np.all(np.abs(y.sum(axis=-1) - 1.0) <= 1e-9)
        if tau >= 1.0:  # smaller tau saturates to exact 0/1 in float64
            assert np.all((y > 0) & (y < 1))


def test_small_temperature_is_nearly_one_hot():
    u = np.array([2.0, 0.0, -1.0, 0.5])
    g = np.array([0.1, 0.3, -0.2, 0.0])
    ys = [gumbel_softmax(u, tau, None, noise=g).y.data.max() for tau in (1.0, 0.1, 0.01)]
    assert ys[0] < ys[1] < ys[2]
    assert ys[2] > 0.999


def test_nonpositive_tau_rejected():
    with pytest.raises(ParameterError):
        gumbel_softmax(np.zeros(3), 0.0, np.random.default_rng(0))
    with pytest.raises(ParameterError):
        gumbel_softmax_hard(np.zeros(3), -1.0, np.random.default_rng(0))


def test_fresh_noise_each_call():
    rng = np.random.default_rng(0)
    a = gumbel_softmax(np.zeros(4), 1.0, rng).noise
    b = gumbel_softmax(np.zeros(4), 1.0, rng).noise
    assert not np.array_equal(a, b)


def test_soft_sample_gradient_fd():
    rng = np.random.default_rng(6)
    u0 = rng.uniform(-2, 2, (3, 5))
    g = sample_gumbel(u0.shape, rng).data
    w = rng.uniform(0.5, 1.5, u0.shape)
    u = Tensor(u0.copy(), requires_grad=True)
    T.sum(T.mul(gumbel_softmax(u, 1.0, None, noise=g).y, Tensor(w))).backward()

    def f(x):
        return float((gumbel_softmax(x, 1.0, None, noise=g).y.data * w).sum())

    assert rel_err(u.grad, central_difference(f, u0)).max() < 1e-5


def test_straight_through_forward_one_hot_and_backward_equal():
    rng = np.random.default_rng(7)
    u0 = rng.uniform(-2, 2, (4, 6))
    g = sample_gumbel(u0.shape, rng).data
    w = Tensor(rng.normal(size=u0.shape))
    u_hard = Tensor(u0.copy(), requires_grad=True)
    hard = gumbel_softmax_hard(u_hard, 0.5, None, noise=g)
    assert set(np.unique(hard.y.data)) == {0.0, 1.0}
    np.testing.assert_array_equal(hard.y.data.sum(axis=-1), 1.0)
    T.sum(T.mul(hard.y, w)).backward()
    u_soft = Tensor(u0.copy(), requires_grad=True)
    T.sum(T.mul(gumbel_softmax(u_soft, 0.5, None, noise=g).y, w)).backward()
    np.testing.assert_array_equal(u_hard.grad, u_soft.grad)


def test_one_hot_ties_go_to_lowest_index():
    np.testing.assert_array_equal(one_hot_argmax(np.array([[1.0, 3.0, 3.0]])), [[0.0, 1.0, 0.0]])


def test_anneal():
    s = TemperatureSchedule(1.0, 0.3, 1e-3)
    assert anneal(s, 0) == 1.0
    assert abs(anneal(s, 10**7) - 0.3) < 1e-12
    taus = [s(k) for k in range(0, 5000, 50)]
    assert all(a >= b for a, b in zip(taus, taus[1:]))
    assert all(t >= 0.3 for t in taus)
    assert all(TemperatureSchedule(1.0, 0.3, 0.0)(k) == 1.0 for k in (0, 10, 10**6))


def test_schedule_validation():
    with pytest.raises(ParameterError):
        TemperatureSchedule(1.0, 0.0)
    with pytest.raises(ParameterError):
        TemperatureSchedule(0.1, 0.3)
    with pytest.raises(ValueError):
        anneal(TemperatureSchedule(), -1)
