import math

import numpy as np
import pytest

from textgan.errors import InternalConsistencyError
from textgan.gan import GanConfig, Generator
from textgan.theory import (
    ToyDistribution,
    empirical_distribution,
    game_value,
    js_divergence,
    kl_divergence,
    optimal_discriminator,
    optimal_discriminator_table,
    population_disc_loss,
    value_at_optimal_d,
)

LN4 = math.log(4.0)


def random_pair(rng):
    V = int(rng.integers(2, 6))
    L = int(rng.integers(1, 4))
    sparsity = float(rng.choice([0.0, 0.3]))
    return ToyDistribution.random(rng, V, L, sparsity), ToyDistribution.random(rng, V, L, sparsity)


def point_mass(V, L, x):
    t = np.zeros((V,) * L)
    t[tuple(x)] = 1.0
    return ToyDistribution(t)


def test_table_validation():
    with pytest.raises(ValueError):
        ToyDistribution(np.full((2, 2), 0.3))
    with pytest.raises(ValueError):
        ToyDistribution(np.array([1.5, -0.5]))
    with pytest.raises(ValueError):
        ToyDistribution(np.full((2, 3), 1 / 6))
    with pytest.raises(ValueError):
        ToyDistribution(np.full((6,) * 5, 6.0**-5))
    ToyDistribution(np.full((6,) * 4, 6.0**-4))


def test_from_counts_sums_to_one_exactly():
    d = ToyDistribution.from_counts(np.array([1.0, 1.0, 1.0]))
    assert d.table.sum() == 1.0


def test_optimal_discriminator_examples():
    u = ToyDistribution(np.full((3, 3), 1 / 9))
    for x in u.sequences():
        assert optimal_discriminator(u, u, x) == 0.5
    p = ToyDistribution(np.array([0.3, 0.7, 0.0]))
    q = ToyDistribution(np.array([0.1, 0.0, 0.9]))
    assert abs(optimal_discriminator(p, q, (0,)) - 0.75) < 1e-15
    assert optimal_discriminator(p, q, (1,)) == 1.0
    assert optimal_discriminator(p, q, (2,)) == 0.0
    r = ToyDistribution(np.array([0.5, 0.5, 0.0]))
    assert optimal_discriminator(r, p, (2,)) == 0.5
    np.testing.assert_array_equal(optimal_discriminator_table(r, p)[2], 0.5)


def test_js_examples():
    rng = np.random.default_rng(0)
    p, q = random_pair(rng)
    assert js_divergence(p, p) == 0.0
    a, b = point_mass(3, 2, (0, 1)), point_mass(3, 2, (2, 2))
    assert abs(js_divergence(a, b) - math.log(2)) < 1e-15
    for _ in range(20):
        p, q = random_pair(rng)
        assert abs(js_divergence(p, q) - js_divergence(q, p)) < 1e-12


def test_js_nonnegative_and_zero_iff_equal():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p, q = random_pair(rng)
        assert js_divergence(p, q) > 0
        assert js_divergence(p, ToyDistribution(p.table.copy())) == 0.0


def test_kl():
    p = ToyDistribution(np.array([0.5, 0.5]))
    q = ToyDistribution(np.array([0.25, 0.75]))
    assert abs(kl_divergence(p, q) - (0.5 * math.log(2) + 0.5 * math.log(0.5 / 0.75))) < 1e-15
    assert kl_divergence(p, ToyDistribution(np.array([1.0, 0.0]))) == math.inf


def test_value_at_optimal_d_examples():
    p = ToyDistribution(np.full((3, 3), 1 / 9))
    direct, via_js = value_at_optimal_d(p, p)
    assert abs(direct + LN4) < 1e-12 and abs(via_js + LN4) < 1e-12
    a, b = point_mass(2, 3, (0, 0, 1)), point_mass(2, 3, (1, 1, 1))
    direct, via_js = value_at_optimal_d(a, b)
    assert abs(direct) < 1e-15 and abs(via_js) < 1e-15


def test_value_identity_on_random_pairs():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p, q = random_pair(rng)
        direct, via_js = value_at_optimal_d(p, q)
        assert abs(direct - via_js) < 1e-10


def test_value_mismatch_raises(monkeypatch):
    import textgan.theory as th

    monkeypatch.setattr(th, "js_divergence", lambda p, q: 0.123)
    p, q = random_pair(np.random.default_rng(3))
    with pytest.raises(InternalConsistencyError):
        th.value_at_optimal_d(p, q)


def test_optimal_d_minimises_population_loss():
    rng = np.random.default_rng(4)
    for _ in range(100):
        p, q = random_pair(rng)
        d_star = optimal_discriminator_table(p, q)
        best = population_disc_loss(p, q, d_star)
        for delta in (-0.05, 0.05):
            other = np.clip(d_star + delta, 1e-12, 1 - 1e-12)
            assert best <= population_disc_loss(p, q, other) + 1e-15


def test_game_value_constant_half():
    p, q = random_pair(np.random.default_rng(5))
    assert abs(game_value(p, q, np.full(p.table.shape, 0.5)) + LN4) < 1e-12


def test_empirical_distribution():
    cfg = GanConfig(vocab_size=3, seq_len=2, noise_dim=2, g_hidden=4, d_embed=2, d_hidden=2)
    G = Generator(cfg, seed=0)
    with pytest.raises(ValueError):
        empirical_distribution(G, 0)
    emp = empirical_distribution(G, 1000, seed=1)
    assert emp.table.sum() == 1.0
    # saturated output bias: the generator emits (2, 0) with probability ~1
    for name in ("out.w", "fc1.w", "fc2.w"):
        G.params[name].data[...] = 0.0
    bias = np.full((2, 3), -30.0)
    bias[0, 2] = bias[1, 0] = 30.0
    G.params["out.b"].data[...] = bias.reshape(-1)
    emp = empirical_distribution(G, 1000, seed=2)
    assert emp.table[2, 0] > 0.99
    assert emp.table.sum() == 1.0


def test_sample_matches_table():
    p = ToyDistribution(np.array([[0.1, 0.2], [0.3, 0.4]]))
    samples = p.sample(100_000, np.random.default_rng(6))
    emp = ToyDistribution.from_samples(samples, 2)
    assert js_divergence(p, emp) < 1e-4
