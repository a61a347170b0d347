import math

import numpy as np
import pytest

from textgan import tensor as T
from textgan.data import Dataset
from textgan.errors import ParameterError, TrainingError
from textgan.gan import (
    HARD,
    SOFT,
    Discriminator,
    GanConfig,
    GanCurve,
    GanModel,
    Generator,
    disc_loss,
    discriminator_loss,
    fit_length,
    gen_forward,
    gen_loss,
    generator_loss,
    one_hot,
    sample_ids,
    train_gan,
)
from textgan.gumbel import gumbel_softmax
from textgan.tensor import Tensor

from _reference import central_difference, rel_err

CFG = GanConfig(vocab_size=6, seq_len=3, noise_dim=4, g_hidden=8, d_embed=5, d_hidden=7, batch_size=8)


def constant_d(cfg, p):
    """A discriminator that outputs ``p`` for every input."""
    D = Discriminator(cfg, seed=0)
    D.params["out.w"].data[...] = 0.0
    D.params["out.b"].data[...] = math.log(p / (1 - p))
    return D


def noise(n=4, seed=0):
    return np.random.default_rng(seed).standard_normal((n, CFG.noise_dim))


def test_config_validation():
    with pytest.raises(ValueError):
        GanConfig(noise_dim=0)
    with pytest.raises(ValueError):
        GanConfig(train_mode="other")
    with pytest.raises(ValueError):
        GanConfig(tau_end=0.0)
    assert GanConfig.from_dict({k: str(v) for k, v in CFG.to_dict().items()}) == CFG


def test_gen_forward_rows_sum_to_one():
    G = Generator(CFG, seed=0)
    y = gen_forward(G, noise(1), 0.7, SOFT, np.random.default_rng(0)).data
    assert y.shape == (1, 3, 6)
    assert np.all(np.abs(y.sum(axis=-1) - 1) < 1e-9)


def test_gen_forward_hard_is_one_hot():
    G = Generator(CFG, seed=0)
    y = gen_forward(G, noise(16), 0.7, HARD, np.random.default_rng(0)).data
    assert set(np.unique(y)) == {0.0, 1.0}
    np.testing.assert_array_equal(y.sum(axis=-1), 1.0)


def test_gen_forward_errors():
    G = Generator(CFG, seed=0)
    with pytest.raises(ParameterError):
        gen_forward(G, noise(), 0.0, HARD, np.random.default_rng(0))
    with pytest.raises(ValueError):
        gen_forward(G, np.full((1, 4), np.nan), 1.0, SOFT, np.random.default_rng(0))


def test_discriminator_output_in_open_interval():
    D = Discriminator(CFG, seed=0)
    out = D(Tensor(one_hot(np.random.default_rng(0).integers(0, 6, (10, 3)), 6))).data
    assert out.shape == (10,)
    assert np.all((out > 0) & (out < 1))


def test_generator_gradient_nonzero_and_matches_fd():
    G, D = Generator(CFG, seed=0), Discriminator(CFG, seed=1)
    z = noise()

    def score(params=None):
        if params is not None:
            for k, v in params.items():
                G.params[k].data = v
        y = gen_forward(G, z, 1.0, SOFT, np.random.default_rng(9))
        return T.mean(D(y))

    G.zero_grad()
    score().backward()
    grads = {k: p.grad.copy() for k, p in G.params.items()}
    total = np.concatenate([g.ravel() for g in grads.values()])
    assert np.all(np.isfinite(total)) and np.any(total != 0)

    rng = np.random.default_rng(3)
    names = sorted(grads)
    base = {k: p.data.copy() for k, p in G.params.items()}
    for _ in range(5):
        name = names[rng.integers(len(names))]
        idx = tuple(int(rng.integers(s)) for s in base[name].shape)
        h = 1e-5
        plus, minus = base[name].copy(), base[name].copy()
        plus[idx] += h
        minus[idx] -= h
        fd = (score({name: plus}).item() - score({name: minus}).item()) / (2 * h)
        score({name: base[name]})
        assert abs(grads[name][idx] - fd) / (abs(fd) + 1e-8) < 1e-4


def test_disc_loss_constant_half():
    D = constant_d(CFG, 0.5)
    real = Tensor(one_hot([[1, 2, 3], [4, 5, 0]], 6))
    fake = Tensor(np.full((2, 3, 6), 1 / 6))
    assert abs(disc_loss(D, real, fake).item() - 2 * math.log(2)) < 1e-12


def test_disc_loss_perfect_discriminator_near_zero():
    loss = discriminator_loss(Tensor([1.0, 1.0]), Tensor([0.0, 0.0])).item()
    assert 0 < loss < 1e-6


def test_disc_loss_hand_computed():
    loss = discriminator_loss(Tensor([0.8, 0.3]), Tensor([0.3, 0.8])).item()
    expected = -0.5 * (math.log(0.8) + math.log(0.3)) - 0.5 * (math.log(0.7) + math.log(0.2))
    assert abs(loss - expected) < 1e-9


def test_disc_loss_treats_fake_as_constant():
    G, D = Generator(CFG, seed=0), Discriminator(CFG, seed=1)
    fake = gen_forward(G, noise(), 1.0, SOFT, np.random.default_rng(0))
    real = Tensor(one_hot([[1, 2, 3]] * 4, 6))
    disc_loss(D, real, fake).backward()
    assert all(p.grad is None for p in G.parameters())
    assert all(p.grad is not None for p in D.parameters())


def test_disc_loss_errors():
    D = Discriminator(CFG, seed=0)
    with pytest.raises(ValueError):
        disc_loss(D, np.zeros((0, 3, 6)), np.zeros((2, 3, 6)))
    with pytest.raises(ValueError):
        disc_loss(D, np.zeros((2, 3, 6)), np.zeros((2, 2, 6)))


def test_gen_loss_values():
    fake = Tensor(np.full((3, 3, 6), 1 / 6))
    assert abs(gen_loss(constant_d(CFG, 0.5), fake).item() - math.log(2)) < 1e-12
    assert generator_loss(Tensor([1.0, 1.0])).item() < 1e-6
    with pytest.raises(ValueError):
        gen_loss(constant_d(CFG, 0.5), Tensor(np.zeros((0, 3, 6))))


def test_gen_loss_gradient_wrt_logits_fd():
    D = Discriminator(CFG, seed=1)
    rng = np.random.default_rng(4)
    u0 = rng.normal(size=(2, 3, 6))
    g = rng.gumbel(size=u0.shape)

    def loss(u):
        return gen_loss(D, gumbel_softmax(u, 0.8, None, noise=g).y)

    u = Tensor(u0.copy(), requires_grad=True)
    loss(u).backward()
    fd = central_difference(lambda x: loss(Tensor(x)).item(), u0)
    assert rel_err(u.grad, fd).max() < 1e-4


def test_fit_length():
    assert fit_length([1, 4, 5, 2], 3) == [1, 4, 5]
    assert fit_length([1, 2], 4) == [1, 2, 0, 0]


# ---------------------------------------------------------------- training


REAL = Dataset([(1, 4, 2), (1, 5, 2), (1, 4, 5, 2)] * 5)


def test_zero_steps_unchanged():
    gan = GanModel(CFG, seed=0)
    before = gan.state_dict()
    curve = train_gan(gan.generator, gan.discriminator, REAL, CFG, steps=0)
    assert len(curve) == 0
    for k, v in gan.state_dict().items():
        np.testing.assert_array_equal(v, before[k])


def test_same_seed_same_curve():
    curves = []
    for _ in range(2):
        gan = GanModel(CFG, seed=3)
        curves.append(train_gan(gan.generator, gan.discriminator, REAL, CFG, steps=15, seed=4).rows)
    assert curves[0] == curves[1]
    assert len(curves[0]) == 15


def test_curve_columns_and_csv(tmp_path):
    gan = GanModel(CFG, seed=0)
    curve = train_gan(gan.generator, gan.discriminator, REAL, CFG, steps=3, seed=0)
    curve.to_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "step,d_loss,g_loss,d_real_mean,d_fake_mean,tau"
    assert len(lines) == 4
    assert curve.column("tau")[0] == CFG.tau_start


def test_nan_reports_step():
    gan = GanModel(CFG, seed=0)
    gan.generator.params["out.b"].data[...] = np.nan
    with pytest.raises(TrainingError) as info:
        train_gan(gan.generator, gan.discriminator, REAL, CFG, steps=2)
    assert info.value.step == 0


def test_collapse_warning():
    cfg = GanConfig(vocab_size=6, seq_len=3, noise_dim=4, g_hidden=8, d_embed=8, d_hidden=8,
                    batch_size=16, lr_g=1e-9, lr_d=5e-2)
    G, D = Generator(cfg, 0), Discriminator(cfg, 1)
    bias = np.full((3, 6), -20.0)
    bias[:, 5] = 20.0
    G.params["out.b"].data[...] = bias.reshape(-1)
    curve = train_gan(G, D, Dataset([(4, 4, 4)] * 10), cfg, steps=400, seed=0)
    assert curve.collapse_warning is not None
    healthy = GanModel(CFG, seed=0)
    assert train_gan(healthy.generator, healthy.discriminator, REAL, CFG, steps=20).collapse_warning is None


def test_sample_ids_deterministic():
    G = Generator(CFG, seed=0)
    a = sample_ids(G, 50, 0.3, seed=1)
    assert a.shape == (50, 3)
    np.testing.assert_array_equal(a, sample_ids(G, 50, 0.3, seed=1))
    assert sample_ids(G, 0, 0.3).shape == (0, 3)


def test_gan_model_state_round_trip():
    a, b = GanModel(CFG, seed=0), GanModel(CFG, seed=1)
    b.load_state_dict(a.state_dict())
    for k, v in a.state_dict().items():
        np.testing.assert_array_equal(v, b.state_dict()[k])
    with pytest.raises(ValueError):
        b.load_state_dict({"other.x": np.zeros(1)})
