"""Discrete-sequence GAN trained through the Gumbel-Softmax relaxation."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import tensor as T
from .errors import NumericError, ParameterError, TrainingError
from .gumbel import TemperatureSchedule, gumbel_softmax, gumbel_softmax_hard
from .optim import Adam, OptimizerConfig
from .tensor import Tensor, no_grad
from .tokenizer import PAD

D_CLAMP = 1e-7
SOFT, HARD = "soft", "hard"
COLLAPSE_THRESHOLD = 1e-3
COLLAPSE_PATIENCE = 200


@dataclass(frozen=True)
class GanConfig:
    vocab_size: int = 64
    seq_len: int = 16
    noise_dim: int = 16
    g_hidden: int = 128
    d_embed: int = 32
    d_hidden: int = 64
    d_steps: int = 1
    g_steps: int = 1
    batch_size: int = 64
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    init_std: float = 0.5
    train_mode: str = SOFT
    tau_start: float = 1.0
    tau_end: float = 0.3
    tau_decay: float = 1e-3

    def __post_init__(self):
        problems = []
        for name in ("vocab_size", "seq_len", "noise_dim", "g_hidden", "d_embed", "d_hidden",
                     "d_steps", "g_steps", "batch_size"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.vocab_size < 2:
            problems.append("vocab_size must be >= 2")
        if self.lr_g <= 0 or self.lr_d <= 0:
            problems.append("learning rates must be positive")
        if self.train_mode not in (SOFT, HARD):
            problems.append(f"train_mode must be 'soft' or 'hard', got {self.train_mode!r}")
        try:
            self.schedule
        except ParameterError as exc:
            problems.append(str(exc))
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def schedule(self):
        return TemperatureSchedule(self.tau_start, self.tau_end, self.tau_decay)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in kinds:
                raise ValueError(f"unknown GanConfig field {k!r}")
            kind = kinds[k]
            out[k] = str(v) if kind == "str" else float(v) if kind == "float" else int(v)
        return cls(**out)


def _init(rng, shapes, std):
    params = {}
    for name, shape in shapes.items():
        data = np.zeros(shape) if name.endswith(".b") else rng.normal(0.0, std, shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


class _Net:
    def parameters(self):
        return list(self.params.values())

    def named_parameters(self):
        return list(self.params.items())

    def state_dict(self):
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state):
        if set(state) != set(self.params):
            raise ValueError(
                f"parameter names differ: expected {sorted(self.params)}, got {sorted(state)}"
            )
        for k, p in self.params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{k}: expected shape {p.shape}, got {arr.shape}")
            p.data = arr.copy()

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


class Generator(_Net):
    """Two hidden layers mapping noise ``z`` to ``[seq_len, vocab]`` logits.

    All positions are emitted at once; a per-position Gumbel-Softmax then
    turns the logits into (relaxed) one-hot token distributions.
    """

    def __init__(self, config, seed=0):
        self.config = c = config
        out = c.seq_len * c.vocab_size
        self.params = _init(
            np.random.default_rng(seed),
            {
                "fc1.w": (c.noise_dim, c.g_hidden),
                "fc1.b": (c.g_hidden,),
                "fc2.w": (c.g_hidden, c.g_hidden),
                "fc2.b": (c.g_hidden,),
                "out.w": (c.g_hidden, out),
                "out.b": (out,),
            },
            c.init_std,
        )

    def logits(self, z):
        p, c = self.params, self.config
        z = z if isinstance(z, Tensor) else Tensor(z)
        h = T.relu(z @ p["fc1.w"] + p["fc1.b"])
        h = T.relu(h @ p["fc2.w"] + p["fc2.b"])
        return (h @ p["out.w"] + p["out.b"]).reshape(z.shape[0], c.seq_len, c.vocab_size)


class Discriminator(_Net):
    """Scores token distributions ``[B, seq_len, vocab]`` with a probability.

    Each position has its own embedding table; a row's embedding is the
    average of table rows weighted by that position's distribution, so
    one-hot real tokens and relaxed fake samples share one pathway. The
    embeddings are mean-pooled, passed through a hidden layer, and squashed by
    a sigmoid.
    """

    def __init__(self, config, seed=0):
        self.config = c = config
        self.params = _init(
            np.random.default_rng(seed),
            {
                "embed.w": (c.seq_len, c.vocab_size, c.d_embed),
                "fc.w": (c.d_embed, c.d_hidden),
                "fc.b": (c.d_hidden,),
                "out.w": (c.d_hidden, 1),
                "out.b": (1,),
            },
            c.init_std,
        )

    def logit(self, dists):
        p = self.params
        dists = dists if isinstance(dists, Tensor) else Tensor(dists)
        emb = dists.transpose(1, 0, 2) @ p["embed.w"]  # [T, B, E]
        pooled = T.mean(emb, axis=0)
        h = T.relu(pooled @ p["fc.w"] + p["fc.b"])
        return (h @ p["out.w"] + p["out.b"]).reshape(-1)

    def __call__(self, dists):
        return T.sigmoid(self.logit(dists))


def gen_forward(G, z, tau, mode=SOFT, rng=None):
    """Per-position Gumbel-Softmax samples ``[B, seq_len, vocab]`` from noise ``z``."""
    if mode not in (SOFT, HARD):
        raise ParameterError(f"mode must be 'soft' or 'hard', got {mode!r}")
    if not tau > 0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    z = z if isinstance(z, Tensor) else Tensor(z)
    if not np.all(np.isfinite(z.data)):
        raise ValueError("noise must be finite")
    rng = rng if rng is not None else np.random.default_rng()
    sampler = gumbel_softmax_hard if mode == HARD else gumbel_softmax
    return sampler(G.logits(z), tau, rng).y


def sample_noise(rng, n, noise_dim):
    """Standard-normal latent vectors."""
    return rng.standard_normal((n, noise_dim))


def one_hot(ids, vocab_size):
    ids = np.asarray(ids, dtype=np.int64)
    out = np.zeros(ids.shape + (vocab_size,))
    np.put_along_axis(out, ids[..., None], 1.0, axis=-1)
    return out


def fit_length(seq, length):
    """Truncate or PAD-fill ``seq`` to exactly ``length`` ids."""
    seq = list(seq)[:length]
    return seq + [PAD] * (length - len(seq))


def discriminator_loss(p_real, p_fake):
    """``-mean log p_real - mean log(1 - p_fake)`` with probabilities clamped."""
    p_real = T.clip(p_real, D_CLAMP, 1.0 - D_CLAMP)
    p_fake = T.clip(p_fake, D_CLAMP, 1.0 - D_CLAMP)
    return -(T.mean(T.log(p_real)) + T.mean(T.log(1.0 - p_fake)))


def generator_loss(p_fake):
    """Non-saturating generator loss ``-mean log p_fake``."""
    return -T.mean(T.log(T.clip(p_fake, D_CLAMP, 1.0 - D_CLAMP)))


def disc_loss(D, real_onehots, fake_dists):
    """Discriminator loss; the fake batch is treated as a constant."""
    real = real_onehots if isinstance(real_onehots, Tensor) else Tensor(real_onehots)
    fake = fake_dists.detach() if isinstance(fake_dists, Tensor) else Tensor(fake_dists)
    if real.shape[0] == 0 or fake.shape[0] == 0:
        raise ValueError("disc_loss needs non-empty real and fake batches")
    if real.shape[1:] != fake.shape[1:]:
        raise ValueError(f"real batch {real.shape} and fake batch {fake.shape} disagree")
    return discriminator_loss(D(real), D(fake))


def gen_loss(D, fake_dists):
    if fake_dists.shape[0] == 0:
        raise ValueError("gen_loss needs a non-empty batch")
    return generator_loss(D(fake_dists))


@dataclass
class GanCurve:
    rows: list = field(default_factory=list)
    collapse_warning: str | None = None

    COLUMNS = ("step", "d_loss", "g_loss", "d_real_mean", "d_fake_mean", "tau")

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        i = self.COLUMNS.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])


def train_gan(G, D, real_data, config=None, steps=1000, seed=0, callback=None):
    """Alternating discriminator / generator updates.

    Every iteration runs ``d_steps`` discriminator updates on a real batch and
    a fake batch (fakes carry no gradient into G), then ``g_steps`` generator
    updates that backpropagate ``-log D(G(z))`` through the Gumbel-Softmax.
    Real sequences are truncated or PAD-filled to ``seq_len``.

    Returns a :class:`GanCurve`. When mean D(fake) stays below 0.001 for 200
    consecutive iterations the curve's ``collapse_warning`` is set.
    """
    config = config or G.config
    c = config
    real = np.array([fit_length(s, c.seq_len) for s in real_data], dtype=np.int64)
    curve = GanCurve()
    if steps <= 0:
        return curve
    if real.size == 0:
        raise ValueError("train_gan needs at least one real sequence")
    if real.max() >= c.vocab_size:
        raise IndexError(f"real data has ids outside vocabulary of size {c.vocab_size}")
    real_onehot = one_hot(real, c.vocab_size)
    batch_rng, noise_rng, gumbel_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
    )
    d_opt = Adam(D.parameters(), OptimizerConfig(lr=c.lr_d, beta1=c.beta1, beta2=c.beta2, warmup_steps=0))
    g_opt = Adam(G.parameters(), OptimizerConfig(lr=c.lr_g, beta1=c.beta1, beta2=c.beta2, warmup_steps=0))
    schedule = c.schedule
    low_streak = 0
    for step in range(steps):
        tau = schedule(step)
        try:
            for _ in range(c.d_steps):
                idx = batch_rng.integers(0, len(real_onehot), size=c.batch_size)
                with no_grad():
                    fake = gen_forward(G, sample_noise(noise_rng, c.batch_size, c.noise_dim), tau,
                                       c.train_mode, gumbel_rng)
                d_opt.zero_grad()
                p_real = D(Tensor(real_onehot[idx]))
                p_fake = D(fake)
                d_loss = discriminator_loss(p_real, p_fake)
                d_loss.backward()
                d_opt.step()
            for _ in range(c.g_steps):
                g_opt.zero_grad()
                fake = gen_forward(G, sample_noise(noise_rng, c.batch_size, c.noise_dim), tau,
                                   c.train_mode, gumbel_rng)
                g_loss = gen_loss(D, fake)
                g_loss.backward()
                g_opt.step()
                D.zero_grad()
        except NumericError as exc:
            raise TrainingError(f"non-finite values at step {step}: {exc}", step=step) from exc
        row = (
            step,
            d_loss.item(),
            g_loss.item(),
            float(p_real.data.mean()),
            float(p_fake.data.mean()),
            tau,
        )
        if not (math.isfinite(row[1]) and math.isfinite(row[2])):
            raise TrainingError(f"GAN loss became non-finite at step {step}", step=step)
        curve.rows.append(row)
        low_streak = low_streak + 1 if row[4] < COLLAPSE_THRESHOLD else 0
        if low_streak >= COLLAPSE_PATIENCE and curve.collapse_warning is None:
            curve.collapse_warning = (
                f"mean D(fake) below {COLLAPSE_THRESHOLD} for {COLLAPSE_PATIENCE} iterations "
                f"ending at step {step}; the generator may have collapsed"
            )
        if callback is not None:
            callback(step, row)
    return curve


def sample_ids(G, n, tau, seed=0, batch_size=4096):
    """``n`` hard samples from ``G`` as an ``[n, seq_len]`` id array."""
    noise_rng, gumbel_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    chunks = []
    with no_grad():
        for start in range(0, n, batch_size):
            m = min(batch_size, n - start)
            y = gen_forward(G, sample_noise(noise_rng, m, G.config.noise_dim), tau, HARD, gumbel_rng)
            chunks.append(np.argmax(y.data, axis=-1))
    if not chunks:
        return np.zeros((0, G.config.seq_len), dtype=np.int64)
    return np.concatenate(chunks).astype(np.int64)


class GanModel:
    """Generator and discriminator trained together, plus their shared config."""

    def __init__(self, config, seed=0):
        g_seed, d_seed = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(2))
        self.config = config
        self.generator = Generator(config, seed=g_seed)
        self.discriminator = Discriminator(config, seed=d_seed)

    def state_dict(self):
        out = {"generator." + k: v for k, v in self.generator.state_dict().items()}
        out.update({"discriminator." + k: v for k, v in self.discriminator.state_dict().items()})
        return out

    def load_state_dict(self, state):
        parts = {"generator.": {}, "discriminator.": {}}
        for k, v in state.items():
            for prefix, bucket in parts.items():
                if k.startswith(prefix):
                    bucket[k[len(prefix):]] = v
                    break
            else:
                raise ValueError(f"unexpected parameter {k!r}")
        self.generator.load_state_dict(parts["generator."])
        self.discriminator.load_state_dict(parts["discriminator."])
