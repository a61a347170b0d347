"""GPT-style causal decoder-only language model on the autodiff core."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import tensor as T
from .data import Dataset, pad_batch
from .errors import NumericError, SequenceLengthError, TrainingError
from .optim import Adam, OptimizerConfig
from .tensor import Tensor, no_grad
from .tokenizer import BOS, EOS


@dataclass(frozen=True)
class LmConfig:
    n_layer: int = 4
    n_head: int = 4
    d_model: int = 64
    d_ff: int = 256
    max_seq_len: int = 64
    vocab_size: int = 64
    dropout_rate: float = 0.0
    init_std: float = 0.02

    def __post_init__(self):
        problems = []
        for name in ("n_layer", "n_head", "d_model", "d_ff", "max_seq_len"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.vocab_size < 5:
            problems.append(f"vocab_size must be >= 5, got {self.vocab_size}")
        if self.n_head >= 1 and self.d_model % self.n_head:
            problems.append(f"d_model={self.d_model} is not divisible by n_head={self.n_head}")
        if not 0.0 <= self.dropout_rate < 1.0:
            problems.append(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.init_std <= 0:
            problems.append(f"init_std must be positive, got {self.init_std}")
        if problems:
            raise ValueError("; ".join(problems))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in kinds:
                raise ValueError(f"unknown LmConfig field {k!r}")
            out[k] = float(v) if kinds[k] in ("float", float) else int(v)
        return cls(**out)


def parameter_shapes(config):
    """Ordered ``name -> shape`` map; fully determined by the config."""
    d, ff, c = config.d_model, config.d_ff, config
    shapes = {"wte": (c.vocab_size, d), "wpe": (c.max_seq_len, d)}
    for i in range(c.n_layer):
        p = f"h.{i}."
        shapes.update(
            {
                p + "ln_1.weight": (d,),
                p + "ln_1.bias": (d,),
                p + "attn.c_attn.weight": (d, 3 * d),
                p + "attn.c_attn.bias": (3 * d,),
                p + "attn.c_proj.weight": (d, d),
                p + "attn.c_proj.bias": (d,),
                p + "ln_2.weight": (d,),
                p + "ln_2.bias": (d,),
                p + "mlp.c_fc.weight": (d, ff),
                p + "mlp.c_fc.bias": (ff,),
                p + "mlp.c_proj.weight": (ff, d),
                p + "mlp.c_proj.bias": (d,),
            }
        )
    shapes["ln_f.weight"] = (d,)
    shapes["ln_f.bias"] = (d,)
    return shapes


def n_parameters(config):
    return int(sum(math.prod(s) for s in parameter_shapes(config).values()))


class LmModel:
    """Parameters of the language model plus its config.

    The output projection reuses the token embedding table (weight tying).
    Residual-branch output projections start with a smaller std,
    ``init_std / sqrt(2 * n_layer)``.
    """

    def __init__(self, config, seed=0):
        self.config = config
        rng = np.random.default_rng(seed)
        resid_std = config.init_std / math.sqrt(2 * config.n_layer)
        self.params = {}
        for name, shape in parameter_shapes(config).items():
            if name.endswith("ln_1.weight") or name.endswith("ln_2.weight") or name == "ln_f.weight":
                data = np.ones(shape)
            elif name.endswith(".bias"):
                data = np.zeros(shape)
            elif name.endswith("c_proj.weight"):
                data = rng.normal(0.0, resid_std, shape)
            else:
                data = rng.normal(0.0, config.init_std, shape)
            self.params[name] = Tensor(data, requires_grad=True, name=name)

    def parameters(self):
        return list(self.params.values())

    def named_parameters(self):
        return list(self.params.items())

    def state_dict(self):
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state):
        expected = parameter_shapes(self.config)
        if set(state) != set(expected):
            missing = sorted(set(expected) - set(state))
            extra = sorted(set(state) - set(expected))
            raise ValueError(f"parameter mismatch: missing={missing} unexpected={extra}")
        for k, shape in expected.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{k}: expected shape {shape}, got {arr.shape}")
            self.params[k].data = arr.copy()

    def copy(self):
        other = LmModel.__new__(LmModel)
        other.config = self.config
        other.params = {k: Tensor(v.data.copy(), requires_grad=True, name=k) for k, v in self.params.items()}
        return other

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def _check_ids(model, ids):
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    if ids.ndim != 2:
        raise ValueError(f"ids must be [B, T], got shape {ids.shape}")
    if ids.shape[1] == 0:
        raise SequenceLengthError("empty input sequence")
    if ids.shape[1] > model.config.max_seq_len:
        raise SequenceLengthError(
            f"sequence length {ids.shape[1]} exceeds max_seq_len={model.config.max_seq_len}"
        )
    if ids.min() < 0 or ids.max() >= model.config.vocab_size:
        raise IndexError(f"token id outside vocabulary of size {model.config.vocab_size}")
    return ids


def _attention(x, p, prefix, n_head, mask, drop):
    B, L, d = x.shape
    dh = d // n_head
    qkv = x @ p[prefix + "c_attn.weight"] + p[prefix + "c_attn.bias"]
    qkv = qkv.reshape(B, L, 3, n_head, dh).transpose(2, 0, 3, 1, 4)
    q, k, v = qkv[0], qkv[1], qkv[2]
    att = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(dh))
    att = drop(T.softmax(att, where=mask))
    y = (att @ v).transpose(0, 2, 1, 3).reshape(B, L, d)
    return y @ p[prefix + "c_proj.weight"] + p[prefix + "c_proj.bias"]


def lm_forward(model, ids, train=False, rng=None):
    """Logits ``[B, T, V]`` for next-token prediction at every position.

    Position ``t`` only attends to positions ``<= t``, so its logits are
    unaffected by anything later in the sequence.
    """
    ids = _check_ids(model, ids)
    c, p = model.config, model.params
    B, L = ids.shape
    if train and c.dropout_rate > 0:
        rng = rng if rng is not None else np.random.default_rng()

        def drop(t):
            return T.dropout(t, c.dropout_rate, rng)

    else:

        def drop(t):
            return t

    mask = np.tril(np.ones((L, L), dtype=bool))
    x = T.embedding_lookup(p["wte"], ids) + p["wpe"][:L]
    x = drop(x)
    for i in range(c.n_layer):
        pre = f"h.{i}."
        h = T.layernorm(x, p[pre + "ln_1.weight"], p[pre + "ln_1.bias"])
        x = x + drop(_attention(h, p, pre + "attn.", c.n_head, mask, drop))
        h = T.layernorm(x, p[pre + "ln_2.weight"], p[pre + "ln_2.bias"])
        h = T.gelu(h @ p[pre + "mlp.c_fc.weight"] + p[pre + "mlp.c_fc.bias"])
        x = x + drop(h @ p[pre + "mlp.c_proj.weight"] + p[pre + "mlp.c_proj.bias"])
    x = T.layernorm(x, p["ln_f.weight"], p["ln_f.bias"])
    return x @ T.transpose(p["wte"])


def _shift(ids, lengths):
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    if ids.shape[1] < 2:
        raise SequenceLengthError("language-model loss needs sequences of length >= 2")
    if lengths is None:
        lengths = np.full(ids.shape[0], ids.shape[1])
    lengths = np.asarray(lengths)
    weights = (np.arange(ids.shape[1] - 1)[None, :] + 1 < lengths[:, None]).astype(np.float64)
    return ids[:, :-1], ids[:, 1:], weights


def lm_loss(model, ids, lengths=None, train=False, rng=None):
    """Mean next-token negative log-likelihood over every scored position.

    ``lengths`` marks where each padded row really ends; targets beyond it get
    zero weight. Without ``lengths`` every position is scored.
    """
    inputs, targets, weights = _shift(ids, lengths)
    logits = lm_forward(model, inputs, train=train, rng=rng)
    V = model.config.vocab_size
    return T.cross_entropy(logits.reshape(-1, V), targets.reshape(-1), weights.reshape(-1))


def _nll_sum(model, sequences, batch_size=64):
    """Summed NLL, token count and correct-argmax count over ``sequences``."""
    total, count, correct = 0.0, 0, 0
    seqs = [s for s in sequences if len(s) >= 2]
    with no_grad():
        for start in range(0, len(seqs), batch_size):
            ids, lengths = pad_batch(seqs[start : start + batch_size])
            inputs, targets, weights = _shift(ids, lengths)
            logits = lm_forward(model, inputs).data
            z = logits - logits.max(axis=-1, keepdims=True)
            logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
            picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
            total += float(-(picked * weights).sum())
            count += int(weights.sum())
            correct += int(((logits.argmax(axis=-1) == targets) * weights).sum())
    if count == 0:
        raise ValueError("evaluation set has no scorable positions (need sequences of length >= 2)")
    return total, count, correct


def perplexity(model, eval_set):
    """``exp`` of the token-weighted mean NLL over ``eval_set``."""
    total, count, _ = _nll_sum(model, list(eval_set))
    return math.exp(total / count)


def next_token_accuracy(model, eval_set):
    """Fraction of positions where the argmax prediction is the true next token.

    Ties go to the lowest id.
    """
    _, count, correct = _nll_sum(model, list(eval_set))
    return correct / count


@dataclass
class TrainingCurve:
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    learning_rates: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def append(self, step, loss, lr):
        self.steps.append(int(step))
        self.losses.append(float(loss))
        self.learning_rates.append(float(lr))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "loss", "learning_rate"])
            for row in zip(self.steps, self.losses, self.learning_rates):
                w.writerow([row[0], repr(row[1]), repr(row[2])])

    @classmethod
    def from_csv(cls, path):
        curve = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                curve.append(int(row["step"]), float(row["loss"]), float(row["learning_rate"]))
        return curve


def train_lm(model, corpus, opt=None, steps=500, seed=0, callback=None):
    """Fit ``model`` to ``corpus`` by maximum likelihood with Adam.

    Each step draws a batch of ``opt.batch_size`` sequences without
    replacement (the whole corpus when it is smaller). All randomness comes
    from ``seed``; two calls with identical inputs give identical parameters.
    ``callback(step, model, loss)`` runs after every update.
    """
    opt = opt or OptimizerConfig()
    seqs = [s for s in corpus if len(s) >= 2]
    if not seqs:
        raise ValueError("training corpus has no sequences of length >= 2")
    too_long = max(len(s) for s in seqs)
    if too_long > model.config.max_seq_len + 1:
        raise SequenceLengthError(
            f"corpus holds a sequence of length {too_long}; at most max_seq_len + 1 "
            f"= {model.config.max_seq_len + 1} fits"
        )
    curve = TrainingCurve()
    if steps <= 0:
        return curve
    batch_rng, drop_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    optimizer = Adam(model.parameters(), opt)
    bs = min(opt.batch_size, len(seqs))
    for step in range(steps):
        if bs == len(seqs):
            batch = seqs
        else:
            batch = [seqs[i] for i in batch_rng.choice(len(seqs), size=bs, replace=False)]
        ids, lengths = pad_batch(batch)
        optimizer.zero_grad()
        try:
            loss = lm_loss(model, ids, lengths, train=True, rng=drop_rng)
        except NumericError as exc:
            raise TrainingError(f"non-finite values at step {step}: {exc}", step=step) from exc
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingError(f"language-model loss became {value} at step {step}", step=step)
        loss.backward()
        lr = optimizer.step()
        curve.append(step, value, lr)
        if callback is not None:
            callback(step, model, value)
    return curve


def generate(model, prefix=(), max_new=32, temperature=1.0, seed=0):
    """Ancestral sampling from the model, one token at a time.

    An empty prefix starts from BOS. ``temperature <= 0`` selects the argmax
    (greedy decoding, independent of ``seed``). Stops after emitting EOS,
    after ``max_new`` tokens, or when the context is full.
    """
    out = [int(i) for i in prefix] or [BOS]
    if len(out) >= model.config.max_seq_len:
        raise SequenceLengthError(
            f"prefix length {len(out)} leaves no room under max_seq_len={model.config.max_seq_len}"
        )
    rng = np.random.default_rng(seed)
    with no_grad():
        for _ in range(max_new):
            if len(out) >= model.config.max_seq_len:
                break
            logits = lm_forward(model, np.array(out)[None, :]).data[0, -1]
            if temperature <= 0:
                nxt = int(np.argmax(logits))
            else:
                z = logits / temperature
                z = z - z.max()
                probs = np.exp(z)
                probs /= probs.sum()
                nxt = int(rng.choice(len(probs), p=probs))
            out.append(nxt)
            if nxt == EOS:
                break
    return out


__all__ = [
    "Dataset",
    "LmConfig",
    "LmModel",
    "TrainingCurve",
    "generate",
    "lm_forward",
    "lm_loss",
    "n_parameters",
    "next_token_accuracy",
    "parameter_shapes",
    "perplexity",
    "train_lm",
]
