"""scikit-learn style wrappers around the language model and the text GAN.

Both estimators take raw text lines in ``fit`` and keep the fitted character
tokenizer as ``tokenizer_``, so a GAN and a language model can share one
vocabulary by passing ``vocab=`` at fit time.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .augment import merge, synthesize
from .data import Dataset
from .gan import GanConfig, GanModel, sample_ids, train_gan
from .lm import LmConfig, LmModel, generate, lm_forward, next_token_accuracy, perplexity, train_lm
from .optim import OptimizerConfig
from .tensor import no_grad
from .tokenizer import BOS, CharTokenizer
from .validation import check_positive_int, check_seed, check_text_lines


def _tokenizer(X, vocab):
    tok = CharTokenizer()
    if vocab is None:
        return tok.fit(X)
    tok.vocab_ = vocab
    tok.n_tokens_ = len(vocab)
    return tok


class TransformerLM(BaseEstimator):
    """Causal character-level transformer trained by maximum likelihood.

    Parameters mirror :class:`textgan.lm.LmConfig` and
    :class:`textgan.optim.OptimizerConfig`; ``steps`` is the number of Adam
    updates performed by :meth:`fit`.

    Examples
    --------
    >>> lm = TransformerLM(n_layer=1, d_model=8, n_head=2, d_ff=16, steps=2)
    >>> lm = lm.fit(["abc", "abd"])
    >>> lm.perplexity(["abc"]) > 1.0
    True
    """

    def __init__(
        self,
        n_layer=4,
        n_head=4,
        d_model=64,
        d_ff=256,
        max_seq_len=64,
        dropout_rate=0.0,
        init_std=0.02,
        lr=3e-4,
        warmup_steps=100,
        batch_size=16,
        steps=500,
        random_state=0,
    ):
        self.n_layer = n_layer
        self.n_head = n_head
        self.d_model = d_model
        self.d_ff = d_ff
        self.max_seq_len = max_seq_len
        self.dropout_rate = dropout_rate
        self.init_std = init_std
        self.lr = lr
        self.warmup_steps = warmup_steps
        self.batch_size = batch_size
        self.steps = steps
        self.random_state = random_state

    def _optimizer(self):
        return OptimizerConfig(lr=self.lr, warmup_steps=self.warmup_steps, batch_size=self.batch_size)

    def _dataset(self, X):
        return Dataset.from_texts(check_text_lines(X), self.tokenizer_.vocab_, max_len=self.max_seq_len)

    def fit(self, X, y=None, vocab=None):
        """Build the vocabulary (unless ``vocab`` is given) and train from scratch."""
        X = check_text_lines(X)
        seed = check_seed(self.random_state)
        check_positive_int(self.steps, "steps", allow_zero=True)
        self.tokenizer_ = _tokenizer(X, vocab)
        config = LmConfig(
            n_layer=self.n_layer,
            n_head=self.n_head,
            d_model=self.d_model,
            d_ff=self.d_ff,
            max_seq_len=self.max_seq_len,
            vocab_size=self.tokenizer_.n_tokens_,
            dropout_rate=self.dropout_rate,
            init_std=self.init_std,
        )
        init_seed, train_seed = np.random.SeedSequence(seed).generate_state(2)
        self.model_ = LmModel(config, seed=int(init_seed))
        self.curve_ = train_lm(self.model_, self._dataset(X), self._optimizer(), steps=self.steps,
                               seed=int(train_seed))
        return self

    def partial_fit(self, X, y=None, steps=None, seed=None):
        """Continue training the fitted model on ``X`` (fresh optimizer state)."""
        check_is_fitted(self, "model_")
        steps = self.steps if steps is None else check_positive_int(steps, "steps", allow_zero=True)
        seed = check_seed(self.random_state if seed is None else seed)
        curve = train_lm(self.model_, self._dataset(X), self._optimizer(), steps=steps, seed=seed)
        self.curve_ = curve
        return self

    def augment_fit(self, X, generator, n_synthetic, steps=None, tau=0.3, seed=0):
        """Fine-tune on ``X`` merged with ``n_synthetic`` samples of a fitted :class:`GumbelTextGAN`."""
        check_is_fitted(self, "model_")
        check_is_fitted(generator, "model_")
        if generator.tokenizer_.vocab_ != self.tokenizer_.vocab_:
            raise ValueError("the generator was fitted on a different vocabulary")
        real = self._dataset(X)
        synth = synthesize(generator.model_.generator, self.tokenizer_.vocab_, n_synthetic, tau, seed,
                           max_len=self.max_seq_len)
        self.augmented_ = merge(real, synth, shuffle_seed=seed)
        steps = self.steps if steps is None else steps
        self.curve_ = train_lm(self.model_, self.augmented_, self._optimizer(), steps=steps, seed=seed)
        return self

    def predict(self, X):
        """Greedy next-token predictions, one id array per line (positions after BOS ... last char)."""
        check_is_fitted(self, "model_")
        out = []
        with no_grad():
            for seq in self._dataset(X):
                logits = lm_forward(self.model_, np.asarray(seq[:-1])[None, :]).data[0]
                out.append(np.argmax(logits, axis=-1))
        return out

    def score(self, X, y=None):
        """Next-token accuracy on ``X`` (higher is better)."""
        check_is_fitted(self, "model_")
        return next_token_accuracy(self.model_, self._dataset(X))

    def perplexity(self, X):
        check_is_fitted(self, "model_")
        return perplexity(self.model_, self._dataset(X))

    def sample(self, n=1, max_new=None, temperature=1.0, seed=0):
        """``n`` generated lines, decoded to text."""
        check_is_fitted(self, "model_")
        max_new = self.max_seq_len - 1 if max_new is None else max_new
        rng = np.random.SeedSequence(check_seed(seed))
        seeds = rng.generate_state(check_positive_int(n, "n"))
        return [
            self.tokenizer_.vocab_.decode(generate(self.model_, [BOS], max_new, temperature, int(s)))
            for s in seeds
        ]


class GumbelTextGAN(BaseEstimator):
    """Fixed-length sequence GAN trained through the Gumbel-Softmax relaxation.

    Parameters mirror :class:`textgan.gan.GanConfig`; ``steps`` is the number
    of discriminator/generator iterations performed by :meth:`fit`.
    """

    def __init__(
        self,
        seq_len=16,
        noise_dim=16,
        g_hidden=128,
        d_embed=32,
        d_hidden=64,
        batch_size=64,
        lr_g=1e-4,
        lr_d=1e-4,
        init_std=0.5,
        train_mode="soft",
        tau_start=1.0,
        tau_end=0.3,
        tau_decay=1e-3,
        steps=1000,
        random_state=0,
    ):
        self.seq_len = seq_len
        self.noise_dim = noise_dim
        self.g_hidden = g_hidden
        self.d_embed = d_embed
        self.d_hidden = d_hidden
        self.batch_size = batch_size
        self.lr_g = lr_g
        self.lr_d = lr_d
        self.init_std = init_std
        self.train_mode = train_mode
        self.tau_start = tau_start
        self.tau_end = tau_end
        self.tau_decay = tau_decay
        self.steps = steps
        self.random_state = random_state

    def fit(self, X, y=None, vocab=None):
        X = check_text_lines(X)
        seed = check_seed(self.random_state)
        check_positive_int(self.steps, "steps", allow_zero=True)
        self.tokenizer_ = _tokenizer(X, vocab)
        config = GanConfig(
            vocab_size=self.tokenizer_.n_tokens_,
            seq_len=self.seq_len,
            noise_dim=self.noise_dim,
            g_hidden=self.g_hidden,
            d_embed=self.d_embed,
            d_hidden=self.d_hidden,
            batch_size=self.batch_size,
            lr_g=self.lr_g,
            lr_d=self.lr_d,
            init_std=self.init_std,
            train_mode=self.train_mode,
            tau_start=self.tau_start,
            tau_end=self.tau_end,
            tau_decay=self.tau_decay,
        )
        init_seed, train_seed = np.random.SeedSequence(seed).generate_state(2)
        self.model_ = GanModel(config, seed=int(init_seed))
        real = Dataset.from_texts(X, self.tokenizer_.vocab_)
        self.curve_ = train_gan(self.model_.generator, self.model_.discriminator, real, config,
                                steps=self.steps, seed=int(train_seed))
        return self

    def sample_ids(self, n, tau=None, seed=0):
        """``[n, seq_len]`` array of hard-sampled token ids."""
        check_is_fitted(self, "model_")
        tau = self.tau_end if tau is None else tau
        return sample_ids(self.model_.generator, check_positive_int(n, "n", allow_zero=True), tau, seed=seed)

    def sample(self, n, tau=None, seed=0):
        """``n`` generated lines, decoded to text (reserved ids dropped, cut at EOS)."""
        return [self.tokenizer_.vocab_.decode(row) for row in self.sample_ids(n, tau, seed)]
