"""Exact GAN quantities on small, fully enumerable sequence distributions.

A :class:`ToyDistribution` is a dense probability table over every sequence
of length ``L`` drawn from ``V`` symbols, so expectations are finite sums and
the optimal discriminator, the Jensen-Shannon divergence and the value of the
game at that discriminator can all be computed exactly.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import InternalConsistencyError
from .gan import sample_ids

NORM_TOL = 1e-12
IDENTITY_TOL = 1e-10
MAX_TABLE = 6**4


class ToyDistribution:
    """Probability table of shape ``(V,) * L``; entry ``[x1, ..., xL]`` is ``p(x)``."""

    def __init__(self, table):
        table = np.array(table, dtype=np.float64)
        if table.ndim < 1:
            raise ValueError("table needs at least one axis")
        if len(set(table.shape)) != 1:
            raise ValueError(f"every axis must have the same size, got {table.shape}")
        if table.size > MAX_TABLE:
            raise ValueError(f"table of {table.size} entries is too large for exact enumeration")
        if np.any(table < 0) or not np.all(np.isfinite(table)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(table.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities sum to {table.sum()!r}, not 1")
        self.table = table

    @property
    def length(self):
        return self.table.ndim

    @property
    def vocab_size(self):
        return self.table.shape[0]

    def prob(self, x):
        return float(self.table[tuple(int(i) for i in x)])

    def sequences(self):
        return itertools.product(range(self.vocab_size), repeat=self.length)

    def sample(self, n, rng):
        flat = rng.choice(self.table.size, size=n, p=self.table.reshape(-1))
        return np.stack(np.unravel_index(flat, self.table.shape), axis=-1)

    @classmethod
    def from_counts(cls, counts):
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise ValueError("no counts to normalise")
        table = counts / total
        # push the rounding residue into the largest cell so the sum is 1
        flat = table.reshape(-1)
        flat[np.argmax(flat)] += 1.0 - flat.sum()
        return cls(flat.reshape(counts.shape))

    @classmethod
    def from_samples(cls, samples, vocab_size):
        samples = np.asarray(samples, dtype=np.int64)
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ValueError("need a non-empty [n, L] array of samples")
        counts = np.zeros((vocab_size,) * samples.shape[1])
        np.add.at(counts, tuple(samples.T), 1.0)
        return cls.from_counts(counts)

    @classmethod
    def random(cls, rng, vocab_size, length, sparsity=0.0):
        """Dirichlet-random table; ``sparsity`` is the chance a cell is zeroed."""
        table = rng.dirichlet(np.ones(vocab_size**length)).reshape((vocab_size,) * length)
        if sparsity > 0:
            keep = rng.random(table.shape) >= sparsity
            keep.reshape(-1)[rng.integers(table.size)] = True
            table = table * keep
            table /= table.sum()
        return cls.from_counts(table)


def _check_pair(p, q):
    if p.table.shape != q.table.shape:
        raise ValueError(f"distributions have different shapes {p.table.shape} and {q.table.shape}")


def optimal_discriminator(p_data, p_g, x):
    """``p_data(x) / (p_data(x) + p_g(x))``, and 0.5 where both are zero."""
    a, b = p_data.prob(x), p_g.prob(x)
    if a + b == 0.0:
        return 0.5
    return a / (a + b)


def optimal_discriminator_table(p_data, p_g):
    _check_pair(p_data, p_g)
    a, b = p_data.table, p_g.table
    s = a + b
    return np.where(s > 0, a / np.where(s > 0, s, 1.0), 0.5)


def _xlogy_ratio(p, q):
    """``sum p * log(p / q)`` with ``0 * log 0 = 0``."""
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_divergence(p, q):
    _check_pair(p, q)
    if np.any((p.table > 0) & (q.table == 0)):
        return math.inf
    return _xlogy_ratio(p.table, q.table)


def js_divergence(p, q):
    """Jensen-Shannon divergence in nats, ``KL(p||m)/2 + KL(q||m)/2``."""
    _check_pair(p, q)
    m = 0.5 * (p.table + q.table)
    return 0.5 * _xlogy_ratio(p.table, m) + 0.5 * _xlogy_ratio(q.table, m)


def game_value(p_data, p_g, d_table):
    """``E_data[log D] + E_G[log(1 - D)]`` for a discriminator table ``d_table``.

    Cells with zero probability contribute nothing, even where the log is
    infinite.
    """
    _check_pair(p_data, p_g)
    a, b = p_data.table, p_g.table
    real = a > 0
    fake = b > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(a[real] * np.log(d_table[real])) + np.sum(b[fake] * np.log1p(-d_table[fake])))


def value_at_optimal_d(p_data, p_g):
    """The game value at the optimal discriminator, computed two ways.

    Returns ``(direct, via_js)``: the direct expectation with the optimal
    discriminator plugged in, and ``-log 4 + 2 * JS(p_data || p_g)``. Raises
    :class:`InternalConsistencyError` when they differ by more than 1e-10.
    """
    direct = game_value(p_data, p_g, optimal_discriminator_table(p_data, p_g))
    via_js = -math.log(4.0) + 2.0 * js_divergence(p_data, p_g)
    if abs(direct - via_js) > IDENTITY_TOL:
        raise InternalConsistencyError(
            f"game value mismatch: direct={direct!r} vs -log 4 + 2 JS={via_js!r}"
        )
    return direct, via_js


def population_disc_loss(p_data, p_g, d_table):
    """Expected discriminator loss, the negated game value."""
    return -game_value(p_data, p_g, d_table)


def empirical_distribution(G, n_samples, seed=0, tau=1.0):
    """Sequence frequencies of ``n_samples`` hard samples from generator ``G``."""
    if n_samples <= 0:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    c = G.config
    if c.vocab_size**c.seq_len > MAX_TABLE:
        raise ValueError(
            f"{c.vocab_size}**{c.seq_len} sequences is too many to tabulate exactly"
        )
    return ToyDistribution.from_samples(sample_ids(G, n_samples, tau, seed=seed), c.vocab_size)
