"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numbers

import numpy as np


def check_text_lines(X, name="X"):
    """Return ``X`` as a non-empty list of strings.

    A single string counts as one line. Anything else must be an iterable of
    strings.
    """
    if isinstance(X, str):
        X = [X]
    try:
        lines = list(X)
    except TypeError:
        raise TypeError(f"{name} must be a string or an iterable of strings, got {type(X).__name__}") from None
    bad = [type(s).__name__ for s in lines if not isinstance(s, str)]
    if bad:
        raise TypeError(f"{name} must contain only strings, found {bad[0]}")
    if not lines:
        raise ValueError(f"{name} is empty")
    return lines


def check_positive_int(value, name, allow_zero=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    lo = 0 if allow_zero else 1
    if value < lo:
        raise ValueError(f"{name} must be >= {lo}, got {value}")
    return int(value)


def check_seed(random_state):
    """Integer seed for the package's seeded helpers.

    ``None`` is refused on purpose: every run must be reproducible.
    """
    if random_state is None:
        raise ValueError("random_state must be an explicit integer seed")
    return check_positive_int(random_state, "random_state", allow_zero=True)


def check_id_sequences(X, vocab_size, name="X"):
    """Validate a list of token-id sequences against ``vocab_size``."""
    out = []
    for i, seq in enumerate(X):
        arr = np.asarray(seq)
        if arr.ndim != 1 or (arr.size and not np.issubdtype(arr.dtype, np.integer)):
            raise ValueError(f"{name}[{i}] must be a 1-D integer sequence")
        if arr.size and (arr.min() < 0 or arr.max() >= vocab_size):
            raise IndexError(f"{name}[{i}] holds ids outside [0, {vocab_size})")
        out.append([int(t) for t in arr])
    if not out:
        raise ValueError(f"{name} is empty")
    return out
