"""Character-level vocabulary shared by the language model and GAN decode path."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")


@dataclass(frozen=True)
class Vocab:
    """Ordered token list; a token's position is its id.

    The first four entries are always the reserved tokens, so ids 0-3 mean the
    same thing in every vocabulary.
    """

    tokens: tuple
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        if tokens[: len(RESERVED)] != RESERVED:
            raise ValueError("vocabulary must start with the reserved tokens " + ", ".join(RESERVED))
        if len(tokens) < len(RESERVED) + 1:
            raise ValueError("vocabulary needs at least one non-reserved token")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(tokens)})

    def __len__(self):
        return len(self.tokens)

    @property
    def token_to_id(self):
        return dict(self._index)

    @property
    def id_to_token(self):
        return list(self.tokens)

    def encode(self, text):
        """``[BOS] + ids(text) + [EOS]``; characters outside the vocab map to UNK."""
        index = self._index
        return [BOS] + [index.get(ch, UNK) for ch in text] + [EOS]

    def decode(self, ids):
        """Text of ``ids`` up to the first EOS, with reserved tokens dropped."""
        n = len(self.tokens)
        chars = []
        for i in ids:
            i = int(i)
            if i < 0 or i >= n:
                raise IndexError(f"token id {i} outside vocabulary of size {n}")
            if i == EOS:
                break
            if i >= len(RESERVED):
                chars.append(self.tokens[i])
        return "".join(chars)

    def save(self, path):
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path):
        text = Path(path).read_text(encoding="utf-8")
        if not text.endswith("\n"):
            raise ValueError(f"{path}: vocabulary file must end with a newline")
        return cls(tuple(text[:-1].split("\n")))


def corpus_lines(text):
    """Split raw corpus text into lines, dropping empty ones."""
    return [line for line in text.splitlines() if line]


def build_vocab(corpus_text):
    """Vocabulary of every distinct character in ``corpus_text``, sorted.

    Line separators never become tokens because datasets are stored one
    sequence per line.
    """
    chars = sorted(set("".join(corpus_lines(corpus_text))))
    if not chars:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    return Vocab(RESERVED + tuple(chars))


def is_valid_sequence(ids, vocab_size):
    """True when ``ids`` satisfies the token-sequence layout rules.

    Every id is in range, BOS only appears first, and anything after the first
    EOS is PAD.
    """
    seen_eos = False
    for pos, i in enumerate(ids):
        if not 0 <= i < vocab_size:
            return False
        if seen_eos and i != PAD:
            return False
        if i == BOS and pos != 0:
            return False
        if i == EOS:
            seen_eos = True
    return True


class CharTokenizer(TransformerMixin, BaseEstimator):
    """Fit a character vocabulary on text lines; transform lines to id lists.

    Examples
    --------
    >>> tok = CharTokenizer().fit(["abba"])
    >>> tok.transform(["ab"])
    [[1, 4, 5, 2]]
    >>> tok.inverse_transform([[1, 4, 5, 2]])
    ['ab']
    """

    def __init__(self, vocab_path=None):
        self.vocab_path = vocab_path

    def fit(self, X, y=None):
        if self.vocab_path is not None:
            self.vocab_ = Vocab.load(self.vocab_path)
        else:
            if isinstance(X, str):
                X = [X]
            self.vocab_ = build_vocab("\n".join(X))
        self.n_tokens_ = len(self.vocab_)
        return self

    def transform(self, X):
        check_is_fitted(self, "vocab_")
        if isinstance(X, str):
            X = [X]
        return [self.vocab_.encode(s) for s in X]

    def inverse_transform(self, X):
        check_is_fitted(self, "vocab_")
        return [self.vocab_.decode(ids) for ids in X]
