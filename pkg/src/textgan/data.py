"""Token-sequence datasets with per-sequence provenance tags."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .tokenizer import PAD

REAL = "real"
SYNTHETIC = "synthetic"
_TAGS = (REAL, SYNTHETIC)


class Dataset:
    """An ordered collection of token sequences, each tagged real or synthetic.

    Sequences are stored as tuples of ints and never mutated. ``vocab`` is
    kept as a reference so that merging two datasets can refuse mismatched
    vocabularies.
    """

    def __init__(self, sequences=(), tags=None, vocab=None, max_len=None):
        seqs = []
        for s in sequences:
            s = tuple(int(i) for i in s)
            if max_len is not None:
                s = s[:max_len]
            seqs.append(s)
        if tags is None:
            tags = [REAL] * len(seqs)
        tags = list(tags)
        if len(tags) != len(seqs):
            raise ValueError(f"{len(seqs)} sequences but {len(tags)} provenance tags")
        bad = sorted({t for t in tags if t not in _TAGS})
        if bad:
            raise ValueError(f"unknown provenance tags: {bad}")
        if vocab is not None:
            n = len(vocab)
            for s in seqs:
                if any(i < 0 or i >= n for i in s):
                    raise IndexError(f"sequence {s} has ids outside vocabulary of size {n}")
        self.sequences = seqs
        self.tags = tags
        self.vocab = vocab

    @classmethod
    def from_texts(cls, texts, vocab, tag=REAL, max_len=None):
        seqs = [vocab.encode(t) for t in texts]
        return cls(seqs, [tag] * len(seqs), vocab=vocab, max_len=max_len)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.sequences == other.sequences and self.tags == other.tags

    def __repr__(self):
        counts = {t: self.tags.count(t) for t in _TAGS}
        return f"Dataset(n={len(self)}, real={counts[REAL]}, synthetic={counts[SYNTHETIC]})"

    def count(self, tag):
        return self.tags.count(tag)

    def n_tokens(self):
        return int(np.sum([len(s) for s in self.sequences]))

    def subset(self, indices):
        return Dataset(
            [self.sequences[i] for i in indices], [self.tags[i] for i in indices], vocab=self.vocab
        )

    def texts(self):
        if self.vocab is None:
            raise ValueError("dataset has no vocabulary to decode with")
        return [self.vocab.decode(s) for s in self.sequences]

    def save(self, path):
        """Write decoded text, one sequence per line, plus ``<path>.tags``."""
        path = Path(path)
        path.write_text("".join(t + "\n" for t in self.texts()), encoding="utf-8")
        tags_path(path).write_text("".join(t + "\n" for t in self.tags), encoding="utf-8")

    @classmethod
    def load(cls, path, vocab, max_len=None):
        path = Path(path)
        lines = path.read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        sidecar = tags_path(path)
        if sidecar.exists():
            tags = sidecar.read_text(encoding="utf-8").split()
        else:
            tags = [REAL] * len(lines)
        seqs = [vocab.encode(t) for t in lines]
        return cls(seqs, tags, vocab=vocab, max_len=max_len)


def tags_path(path):
    path = Path(path)
    return path.with_name(path.name + ".tags")


def pad_batch(sequences):
    """Stack variable-length sequences into ``[B, T]`` ids and a length vector.

    Short rows are filled with PAD. Positions beyond a row's length are
    identified by the returned lengths, not by the PAD id, so PAD tokens that
    occur inside a sequence are still scored.
    """
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    ids = np.full((len(sequences), int(lengths.max())), PAD, dtype=np.int64)
    for row, s in enumerate(sequences):
        ids[row, : len(s)] = s
    return ids, lengths
