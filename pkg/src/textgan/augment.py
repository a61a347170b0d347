"""Synthetic text from a trained generator, dataset merging, augmented fine-tuning."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .data import REAL, SYNTHETIC, Dataset, pad_batch
from .gan import sample_ids
from .lm import LmModel, lm_loss, next_token_accuracy, perplexity, train_lm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentPlan:
    n_synthetic: int = 0
    tau: float = 0.3
    seed: int = 0
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.n_synthetic < 0:
            raise ValueError(f"n_synthetic must be >= 0, got {self.n_synthetic}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def synthesize(G, vocab, n, tau=0.3, seed=0, max_len=None):
    """``n`` synthetic sequences from hard generator samples.

    Each sample's one-hot rows become token ids, the ids are decoded with the
    shared vocabulary (stopping at EOS, dropping reserved ids), and the text
    is encoded again into a well-formed ``[BOS, ..., EOS]`` sequence.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if G.config.vocab_size != len(vocab):
        raise ValueError(
            f"generator emits {G.config.vocab_size} classes but the vocabulary has {len(vocab)}"
        )
    ids = sample_ids(G, n, tau, seed=seed)
    texts = [vocab.decode(row) for row in ids]
    return Dataset.from_texts(texts, vocab, tag=SYNTHETIC, max_len=max_len)


def merge(real, synthetic, shuffle_seed=0):
    """Multiset union of two datasets in a seeded random order.

    Sequences and their provenance tags are carried over unchanged; nothing
    is deduplicated.
    """
    if real.vocab is not None and synthetic.vocab is not None and real.vocab != synthetic.vocab:
        raise ValueError("cannot merge datasets built on different vocabularies")
    seqs = real.sequences + synthetic.sequences
    tags = real.tags + synthetic.tags
    order = np.random.default_rng(shuffle_seed).permutation(len(seqs))
    return Dataset(
        [seqs[i] for i in order],
        [tags[i] for i in order],
        vocab=real.vocab if real.vocab is not None else synthetic.vocab,
    )


def augmented_loss(model, sequences):
    """Token-weighted mean NLL of ``sequences`` (one batch of the merged set)."""
    ids, lengths = pad_batch(list(sequences))
    return lm_loss(model, ids, lengths)


def finetune_augmented(model, d_aug, opt=None, steps=200, seed=0):
    """Continue maximum-likelihood training of ``model`` on the merged dataset.

    Same mechanics as :func:`textgan.lm.train_lm`; synthetic and real
    sequences are weighted per token alike.
    """
    if len(d_aug) == 0:
        raise ValueError("augmented dataset is empty")
    return train_lm(model, d_aug, opt, steps=steps, seed=seed)


@dataclass(frozen=True)
class ComparisonPlan:
    """One row of the comparison: a model depth, its training, optional augmentation.

    The model is trained from scratch on the real data for ``train_steps``,
    then, when ``finetune_steps > 0``, fine-tuned on real data merged with
    ``augment.n_synthetic`` generator samples (zero samples means real only).
    """

    label: str
    lm_config: object
    train_steps: int = 0
    finetune_steps: int = 0
    augment: AugmentPlan = field(default_factory=AugmentPlan)
    seed: int = 0


@dataclass
class ComparisonRow:
    model: str
    layers: int
    perplexity: float
    accuracy: float
    n_train: int = 0
    n_synthetic: int = 0


class ComparisonError(RuntimeError):
    """One or more comparison runs failed; ``failures`` maps label to exception."""

    def __init__(self, failures):
        self.failures = dict(failures)
        lines = [f"{label}: {type(e).__name__}: {e}" for label, e in self.failures.items()]
        super().__init__("comparison runs failed:\n  " + "\n  ".join(lines))


@dataclass
class ComparisonReport:
    rows: list = field(default_factory=list)

    HEADER = ("Model", "Layers", "Perplexity", "Accuracy (%)")

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "layers", "perplexity", "accuracy", "n_train", "n_synthetic"])
            for r in self.rows:
                w.writerow([r.model, r.layers, repr(r.perplexity), repr(r.accuracy), r.n_train, r.n_synthetic])

    def to_text(self):
        body = [
            (r.model, str(r.layers), f"{r.perplexity:.2f}", f"{100 * r.accuracy:.1f}") for r in self.rows
        ]
        widths = [max(len(x) for x in col) for col in zip(self.HEADER, *body)]
        fmt = "  ".join([f"{{:<{widths[0]}}}"] + [f"{{:>{w}}}" for w in widths[1:]])
        rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
        lines = [fmt.format(*self.HEADER), rule] + [fmt.format(*row) for row in body]
        return "\n".join(lines) + "\n"


def run_plan(plan, real, eval_set, opt=None, generator=None, vocab=None):
    model = LmModel(plan.lm_config, seed=plan.seed)
    seed_seq = np.random.SeedSequence(plan.seed)
    train_seed, tune_seed = (int(s.generate_state(1)[0]) for s in seed_seq.spawn(2))
    train_lm(model, real, opt, steps=plan.train_steps, seed=train_seed)
    n_synth = 0
    n_train = len(real)
    if plan.finetune_steps > 0:
        aug = plan.augment
        synthetic = Dataset(vocab=vocab if vocab is not None else real.vocab)
        if aug.n_synthetic > 0:
            if generator is None or vocab is None:
                raise ValueError("plan asks for synthetic data but no generator/vocabulary was given")
            synthetic = synthesize(generator, vocab, aug.n_synthetic, aug.tau, aug.seed,
                                   max_len=plan.lm_config.max_seq_len)
        d_aug = merge(real, synthetic, aug.shuffle_seed)
        n_synth, n_train = d_aug.count(SYNTHETIC), len(d_aug)
        finetune_augmented(model, d_aug, opt, steps=plan.finetune_steps, seed=tune_seed)
    return ComparisonRow(
        model=plan.label,
        layers=plan.lm_config.n_layer,
        perplexity=perplexity(model, eval_set),
        accuracy=next_token_accuracy(model, eval_set),
        n_train=n_train,
        n_synthetic=n_synth,
    )


def compare_configs(real, eval_set, plans, opt=None, generator=None, vocab=None):
    """Train every plan and evaluate it on ``eval_set``; one report row per plan.

    All plans are attempted even if some fail; failures are then raised
    together as a :class:`ComparisonError`.
    """
    plans = list(plans)
    if not plans:
        raise ValueError("compare_configs needs at least one plan")
    report, failures = ComparisonReport(), {}
    for plan in plans:
        log.info("comparison run %s", plan.label)
        try:
            report.rows.append(run_plan(plan, real, eval_set, opt, generator, vocab))
        except Exception as exc:  # collected and re-raised below with labels
            failures[plan.label] = exc
    if failures:
        raise ComparisonError(failures)
    return report


__all__ = [
    "REAL",
    "SYNTHETIC",
    "AugmentPlan",
    "ComparisonError",
    "ComparisonPlan",
    "ComparisonReport",
    "ComparisonRow",
    "Dataset",
    "augmented_loss",
    "compare_configs",
    "finetune_augmented",
    "merge",
    "run_plan",
    "synthesize",
]
