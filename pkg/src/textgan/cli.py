"""Command-line entry point.

Usage: ``textgan <subcommand> --config <path> [--out <dir>] [--seed-override <int>]``

Every subcommand reads and writes files under the output directory, so the
stages can run one at a time or all together via ``pipeline``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from .augment import ComparisonPlan, compare_configs, finetune_augmented, merge, synthesize
from .checkpoint import SECTION_GAN, SECTION_LM, load_checkpoint, save_checkpoint
from .config import load_config
from .data import Dataset
from .errors import CheckpointError, ConfigError
from .gan import GanModel, train_gan
from .lm import LmModel, next_token_accuracy, perplexity, train_lm
from .tokenizer import Vocab, build_vocab, corpus_lines

log = logging.getLogger("textgan")

VOCAB = "vocab.txt"
TRAIN = "train.txt"
VALID = "valid.txt"
LM_CKPT = "lm.ckpt"
LM_CURVE = "lm_curve.csv"
GAN_CKPT = "gan.ckpt"
GAN_CURVE = "gan_curve.csv"
GAN_META = "gan_curve.meta"
SYNTHETIC = "synthetic.txt"
AUGMENTED = "augmented.txt"
LM_AUG_CKPT = "lm_aug.ckpt"
FINETUNE_CURVE = "finetune_curve.csv"
EVAL_CSV = "eval.csv"
REPORT_CSV = "report.csv"
REPORT_TXT = "report.txt"


def _split_seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


class Workspace:
    """Output directory of one experiment, with the prepared vocab and splits."""

    def __init__(self, cfg, out=None):
        self.cfg = cfg
        self.root = Path(out) if out is not None else cfg.output_dir
        self.root.mkdir(parents=True, exist_ok=True)
        self._prepare()

    def path(self, name):
        return self.root / name

    def _prepare(self):
        text = self.cfg.corpus.read_text(encoding="utf-8")
        self.vocab = build_vocab(text)
        lines = corpus_lines(text)
        k = self.cfg.valid_every
        max_len = self.cfg.lm.get("max_seq_len", 64)
        train_lines = [s for i, s in enumerate(lines) if i % k != k - 1]
        valid_lines = [s for i, s in enumerate(lines) if i % k == k - 1] or train_lines[-1:]
        self.train = Dataset.from_texts(train_lines, self.vocab, max_len=max_len)
        self.valid = Dataset.from_texts(valid_lines, self.vocab, max_len=max_len)
        self.vocab.save(self.path(VOCAB))
        self.train.save(self.path(TRAIN))
        self.valid.save(self.path(VALID))

    @property
    def vocab_ref(self):
        """Vocabulary file name plus a fingerprint of its tokens.

        ``vocab.txt`` itself is rewritten from the corpus on every command, so
        the fingerprint is what detects a checkpoint built on another corpus.
        """
        digest = hashlib.sha256("\n".join(self.vocab.tokens).encode("utf-8")).hexdigest()[:16]
        return f"{VOCAB}#{digest}"

    def load_model(self, name, section):
        model = load_checkpoint(self.path(name), expect=section)
        if model.vocab_ref:
            ref, _, digest = model.vocab_ref.partition("#")
            if digest:
                same = model.vocab_ref == self.vocab_ref
            else:
                same = Vocab.load(self.path(ref)) == self.vocab
            if not same:
                raise CheckpointError(f"{name} was trained with a different vocabulary")
        return model

    def load_dataset(self, name):
        path = self.path(name)
        if not path.exists():
            raise FileNotFoundError(f"{path} not found; run the stage that produces it first")
        return Dataset.load(path, self.vocab, max_len=self.cfg.lm.get("max_seq_len", 64))


def _progress(label, total):
    every = max(1, total // 10)

    def cb(step, *rest):
        if (step + 1) % every == 0 or step + 1 == total:
            log.info("%s step %d/%d", label, step + 1, total)

    return cb


def cmd_train_lm(ws):
    cfg = ws.cfg
    init_seed, train_seed = _split_seeds(cfg.train_lm.seed, 2)
    model = LmModel(cfg.lm_config(len(ws.vocab)), seed=init_seed)
    curve = train_lm(model, ws.train, cfg.optimizer, steps=cfg.train_lm.steps, seed=train_seed,
                     callback=_progress("train-lm", cfg.train_lm.steps))
    save_checkpoint(model, ws.path(LM_CKPT), vocab_ref=ws.vocab_ref)
    curve.to_csv(ws.path(LM_CURVE))
    if len(curve):
        log.info("train-lm loss %.4f -> %.4f", curve.losses[0], curve.losses[-1])


def cmd_train_gan(ws):
    cfg = ws.cfg
    init_seed, train_seed = _split_seeds(cfg.train_gan.seed, 2)
    gan = GanModel(cfg.gan_config(len(ws.vocab)), seed=init_seed)
    curve = train_gan(gan.generator, gan.discriminator, ws.train, gan.config,
                      steps=cfg.train_gan.steps, seed=train_seed,
                      callback=_progress("train-gan", cfg.train_gan.steps))
    save_checkpoint(gan, ws.path(GAN_CKPT), vocab_ref=ws.vocab_ref)
    curve.to_csv(ws.path(GAN_CURVE))
    warning = curve.collapse_warning or "none"
    ws.path(GAN_META).write_text(f"collapse_warning={warning}\n", encoding="utf-8")
    if curve.collapse_warning:
        log.warning(curve.collapse_warning)


def cmd_synthesize(ws):
    cfg = ws.cfg
    gan = ws.load_model(GAN_CKPT, SECTION_GAN)
    plan = cfg.augment
    synthetic = synthesize(gan.generator, ws.vocab, plan.n_synthetic, plan.tau, plan.seed,
                           max_len=cfg.lm.get("max_seq_len", 64))
    synthetic.save(ws.path(SYNTHETIC))
    log.info("synthesize wrote %d sequences", len(synthetic))


def cmd_augment_finetune(ws):
    cfg = ws.cfg
    model = ws.load_model(LM_CKPT, SECTION_LM)
    synthetic = ws.load_dataset(SYNTHETIC)
    d_aug = merge(ws.train, synthetic, cfg.augment.shuffle_seed)
    d_aug.save(ws.path(AUGMENTED))
    curve = finetune_augmented(model, d_aug, cfg.optimizer, steps=cfg.finetune.steps, seed=cfg.finetune.seed)
    save_checkpoint(model, ws.path(LM_AUG_CKPT), vocab_ref=ws.vocab_ref)
    curve.to_csv(ws.path(FINETUNE_CURVE))


def cmd_eval(ws, checkpoint=None):
    name = checkpoint or LM_CKPT
    model = ws.load_model(name, SECTION_LM)
    ppl = perplexity(model, ws.valid)
    acc = next_token_accuracy(model, ws.valid)
    with open(ws.path(EVAL_CSV), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["checkpoint", "perplexity", "accuracy"])
        w.writerow([name, repr(ppl), repr(acc)])
    print(f"perplexity {ppl:.6f}")
    print(f"accuracy {acc:.6f}")


def cmd_compare(ws):
    cfg = ws.cfg
    cmp_ = cfg.compare
    V = len(ws.vocab)
    gan = ws.load_model(GAN_CKPT, SECTION_GAN) if cfg.augment.n_synthetic > 0 else None
    real_only = type(cfg.augment)(n_synthetic=0, tau=cfg.augment.tau, seed=cfg.augment.seed,
                                  shuffle_seed=cfg.augment.shuffle_seed)
    plans = [
        ComparisonPlan(f"LM (base, {cmp_.baseline_layers} layers)", cfg.lm_config(V, cmp_.baseline_layers),
                       cmp_.train_steps, cmp_.finetune_steps, real_only, cmp_.seed),
        ComparisonPlan(f"LM (deep, {cmp_.deep_layers} layers)", cfg.lm_config(V, cmp_.deep_layers),
                       cmp_.train_steps, cmp_.finetune_steps, real_only, cmp_.seed),
        ComparisonPlan("LM (deep) + GAN augmentation", cfg.lm_config(V, cmp_.deep_layers),
                       cmp_.train_steps, cmp_.finetune_steps, cfg.augment, cmp_.seed),
    ]
    report = compare_configs(ws.train, ws.valid, plans, cfg.optimizer,
                             generator=gan.generator if gan else None, vocab=ws.vocab)
    report.to_csv(ws.path(REPORT_CSV))
    text = report.to_text()
    ws.path(REPORT_TXT).write_text(text, encoding="utf-8")
    print(text, end="")


def cmd_pipeline(ws):
    stages = ws.cfg.stages
    for name, fn in (
        ("train_lm", cmd_train_lm),
        ("train_gan", cmd_train_gan),
        ("synthesize", cmd_synthesize),
        ("augment_finetune", cmd_augment_finetune),
        ("compare", cmd_compare),
    ):
        if stages.get(name, True):
            log.info("stage %s", name)
            fn(ws)


COMMANDS = {
    "train-lm": cmd_train_lm,
    "train-gan": cmd_train_gan,
    "synthesize": cmd_synthesize,
    "augment-finetune": cmd_augment_finetune,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "pipeline": cmd_pipeline,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="textgan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment INI file")
        p.add_argument("--out", help="output directory (overrides [paths] output_dir)")
        p.add_argument("--seed-override", type=int, help="replace every stage seed")
        p.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
        if name == "eval":
            p.add_argument("--checkpoint", help=f"checkpoint inside the output dir (default {LM_CKPT})")
    return parser


def run(command, config_path, out=None, seed_override=None, **extra):
    """Run one subcommand; returns a process exit status."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if seed_override is not None:
        cfg = cfg.with_seed(seed_override)
    try:
        ws = Workspace(cfg, out)
        COMMANDS[command](ws, **extra)
    except (OSError, ValueError, RuntimeError, IndexError) as exc:
        print(f"error: {command}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    extra = {"checkpoint": args.checkpoint} if args.command == "eval" else {}
    return run(args.command, args.config, args.out, args.seed_override, **extra)


if __name__ == "__main__":
    sys.exit(main())
