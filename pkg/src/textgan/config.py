"""Experiment configuration: an INI file with one section per stage.

Relative paths resolve against the directory holding the config file. Every
stage seed must be written out explicitly; nothing falls back to OS entropy.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .augment import AugmentPlan
from .errors import ConfigError
from .gan import GanConfig
from .lm import LmConfig
from .optim import OptimizerConfig

STAGES = ("train_lm", "train_gan", "synthesize", "augment_finetune", "compare")


@dataclass(frozen=True)
class StageSettings:
    steps: int
    seed: int


@dataclass(frozen=True)
class CompareSettings:
    baseline_layers: int = 2
    deep_layers: int = 4
    train_steps: int = 300
    finetune_steps: int = 150
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: Path
    output_dir: Path
    valid_every: int
    lm: dict
    optimizer: OptimizerConfig
    gan: dict
    train_lm: StageSettings
    train_gan: StageSettings
    augment: AugmentPlan
    finetune: StageSettings
    compare: CompareSettings
    stages: dict = field(default_factory=lambda: {s: True for s in STAGES})

    def lm_config(self, vocab_size, n_layer=None):
        kw = dict(self.lm, vocab_size=vocab_size)
        if n_layer is not None:
            kw["n_layer"] = n_layer
        return LmConfig(**kw)

    def gan_config(self, vocab_size):
        return GanConfig(**dict(self.gan, vocab_size=vocab_size))

    def with_seed(self, seed):
        """Copy with every stage seed replaced by ``seed``."""
        return replace(
            self,
            train_lm=replace(self.train_lm, seed=seed),
            train_gan=replace(self.train_gan, seed=seed),
            finetune=replace(self.finetune, seed=seed),
            augment=replace(self.augment, seed=seed, shuffle_seed=seed),
            compare=replace(self.compare, seed=seed),
        )


def _typed(cls, exclude=()):
    return {f.name: f.type for f in fields(cls) if f.name not in exclude}


def _convert(kind, raw):
    raw = raw.strip()
    if kind in ("int", int):
        return int(raw)
    if kind in ("float", float):
        return float(raw)
    if kind in ("bool", bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return raw


class _Collector:
    def __init__(self, parser):
        self.parser = parser
        self.problems = []

    def section(self, name, kinds, required=()):
        """Typed values of ``[name]``; unknown keys and bad values are recorded."""
        out = {}
        if not self.parser.has_section(name):
            if required:
                self.problems.append(f"[{name}] section is missing")
            return out
        for key, raw in self.parser.items(name):
            if key not in kinds:
                self.problems.append(f"[{name}] {key}: unknown field")
                continue
            try:
                out[key] = _convert(kinds[key], raw)
            except ValueError:
                self.problems.append(f"[{name}] {key}: cannot parse {raw!r} as {kinds[key]}")
        for key in required:
            if key not in out and not any(p.startswith(f"[{name}] {key}:") for p in self.problems):
                self.problems.append(f"[{name}] {key}: required field is missing")
        return out

    def build(self, name, cls, kw):
        try:
            return cls(**kw)
        except (ValueError, TypeError) as exc:
            self.problems.append(f"[{name}] {exc}")
            return None


def load_config(path):
    """Parse and validate an experiment file, reporting every problem at once."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    base = path.resolve().parent
    c = _Collector(parser)

    paths = c.section("paths", {"corpus": "str", "output_dir": "str"}, required=("corpus", "output_dir"))
    data = c.section("data", {"valid_every": "int"})
    lm = c.section("lm", _typed(LmConfig, exclude=("vocab_size",)))
    opt = c.section("optimizer", _typed(OptimizerConfig))
    gan = c.section("gan", _typed(GanConfig, exclude=("vocab_size",)))
    stage_kinds = {"steps": "int", "seed": "int"}
    tlm = c.section("train_lm", stage_kinds, required=("steps", "seed"))
    tgan = c.section("train_gan", stage_kinds, required=("steps", "seed"))
    syn = c.section("synthesize", {"n_synthetic": "int", "tau": "float", "seed": "int"},
                    required=("n_synthetic", "seed"))
    fin = c.section("augment_finetune", {"steps": "int", "seed": "int", "shuffle_seed": "int"},
                    required=("steps", "seed", "shuffle_seed"))
    cmp_ = c.section("compare", _typed(CompareSettings), required=("seed",))
    stages = c.section("stages", {s: "bool" for s in STAGES})

    corpus = output_dir = None
    if "corpus" in paths:
        corpus = (base / paths["corpus"]).resolve()
        if not corpus.is_file():
            c.problems.append(f"[paths] corpus: file not found: {corpus}")
    if "output_dir" in paths:
        output_dir = (base / paths["output_dir"]).resolve()
    valid_every = data.get("valid_every", 10)
    if valid_every < 2:
        c.problems.append(f"[data] valid_every must be >= 2, got {valid_every}")

    # validate model sections with a placeholder vocabulary size
    c.build("lm", LmConfig, dict(lm, vocab_size=64))
    gan_cfg = c.build("gan", GanConfig, dict(gan, vocab_size=64))
    if gan_cfg is not None and gan_cfg.seq_len > lm.get("max_seq_len", LmConfig.max_seq_len):
        c.problems.append("[gan] seq_len must not exceed [lm] max_seq_len")
    optimizer = c.build("optimizer", OptimizerConfig, opt)
    augment = c.build(
        "synthesize",
        AugmentPlan,
        {
            "n_synthetic": syn.get("n_synthetic", 0),
            "tau": syn.get("tau", 0.3),
            "seed": syn.get("seed", 0),
            "shuffle_seed": fin.get("shuffle_seed", 0),
        },
    )
    compare = c.build("compare", CompareSettings, cmp_)
    for name, settings in (("train_lm", tlm), ("train_gan", tgan), ("augment_finetune", fin)):
        if settings.get("steps", 0) < 0:
            c.problems.append(f"[{name}] steps must be >= 0")
    if compare is not None:
        for key in ("baseline_layers", "deep_layers"):
            if getattr(compare, key) < 1:
                c.problems.append(f"[compare] {key} must be >= 1")
        for key in ("train_steps", "finetune_steps"):
            if getattr(compare, key) < 0:
                c.problems.append(f"[compare] {key} must be >= 0")

    if c.problems:
        raise ConfigError(c.problems)
    return ExperimentConfig(
        corpus=corpus,
        output_dir=output_dir,
        valid_every=valid_every,
        lm=lm,
        optimizer=optimizer,
        gan=gan,
        train_lm=StageSettings(tlm["steps"], tlm["seed"]),
        train_gan=StageSettings(tgan["steps"], tgan["seed"]),
        augment=augment,
        finetune=StageSettings(fin["steps"], fin["seed"]),
        compare=compare,
        stages={s: stages.get(s, True) for s in STAGES},
    )
