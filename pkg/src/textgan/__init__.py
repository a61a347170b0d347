"""Character-level transformer language models, a Gumbel-Softmax text GAN,
and GAN-based data augmentation, on a small numpy autodiff core."""

from .augment import AugmentPlan, ComparisonPlan, compare_configs, finetune_augmented, merge, synthesize
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset
from .gan import Discriminator, GanConfig, GanModel, Generator, train_gan
from .gumbel import TemperatureSchedule, gumbel_softmax, gumbel_softmax_hard
from .lm import LmConfig, LmModel, generate, lm_loss, next_token_accuracy, perplexity, train_lm
from .optim import Adam, OptimizerConfig
from .tensor import Tensor, no_grad
from .tokenizer import CharTokenizer, Vocab, build_vocab

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AugmentPlan",
    "CharTokenizer",
    "ComparisonPlan",
    "Dataset",
    "Discriminator",
    "GanConfig",
    "GanModel",
    "Generator",
    "LmConfig",
    "LmModel",
    "OptimizerConfig",
    "TemperatureSchedule",
    "Tensor",
    "Vocab",
    "build_vocab",
    "compare_configs",
    "finetune_augmented",
    "generate",
    "gumbel_softmax",
    "gumbel_softmax_hard",
    "lm_loss",
    "load_checkpoint",
    "merge",
    "next_token_accuracy",
    "no_grad",
    "perplexity",
    "save_checkpoint",
    "synthesize",
    "train_gan",
    "train_lm",
]
