import sys
from pathlib import Path

import numpy as np
import pytest

from textgan.lm import LmConfig, LmModel

ROOT = Path(__file__).resolve().parents[1]
CORPUS_PATH = ROOT / "data" / "corpus.txt"
DEFAULT_CONFIG = ROOT / "configs" / "default.ini"


def uniform_model(vocab_size, n_layer=1, max_seq_len=64):
    """A model whose logits are identically zero: wte = 0 makes x @ wte.T vanish."""
    cfg = LmConfig(n_layer=n_layer, n_head=2, d_model=8, d_ff=16, max_seq_len=max_seq_len, vocab_size=vocab_size)
    model = LmModel(cfg, seed=0)
    model.params["wte"].data[...] = 0.0
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance criterion lines at the end of the run."""
    lines = []
    for name, module in list(sys.modules.items()):
        if name.endswith("test_acceptance"):
            lines = getattr(module, "RESULTS", None) or lines
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
