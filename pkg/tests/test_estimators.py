import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from textgan.estimators import GumbelTextGAN, TransformerLM
from textgan.validation import check_id_sequences, check_positive_int, check_seed, check_text_lines

LINES = ["the cat sat", "the dog sat", "a cat and a dog", "on the mat"]
SMALL = dict(n_layer=1, n_head=2, d_model=16, d_ff=32, max_seq_len=24, lr=3e-3, warmup_steps=5)


def test_get_params_and_clone():
    lm = TransformerLM(**SMALL, steps=3)
    assert lm.get_params()["d_model"] == 16
    assert clone(lm).get_params() == lm.get_params()
    gan = GumbelTextGAN(seq_len=8, steps=2)
    assert gan.set_params(steps=4).steps == 4


def test_lm_fit_predict_score():
    lm = TransformerLM(**SMALL, steps=60).fit(LINES)
    assert len(lm.curve_) == 60
    assert lm.curve_.losses[-1] < lm.curve_.losses[0]
    preds = lm.predict(["the cat"])
    assert preds[0].shape == (len("the cat") + 1,)
    assert 0.0 <= lm.score(LINES) <= 1.0
    assert lm.perplexity(LINES) < lm.tokenizer_.n_tokens_
    samples = lm.sample(3, max_new=10, seed=1)
    assert len(samples) == 3 and samples == lm.sample(3, max_new=10, seed=1)


def test_lm_is_deterministic():
    a = TransformerLM(**SMALL, steps=5).fit(LINES)
    b = TransformerLM(**SMALL, steps=5).fit(LINES)
    assert a.curve_.losses == b.curve_.losses


def test_not_fitted():
    with pytest.raises(NotFittedError):
        TransformerLM().score(LINES)
    with pytest.raises(NotFittedError):
        GumbelTextGAN().sample(2)


def test_gan_fit_sample_and_augment():
    gan = GumbelTextGAN(seq_len=8, noise_dim=4, g_hidden=16, d_embed=8, d_hidden=8, batch_size=8,
                        steps=10).fit(LINES)
    ids = gan.sample_ids(5, seed=0)
    assert ids.shape == (5, 8)
    assert gan.sample(5, seed=0) == gan.sample(5, seed=0)
    lm = TransformerLM(**SMALL, steps=5).fit(LINES, vocab=gan.tokenizer_.vocab_)
    lm.augment_fit(LINES, gan, n_synthetic=6, steps=4, seed=1)
    assert len(lm.augmented_) == len(LINES) + 6
    other = TransformerLM(**SMALL, steps=1).fit(["xyz"])
    with pytest.raises(ValueError):
        other.augment_fit(LINES, gan, n_synthetic=2)


def test_random_state_none_refused():
    with pytest.raises(ValueError):
        TransformerLM(**SMALL, steps=1, random_state=None).fit(LINES)


def test_validation_helpers():
    assert check_text_lines("abc") == ["abc"]
    with pytest.raises(TypeError):
        check_text_lines([1, 2])
    with pytest.raises(TypeError):
        check_text_lines(5)
    with pytest.raises(ValueError):
        check_text_lines([])
    assert check_positive_int(np.int64(3), "n") == 3
    with pytest.raises(TypeError):
        check_positive_int(True, "n")
    with pytest.raises(ValueError):
        check_positive_int(0, "n")
    assert check_seed(0) == 0
    assert check_id_sequences([[1, 2], np.array([3])], 5) == [[1, 2], [3]]
    with pytest.raises(IndexError):
        check_id_sequences([[1, 7]], 5)
    with pytest.raises(ValueError):
        check_id_sequences([[1.5]], 5)
