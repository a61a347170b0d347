"""Plain-numpy reference computations used as independent test oracles.

Nothing here touches the autodiff core. The language-model forward pass is
written with explicit per-head, per-position loops (the causal restriction
is a slice, not a mask) and can run in extended precision, which keeps
finite-difference roundoff far below the tolerances under test.
"""

import numpy as np

WIDE = np.longdouble


def _layernorm(x, w, b, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * w + b


def _gelu(x):
    c = np.sqrt(x.dtype.type(2) / x.dtype.type(np.pi))
    return x.dtype.type(0.5) * x * (1 + np.tanh(c * (x + x.dtype.type(0.044715) * x**3)))


def reference_logits(state, config, ids, dtype=WIDE):
    """Logits ``[T, V]`` for a single sequence ``ids``."""
    p = {k: np.asarray(v).astype(dtype) for k, v in state.items()}
    ids = list(ids)
    L, d, H = len(ids), config.d_model, config.n_head
    dh = d // H
    x = np.stack([p["wte"][i] + p["wpe"][t] for t, i in enumerate(ids)])
    for layer in range(config.n_layer):
        pre = f"h.{layer}."
        h = _layernorm(x, p[pre + "ln_1.weight"], p[pre + "ln_1.bias"])
        qkv = h @ p[pre + "attn.c_attn.weight"] + p[pre + "attn.c_attn.bias"]
        q, k, v = qkv[:, :d], qkv[:, d : 2 * d], qkv[:, 2 * d :]
        out = np.zeros((L, d), dtype=dtype)
        for head in range(H):
            sl = slice(head * dh, (head + 1) * dh)
            for t in range(L):
                scores = k[: t + 1, sl] @ q[t, sl] / np.sqrt(dtype(dh))
                w = np.exp(scores - scores.max())
                w = w / w.sum()
                out[t, sl] = w @ v[: t + 1, sl]
        x = x + out @ p[pre + "attn.c_proj.weight"] + p[pre + "attn.c_proj.bias"]
        h = _layernorm(x, p[pre + "ln_2.weight"], p[pre + "ln_2.bias"])
        h = _gelu(h @ p[pre + "mlp.c_fc.weight"] + p[pre + "mlp.c_fc.bias"])
        x = x + h @ p[pre + "mlp.c_proj.weight"] + p[pre + "mlp.c_proj.bias"]
    x = _layernorm(x, p["ln_f.weight"], p["ln_f.bias"])
    return x @ p["wte"].T


def reference_token_nll(state, config, ids, dtype=WIDE):
    """Per-target negative log-likelihoods ``-log P(x_t | x_<t)``, t >= 1.

    Written as the indicator double sum over the vocabulary.
    """
    logits = reference_logits(state, config, ids[:-1], dtype=dtype)
    out = []
    for t, target in enumerate(ids[1:]):
        row = logits[t]
        logp = row - row.max() - np.log(np.exp(row - row.max()).sum())
        out.append(-sum(logp[v] * (1 if target == v else 0) for v in range(len(row))))
    return out


def reference_mean_nll(state, config, sequences, dtype=WIDE):
    """Token-weighted mean NLL over a list of variable-length sequences."""
    nll = []
    for s in sequences:
        nll.extend(reference_token_nll(state, config, s, dtype=dtype))
    return sum(nll) / len(nll)


def central_difference(f, x, h=1e-5):
    """Gradient of scalar ``f`` at array ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = f(x)
        x[idx] = old - h
        fm = f(x)
        x[idx] = old
        grad[idx] = (fp - fm) / (2 * h)
    return grad


def rel_err(auto, fd):
    return np.abs(auto - fd) / (np.abs(fd) + 1e-8)
