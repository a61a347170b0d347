"""Versioned binary checkpoints for language models and GANs.

Layout (all integers little-endian)::

    magic        8 bytes   b"TXGANCKP"
    version      u32
    section      u16 length + ASCII tag ("lm" or "gan")
    config       u32 length + UTF-8 "key=value" lines
    vocab ref    u16 length + UTF-8 path (may be empty)
    n_blocks     u32
    block        u16 name length + UTF-8 name, u8 ndim, ndim x u64 dims,
                 prod(dims) x float64
    checksum     32 bytes, SHA-256 of everything before it
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError, CorruptCheckpointError
from .gan import GanConfig, GanModel
from .lm import LmConfig, LmModel

MAGIC = b"TXGANCKP"
FORMAT_VERSION = 1
SECTION_LM = "lm"
SECTION_GAN = "gan"
_DIGEST = 32


@dataclass
class Checkpoint:
    version: int
    section: str
    config: dict
    vocab_ref: str
    params: dict


def config_to_text(config_dict):
    return "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in config_dict.items())


def config_from_text(text):
    out = {}
    for line in text.splitlines():
        if line:
            key, _, value = line.partition("=")
            out[key] = value
    return out


def encode_checkpoint(section, config_dict, params, vocab_ref=""):
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for text, fmt in ((section, "<H"), (config_to_text(config_dict), "<I"), (vocab_ref, "<H")):
        raw = text.encode("utf-8")
        parts.append(struct.pack(fmt, len(raw)) + raw)
    parts.append(struct.pack("<I", len(params)))
    for name, arr in params.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CorruptCheckpointError("checkpoint is truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self, fmt):
        (n,) = self.unpack(fmt)
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptCheckpointError("checkpoint holds invalid UTF-8") from None


def decode_checkpoint(buf):
    if len(buf) < len(MAGIC) + 4 + _DIGEST or not buf.startswith(MAGIC):
        raise CorruptCheckpointError("not a checkpoint file (bad magic or too short)")
    body, digest = buf[:-_DIGEST], buf[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptCheckpointError("checkpoint checksum mismatch (file truncated or modified)")
    r = _Reader(body)
    r.take(len(MAGIC))
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    section = r.text("<H")
    config = config_from_text(r.text("<I"))
    vocab_ref = r.text("<H")
    (n_blocks,) = r.unpack("<I")
    params = {}
    for _ in range(n_blocks):
        name = r.text("<H")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}Q") if ndim else ()
        count = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(body):
        raise CorruptCheckpointError("trailing bytes after the last parameter block")
    return Checkpoint(version, section, config, vocab_ref, params)


def read_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())


def save_checkpoint(model, path, vocab_ref=""):
    """Write an :class:`LmModel` or :class:`GanModel` to ``path``."""
    if isinstance(model, LmModel):
        section = SECTION_LM
    elif isinstance(model, GanModel):
        section = SECTION_GAN
    else:
        raise TypeError(f"cannot checkpoint object of type {type(model).__name__}")
    data = encode_checkpoint(section, model.config.to_dict(), model.state_dict(), str(vocab_ref))
    Path(path).write_bytes(data)


def load_checkpoint(path, expect=None):
    """Rebuild the model stored at ``path``.

    ``expect`` ("lm" or "gan") refuses a checkpoint of the other kind. The
    returned model carries the stored vocabulary reference as ``vocab_ref``.
    """
    ckpt = read_checkpoint(path)
    if expect is not None and ckpt.section != expect:
        raise CheckpointError(f"{path}: expected a {expect!r} checkpoint, found {ckpt.section!r}")
    try:
        if ckpt.section == SECTION_LM:
            model = LmModel(LmConfig.from_dict(ckpt.config))
        elif ckpt.section == SECTION_GAN:
            model = GanModel(GanConfig.from_dict(ckpt.config))
        else:
            raise CheckpointError(f"{path}: unknown checkpoint section {ckpt.section!r}")
        model.load_state_dict(ckpt.params)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    model.vocab_ref = ckpt.vocab_ref
    return model
