"""A tiny trainable text encoder: hashed character n-grams, mean pooling,
and a learnable linear head that sets the output dimension.

    output = mean(embed_table[token_ids]) @ proj_weight + proj_bias
"""

from dataclasses import dataclass, fields
from functools import lru_cache
import hashlib

import numpy as np
import scipy.sparse as sp

from .errors import EmptyText, ShapeMismatch

MAX_TOKENS = 512


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int = 4096
    hidden_dim: int = 64
    out_dim: int = 128
    ngram: int = 2
    hash_seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        if self.hidden_dim < 1 or self.out_dim < 1:
            raise ValueError("hidden_dim and out_dim must be >= 1")
        if self.ngram not in (1, 2, 3):
            raise ValueError("ngram must be 1, 2 or 3")


@dataclass
class EncoderParams:
    embed_table: np.ndarray  # (vocab_size, hidden_dim)
    proj_weight: np.ndarray  # (hidden_dim, out_dim)
    proj_bias: np.ndarray  # (out_dim,)

    def arrays(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def map(self, fn):
        return EncoderParams(**{k: fn(v) for k, v in self.arrays().items()})

    def check(self, config):
        expected = {
            "embed_table": (config.vocab_size, config.hidden_dim),
            "proj_weight": (config.hidden_dim, config.out_dim),
            "proj_bias": (config.out_dim,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeMismatch(f"{name} has shape {getattr(self, name).shape}, expected {shape}")


PARAM_NAMES = tuple(f.name for f in fields(EncoderParams))


@dataclass
class EncodeTrace:
    token_ids: list
    pooled: np.ndarray
    output: np.ndarray


def init_params(config, seed, scale=0.05):
    """Seeded uniform(-scale, scale) weights; the bias starts at zero."""
    rng = np.random.default_rng(seed)
    return EncoderParams(
        embed_table=rng.uniform(-scale, scale, (config.vocab_size, config.hidden_dim)),
        proj_weight=rng.uniform(-scale, scale, (config.hidden_dim, config.out_dim)),
        proj_bias=np.zeros(config.out_dim),
    )


def hash_ngram(gram, vocab_size, hash_seed):
    """Bucket of one n-gram: 8-byte keyed BLAKE2b, little-endian, mod vocab."""
    key = (hash_seed % 2**64).to_bytes(8, "little")
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little") % vocab_size


@lru_cache(maxsize=200_000)
def _tokenize_cached(text, vocab_size, ngram, hash_seed):
    if len(text) < ngram:
        grams = [text]
    else:
        grams = [text[i : i + ngram] for i in range(len(text) - ngram + 1)]
    return tuple(hash_ngram(g, vocab_size, hash_seed) for g in grams[:MAX_TOKENS])


def tokenize(text, config):
    """Hashed character n-grams of ``text`` (at most 512 ids)."""
    text = text.strip()
    if not text:
        raise EmptyText("text is empty after trimming")
    return list(_tokenize_cached(text, config.vocab_size, config.ngram, config.hash_seed))


def encode(text, params, config):
    ids = tokenize(text, config)
    pooled = params.embed_table[ids].mean(axis=0)
    output = pooled @ params.proj_weight + params.proj_bias
    return EncodeTrace(token_ids=ids, pooled=pooled, output=output)


def encode_backward(trace, grad_output, params):
    """Parameter gradients of ``trace.output`` contracted with ``grad_output``."""
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if grad_output.shape != trace.output.shape:
        raise ShapeMismatch(f"grad_output shape {grad_output.shape} != {trace.output.shape}")
    grad_pooled = params.proj_weight @ grad_output
    d_table = np.zeros_like(params.embed_table)
    np.add.at(d_table, trace.token_ids, grad_pooled / len(trace.token_ids))
    return EncoderParams(
        embed_table=d_table,
        proj_weight=np.outer(trace.pooled, grad_output),
        proj_bias=grad_output.copy(),
    )


def pooling_matrix(texts, config):
    """Sparse (len(texts), vocab_size) matrix whose rows average token rows."""
    rows, cols, vals = [], [], []
    for r, text in enumerate(texts):
        ids = tokenize(text, config)
        rows.extend([r] * len(ids))
        cols.extend(ids)
        vals.extend([1.0 / len(ids)] * len(ids))
    # duplicate (row, col) entries are summed on conversion
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(texts), config.vocab_size))


class BatchTrace:
    """Forward cache for :func:`encode_batch`."""

    def __init__(self, pool, pooled, output):
        self.pool = pool
        self.pooled = pooled
        self.output = output


def encode_batch(texts, params, config):
    """Vectorised :func:`encode` over many texts; returns a :class:`BatchTrace`."""
    pool = pooling_matrix(texts, config)
    pooled = np.asarray(pool @ params.embed_table)
    output = pooled @ params.proj_weight + params.proj_bias
    return BatchTrace(pool, pooled, output)


def encode_batch_backward(trace, grad_output, params):
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if grad_output.shape != trace.output.shape:
        raise ShapeMismatch(f"grad_output shape {grad_output.shape} != {trace.output.shape}")
    grad_pooled = grad_output @ params.proj_weight.T
    return EncoderParams(
        embed_table=np.asarray(trace.pool.T @ grad_pooled),
        proj_weight=trace.pooled.T @ grad_output,
        proj_bias=grad_output.sum(axis=0),
    )


class Encoder:
    """Callable wrapper: ``encoder(texts) -> (n, out_dim)`` embeddings."""

    def __init__(self, params, config):
        params.check(config)
        self.params = params
        self.config = config

    def __call__(self, texts):
        return encode_batch(list(texts), self.params, self.config).output
