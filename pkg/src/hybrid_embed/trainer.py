"""AdamW with cosine decay over task-routed Matryoshka batches, and the
binary checkpoint format.

Checkpoint layout (all integers little-endian)::

    b"PIC2" | u32 version | u32 header_len | header JSON (utf-8) | arrays

Arrays are float32, written in the order listed in ``header["arrays"]``.
"""

from dataclasses import asdict, dataclass, field
import csv
import hashlib
import json
import math
import os
from pathlib import Path
import struct
from typing import NamedTuple

import numpy as np

from .data import LabeledExample, RetrievalExample, ScoredExample, plan_batches
from .encoder import (
    PARAM_NAMES,
    Encoder,
    EncoderConfig,
    EncoderParams,
    encode_batch,
    encode_batch_backward,
    init_params,
)
from .errors import (
    AbortOnNonFinite,
    BadMagic,
    HeaderShapeMismatch,
    NonFiniteGradient,
    ShapeMismatch,
    TruncatedFile,
    VersionMismatch,
)
from .losses import LabeledBatch, LossConfig, RetrievalBatch, ScoredPairBatch, hybrid_loss
from .mrl import MRLConfig, mrl_loss

MAGIC = b"PIC2"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-2
    lr_min: float = 0.0
    steps: int = 500
    batch_size: int = 32
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    negatives_per_example: int = 1
    mrl: MRLConfig = field(default_factory=MRLConfig)
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if self.lr <= 0 or self.lr_min < 0 or self.lr_min > self.lr:
            raise ValueError("need lr > 0 and 0 <= lr_min <= lr")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")


@dataclass
class OptimizerState:
    m: EncoderParams
    v: EncoderParams
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(params.map(np.zeros_like), params.map(np.zeros_like), 0)


def cosine_lr(step, total, lr_max, lr_min=0.0):
    return lr_min + 0.5 * (lr_max - lr_min) * (1 + math.cos(math.pi * step / total))


def adamw_step(params, grads, state, lr, config):
    """One AdamW update with decoupled weight decay; returns new params and state."""
    new_p, new_m, new_v = {}, {}, {}
    t = state.step + 1
    c1 = 1 - config.beta1**t
    c2 = 1 - config.beta2**t
    for name in PARAM_NAMES:
        p, g = getattr(params, name), getattr(grads, name)
        if p.shape != g.shape:
            raise ShapeMismatch(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in {name}")
        m = config.beta1 * getattr(state.m, name) + (1 - config.beta1) * g
        v = config.beta2 * getattr(state.v, name) + (1 - config.beta2) * g * g
        p = p - lr * config.weight_decay * p
        new_p[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
        new_m[name], new_v[name] = m, v
    return EncoderParams(**new_p), OptimizerState(EncoderParams(**new_m), EncoderParams(**new_v), t)


class _Layout:
    """Where each slot of a loss batch lives in a de-duplicated text list."""

    def __init__(self, kind, slots, scores=None):
        self.kind = kind
        self.slots = [np.asarray(s, dtype=np.intp) for s in slots]
        self.scores = scores

    def build(self, E):
        parts = [E[s] for s in self.slots]
        if self.kind is ScoredPairBatch:
            return ScoredPairBatch(parts[0], parts[1], self.scores)
        return self.kind(parts[0], parts[1], parts[2:])

    def scatter(self, grads, shape):
        out = np.zeros(shape)
        pieces = []
        grads.map(lambda g: pieces.append(g) or g)
        for idx, g in zip(self.slots, pieces):
            np.add.at(out, idx, g)
        return out


def assemble(examples, rng, negatives_per_example=1):
    """Unique texts plus the layout that rebuilds the loss batch from them."""
    texts, index = [], {}

    def ix(t):
        if t not in index:
            index[t] = len(texts)
            texts.append(t)
        return index[t]

    first = examples[0]
    if isinstance(first, RetrievalExample):
        q = [ix(e.query) for e in examples]
        p = [ix(e.pos[rng.integers(len(e.pos))]) for e in examples]
        negs = []
        for e in examples:
            k = min(negatives_per_example, len(e.neg))
            chosen = rng.choice(len(e.neg), size=k, replace=False) if k else []
            negs.append([ix(e.neg[j]) for j in chosen])
        return texts, _Layout(RetrievalBatch, [q, p, *negs])
    if isinstance(first, ScoredExample):
        a = [ix(e.text_a) for e in examples]
        b = [ix(e.text_b) for e in examples]
        return texts, _Layout(ScoredPairBatch, [a, b], np.array([e.score for e in examples]))
    if isinstance(first, LabeledExample):
        x = [ix(e.text) for e in examples]
        y = [ix(e.pos_label) for e in examples]
        negs = [[ix(l) for l in e.neg_labels] for e in examples]
        return texts, _Layout(LabeledBatch, [x, y, *negs])
    raise TypeError(f"unsupported example type {type(first).__name__}")


class LossRecord(NamedTuple):
    step: int
    task: str
    lr: float
    loss: float


@dataclass
class Checkpoint:
    encoder_config: EncoderConfig
    mrl: MRLConfig
    step: int
    loss_digest: str
    params: EncoderParams

    def encoder(self):
        return Encoder(self.params, self.encoder_config)


def loss_digest(records):
    h = hashlib.sha256()
    for r in records:
        h.update(f"{r.step},{r.task},{r.lr!r},{r.loss!r}\n".encode())
    return h.hexdigest()


def _to_f32(params):
    return params.map(lambda a: a.astype(np.float32).astype(np.float64))


def train(datasets, encoder_config=EncoderConfig(), config=TrainConfig(), router=hybrid_loss):
    """Train from a seeded random init; returns ``(checkpoint, loss_log)``.

    Each step encodes the batch's texts, evaluates the Matryoshka-summed
    routed loss, backpropagates into the encoder and applies AdamW at the
    cosine-decayed rate. The loss is logged before the update. The
    checkpoint holds float32-rounded parameters, exactly what
    :func:`save_checkpoint` writes.
    """
    if config.mrl.dims[-1] > encoder_config.out_dim:
        raise ValueError(f"MRL dim {config.mrl.dims[-1]} exceeds out_dim {encoder_config.out_dim}")
    params = init_params(encoder_config, config.seed)
    state = OptimizerState.zeros_like(params)
    rng = np.random.default_rng([config.seed, 1])
    records = []
    schedule, epoch = [], 0
    for step in range(config.steps):
        if not schedule:
            schedule = list(plan_batches(datasets, config.batch_size, seed=config.seed * 100_003 + epoch).schedule)
            epoch += 1
        planned = schedule.pop(0)
        examples = [datasets[planned.dataset].examples[i] for i in planned.indices]
        texts, layout = assemble(examples, rng, config.negatives_per_example)
        trace = encode_batch(texts, params, encoder_config)
        out = mrl_loss(planned.task, layout.build(trace.output), config.mrl, config.loss, router)
        if not math.isfinite(out.value):
            raise AbortOnNonFinite(f"loss became {out.value} at step {step + 1}")
        grads = encode_batch_backward(trace, layout.scatter(out.grads, trace.output.shape), params)
        lr = cosine_lr(step, config.steps, config.lr, config.lr_min)
        params, state = adamw_step(params, grads, state, lr, config)
        records.append(LossRecord(step + 1, str(planned.task), lr, out.value))
    ckpt = Checkpoint(encoder_config, config.mrl, config.steps, loss_digest(records), _to_f32(params))
    return ckpt, records


def ema(values, window=50):
    """Exponential moving average with span ``window`` (alpha = 2/(window+1))."""
    alpha = 2.0 / (window + 1)
    out, acc = [], None
    for v in values:
        acc = v if acc is None else alpha * v + (1 - alpha) * acc
        out.append(acc)
    return out


def write_loss_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "task", "lr", "loss"])
        for r in records:
            w.writerow([r.step, r.task, repr(r.lr), repr(r.loss)])


def _atomic_write(path, blob):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def checkpoint_bytes(ckpt):
    arrays = [(name, getattr(ckpt.params, name).astype("<f4")) for name in PARAM_NAMES]
    header = {
        "encoder_config": asdict(ckpt.encoder_config),
        "mrl": {"dims": list(ckpt.mrl.dims), "weights": list(ckpt.mrl.weights)},
        "step": ckpt.step,
        "loss_digest": ckpt.loss_digest,
        "arrays": [{"name": n, "shape": list(a.shape), "nbytes": a.nbytes} for n, a in arrays],
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(head)), head]
    parts.extend(a.tobytes() for _, a in arrays)
    return b"".join(parts)


def save_checkpoint(ckpt, path):
    _atomic_write(path, checkpoint_bytes(ckpt))


def load_checkpoint(path):
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise BadMagic(f"{path}: not a checkpoint (magic {blob[:4]!r})")
    if len(blob) < 12:
        raise TruncatedFile(f"{path}: header truncated")
    version, head_len = struct.unpack("<II", blob[4:12])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if len(blob) < 12 + head_len:
        raise TruncatedFile(f"{path}: header truncated")
    header = json.loads(blob[12 : 12 + head_len].decode("utf-8"))
    config = EncoderConfig(**header["encoder_config"])
    expected = {
        "embed_table": (config.vocab_size, config.hidden_dim),
        "proj_weight": (config.hidden_dim, config.out_dim),
        "proj_bias": (config.out_dim,),
    }
    specs = header["arrays"]
    if [s["name"] for s in specs] != list(PARAM_NAMES):
        raise HeaderShapeMismatch(f"{path}: unexpected array list {[s['name'] for s in specs]}")
    for s in specs:
        shape = tuple(s["shape"])
        if shape != expected[s["name"]] or s["nbytes"] != 4 * int(np.prod(shape)):
            raise HeaderShapeMismatch(f"{path}: array {s['name']} declares shape {shape}, {s['nbytes']} bytes")
    body = blob[12 + head_len :]
    total = sum(s["nbytes"] for s in specs)
    if len(body) < total:
        raise TruncatedFile(f"{path}: {len(body)} array bytes, header declares {total}")
    if len(body) > total:
        raise HeaderShapeMismatch(f"{path}: {len(body) - total} trailing bytes")
    arrays, off = {}, 0
    for s in specs:
        a = np.frombuffer(body, dtype="<f4", count=s["nbytes"] // 4, offset=off)
        arrays[s["name"]] = a.reshape(s["shape"]).astype(np.float64)
        off += s["nbytes"]
    mrl = MRLConfig(tuple(header["mrl"]["dims"]), tuple(header["mrl"]["weights"]))
    return Checkpoint(config, mrl, header["step"], header["loss_digest"], EncoderParams(**arrays))
