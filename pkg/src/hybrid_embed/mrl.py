"""Matryoshka training: the task loss summed over nested embedding prefixes."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimOutOfRange
from .losses import LossConfig, LossOutput, hybrid_loss


@dataclass(frozen=True)
class MRLConfig:
    dims: tuple = (16, 32, 64, 128)
    weights: tuple = field(default=None)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("MRL dims must be non-empty")
        if dims[0] < 1 or any(b <= a for a, b in zip(dims, dims[1:])):
            raise ValueError(f"MRL dims must be positive and strictly increasing, got {dims}")
        weights = (1.0,) * len(dims) if self.weights is None else tuple(float(w) for w in self.weights)
        if len(weights) != len(dims) or min(weights) <= 0:
            raise ValueError("need one positive weight per MRL dim")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def single(cls, dim):
        return cls(dims=(dim,))


def prefix(v, d):
    """First ``d`` coordinates of ``v`` (or of each row of a matrix)."""
    v = np.asarray(v, dtype=np.float64)
    if not 1 <= d <= v.shape[-1]:
        raise DimOutOfRange(f"prefix length {d} outside [1, {v.shape[-1]}]")
    return v[..., :d]


def _pad(x, full):
    out = np.zeros(x.shape[:-1] + (full,))
    out[..., : x.shape[-1]] = x
    return out


def mrl_loss(task, batch, mrl, loss_config=LossConfig(), router=hybrid_loss):
    """``sum_k weights[k] * router(task, batch[:dims[k]])``.

    Gradients come back at full width; coordinates past a prefix get nothing
    from that prefix's term. ``router`` defaults to the task-routed hybrid loss
    and is swappable for the loss-ablation variants.
    """
    full = batch.dim
    if mrl.dims[-1] > full:
        raise DimOutOfRange(f"MRL dim {mrl.dims[-1]} exceeds embedding width {full}")
    value = 0.0
    grads = None
    for d, w in zip(mrl.dims, mrl.weights):
        out = router(task, batch.map(lambda x: prefix(x, d)), loss_config)
        value += w * out.value
        term = out.grads.map(lambda g: w * _pad(g, full))
        grads = term if grads is None else _add(grads, term)
    return LossOutput(value, grads)


def _add(a, b):
    # same batch type and layout; map() visits slots in a fixed order
    slots = []
    b.map(lambda y: slots.append(y) or y)
    it = iter(slots)
    return a.map(lambda x: x + next(it))
