"""Finite-difference checks of every loss gradient on seeded random batches."""

import numpy as np

from .losses import (
    LabeledBatch,
    LossConfig,
    RetrievalBatch,
    ScoredPairBatch,
    Task,
    cosent,
    info_nce,
    label_nce,
)
from .mrl import MRLConfig, mrl_loss
from .numerics import finite_diff_grad, relative_error

LOSS_NAMES = ("info_nce", "cosent", "label_nce", "mrl_loss")


def _flatten(batch):
    parts = []
    batch.map(lambda a: parts.append(np.asarray(a, dtype=np.float64)) or a)
    return parts


def _rebuild(batch, flat):
    """``batch`` with its slots replaced, in ``map`` order, from ``flat``."""
    offset = [0]

    def take(a):
        a = np.asarray(a)
        out = flat[offset[0] : offset[0] + a.size].reshape(a.shape)
        offset[0] += a.size
        return out

    return batch.map(take)


def check_batch(fn, batch, h=1e-6):
    """Relative error between ``fn(batch).grads`` and central differences."""
    x0 = np.concatenate([p.ravel() for p in _flatten(batch)])
    numeric = finite_diff_grad(lambda x: fn(_rebuild(batch, x)).value, x0, h=h)
    analytic = np.concatenate([g.ravel() for g in _flatten(fn(batch).grads)])
    return relative_error(analytic, numeric)


def random_batch(kind, rng, n=3, dim=8, n_neg=2):
    """A random batch of ``kind`` ("retrieval", "scored" or "labeled")."""
    def m(rows):
        return rng.normal(size=(rows, dim))

    if kind == "retrieval":
        return RetrievalBatch(m(n), m(n), [m(n_neg) for _ in range(n)])
    if kind == "scored":
        return ScoredPairBatch(m(n), m(n), rng.integers(0, 4, size=n).astype(float))
    if kind == "labeled":
        return LabeledBatch(m(n), m(n), [m(n_neg) for _ in range(n)])
    raise ValueError(f"unknown batch kind {kind!r}")


_KIND = {Task.RETRIEVAL: "retrieval", Task.RERANKING: "retrieval", Task.STS: "scored",
         Task.PAIR_CLASSIFICATION: "scored", Task.CLASSIFICATION: "labeled", Task.CLUSTERING: "labeled"}


def gradient_suite(n_batches=20, seed=0, tau=0.05):
    """``{loss name: max relative error over n_batches random batches}``.

    The Matryoshka check cycles through the six tasks with prefix dims
    (2, 4, 8) on 8-dim embeddings.
    """
    rng = np.random.default_rng(seed)
    tasks = list(Task)
    mrl = MRLConfig((2, 4, 8))
    cfg = LossConfig(tau, tau, tau)
    errs = {name: [] for name in LOSS_NAMES}
    for i in range(n_batches):
        errs["info_nce"].append(check_batch(lambda b: info_nce(b, tau), random_batch("retrieval", rng)))
        errs["cosent"].append(check_batch(lambda b: cosent(b, tau), random_batch("scored", rng)))
        errs["label_nce"].append(check_batch(lambda b: label_nce(b, tau), random_batch("labeled", rng)))
        task = tasks[i % len(tasks)]
        errs["mrl_loss"].append(
            check_batch(lambda b: mrl_loss(task, b, mrl, cfg), random_batch(_KIND[task], rng)))
    return {name: float(max(v)) for name, v in errs.items()}
