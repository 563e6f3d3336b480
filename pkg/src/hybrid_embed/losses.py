"""Contrastive losses with exact input gradients.

* :func:`info_nce` -- softmax over the positive, own hard negatives and
  (optionally) every other row's documents.
* :func:`cosent` -- ranking loss over pairs of pairs ordered by gold score.
* :func:`label_nce` -- softmax over the example's own label set only.
* :func:`hybrid_loss` -- routes a batch to one of the above by task.

Each loss returns a :class:`LossOutput` whose ``grads`` is a batch of the same
type as the input, holding ``dL/d(embedding)`` in every slot.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from .errors import EmptyBatch, EmptyNegatives, LengthMismatch, TaskBatchMismatch
from .numerics import (
    cosine_matrix,
    cosine_matrix_backward,
    log_sum_exp,
    rowwise_cosine,
    rowwise_cosine_backward,
)


class Task(str, Enum):
    RETRIEVAL = "retrieval"
    RERANKING = "reranking"
    STS = "sts"
    PAIR_CLASSIFICATION = "pair_classification"
    CLASSIFICATION = "classification"
    CLUSTERING = "clustering"

    def __str__(self):
        return self.value


TASKS = tuple(Task)


@dataclass(frozen=True)
class LossConfig:
    tau_retrieval: float = 0.05
    tau_sts: float = 0.05
    tau_cls: float = 0.05

    def __post_init__(self):
        if min(self.tau_retrieval, self.tau_sts, self.tau_cls) <= 0:
            raise ValueError("temperatures must be positive")


def _matrix(x):
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.reshape(0, x.shape[-1] if x.ndim == 2 else 0)
    return np.atleast_2d(x)


def _neg_rows(rows, n, dim):
    if len(rows) != n:
        raise LengthMismatch(f"expected {n} negative rows, got {len(rows)}")
    out = []
    for r in rows:
        r = np.asarray(r, dtype=np.float64)
        out.append(r.reshape(-1, dim) if r.size else np.zeros((0, dim)))
    return out


@dataclass
class RetrievalBatch:
    """``queries[i]`` should match ``positives[i]`` against ``hard_negatives[i]``."""

    queries: np.ndarray
    positives: np.ndarray
    hard_negatives: list = field(default=None)

    def __post_init__(self):
        self.queries = _matrix(self.queries)
        self.positives = _matrix(self.positives)
        n, dim = self.queries.shape
        if self.positives.shape != (n, dim):
            raise LengthMismatch("queries and positives must have equal shapes")
        if self.hard_negatives is None:
            self.hard_negatives = [np.zeros((0, dim)) for _ in range(n)]
        self.hard_negatives = _neg_rows(self.hard_negatives, n, dim)

    @property
    def dim(self):
        return self.queries.shape[1]

    def map(self, fn):
        return RetrievalBatch(fn(self.queries), fn(self.positives), [fn(r) for r in self.hard_negatives])


@dataclass
class ScoredPairBatch:
    lefts: np.ndarray
    rights: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.lefts = _matrix(self.lefts)
        self.rights = _matrix(self.rights)
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if self.lefts.shape != self.rights.shape or len(self.scores) != len(self.lefts):
            raise LengthMismatch("lefts, rights and scores must be aligned")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")

    @property
    def dim(self):
        return self.lefts.shape[1]

    def map(self, fn):
        return ScoredPairBatch(fn(self.lefts), fn(self.rights), self.scores)


@dataclass
class LabeledBatch:
    texts: np.ndarray
    pos_labels: np.ndarray
    neg_labels: list

    def __post_init__(self):
        self.texts = _matrix(self.texts)
        self.pos_labels = _matrix(self.pos_labels)
        n, dim = self.texts.shape
        if self.pos_labels.shape != (n, dim):
            raise LengthMismatch("texts and pos_labels must have equal shapes")
        self.neg_labels = _neg_rows(self.neg_labels, n, dim)

    @property
    def dim(self):
        return self.texts.shape[1]

    def map(self, fn):
        return LabeledBatch(fn(self.texts), fn(self.pos_labels), [fn(r) for r in self.neg_labels])


Batch = Union[RetrievalBatch, ScoredPairBatch, LabeledBatch]


@dataclass
class LossOutput:
    value: float
    grads: Batch


def _contrast(anchors, positives, negatives, tau, in_batch):
    """Shared kernel of InfoNCE and the label loss.

    Column ``i`` of the candidate matrix is row ``i``'s positive; negatives
    follow, tagged with their owning row. Without ``in_batch`` a row only sees
    its own columns.
    """
    n = len(anchors)
    counts = [len(r) for r in negatives]
    docs = np.vstack([positives, *negatives]) if sum(counts) else positives
    owner = np.concatenate([np.arange(n), np.repeat(np.arange(n), counts)])

    S = cosine_matrix(anchors, docs)
    logits = S / tau
    if not in_batch:
        logits = np.where(owner[None, :] == np.arange(n)[:, None], logits, -np.inf)
    lse = log_sum_exp(logits, axis=1)
    pos = logits[np.arange(n), np.arange(n)]
    value = float(np.mean(lse - pos))

    probs = np.exp(logits - lse[:, None])
    probs[np.arange(n), np.arange(n)] -= 1.0
    dS = probs / (n * tau)
    dA, dD = cosine_matrix_backward(anchors, docs, dS)
    dP = dD[:n]
    splits = np.cumsum(counts)[:-1]
    dN = np.split(dD[n:], splits) if n else []
    return value, dA, dP, dN


def info_nce(batch, tau=0.05, use_in_batch=True):
    """InfoNCE with hard negatives and, by default, in-batch negatives.

    In-batch candidates for row ``i`` are every other row's positive and
    every other row's hard negatives.
    """
    if len(batch.queries) == 0:
        raise EmptyBatch("retrieval batch is empty")
    value, dq, dp, dn = _contrast(batch.queries, batch.positives, batch.hard_negatives, tau, use_in_batch)
    return LossOutput(value, RetrievalBatch(dq, dp, dn))


def cosent(batch, tau=0.05):
    """CoSENT: ``log(1 + sum exp((cos_lo - cos_hi) / tau))`` over every ordered
    pair of pairs whose gold scores satisfy ``score_hi > score_lo`` strictly."""
    m = len(batch.scores)
    if m == 0:
        raise EmptyBatch("scored pair batch is empty")
    cos = rowwise_cosine(batch.lefts, batch.rights)
    hi, lo = np.nonzero(batch.scores[:, None] > batch.scores[None, :])
    exponents = (cos[lo] - cos[hi]) / tau
    logits = np.concatenate([[0.0], exponents])
    value = log_sum_exp(logits)

    weights = np.exp(logits[1:] - value) / tau
    dcos = np.zeros(m)
    np.add.at(dcos, lo, weights)
    np.add.at(dcos, hi, -weights)
    dl, dr = rowwise_cosine_backward(batch.lefts, batch.rights, dcos)
    return LossOutput(value, ScoredPairBatch(dl, dr, batch.scores))


def label_nce(batch, tau=0.05):
    """Label-anchored InfoNCE: each text competes its own positive label
    against its own negative labels and nothing from other rows."""
    if len(batch.texts) == 0:
        raise EmptyBatch("labeled batch is empty")
    if any(len(r) == 0 for r in batch.neg_labels):
        raise EmptyNegatives("every labeled example needs at least one negative label")
    value, dx, dp, dn = _contrast(batch.texts, batch.pos_labels, batch.neg_labels, tau, in_batch=False)
    return LossOutput(value, LabeledBatch(dx, dp, dn))


_ROUTES = {
    Task.RETRIEVAL: RetrievalBatch,
    Task.RERANKING: RetrievalBatch,
    Task.STS: ScoredPairBatch,
    Task.PAIR_CLASSIFICATION: ScoredPairBatch,
    Task.CLASSIFICATION: LabeledBatch,
    Task.CLUSTERING: LabeledBatch,
}


def hybrid_loss(task, batch, config=LossConfig()):
    """Pick the loss by task type: retrieval-like tasks use InfoNCE with
    in-batch negatives, graded pair tasks use CoSENT, label tasks use the
    label loss."""
    task = Task(task)
    if not isinstance(batch, _ROUTES[task]):
        raise TaskBatchMismatch(f"task {task} expects {_ROUTES[task].__name__}, got {type(batch).__name__}")
    if task in (Task.RETRIEVAL, Task.RERANKING):
        return info_nce(batch, config.tau_retrieval, use_in_batch=True)
    if task in (Task.STS, Task.PAIR_CLASSIFICATION):
        return cosent(batch, config.tau_sts)
    return label_nce(batch, config.tau_cls)
