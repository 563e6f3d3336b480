"""Loss-variant and Matryoshka ablations on toy suites.

All variants train on the same datasets and batch schedule; they differ only
in the loss a batch is routed to:

``La``  everything is InfoNCE with in-batch negatives. In each graded-pair
        batch, pairs scored at or above the score midpoint become
        (left, right) positives and the rest are dropped. Labeled examples
        become ordinary retrieval triplets (text, label, sampled other
        labels), so other rows carrying the same label act as in-batch
        negatives.
``Lb``  as ``La`` but graded pairs use CoSENT.
``Lc``  the full task-routed hybrid loss: labeled examples see their own
        label negatives and nothing else.
"""

from dataclasses import replace

import numpy as np

from .data import LabeledExample, RetrievalExample, ScoredExample, TaskDataset
from .encoder import EncoderConfig
from .evaluation import eval_all
from .losses import (
    LossOutput,
    RetrievalBatch,
    ScoredPairBatch,
    Task,
    hybrid_loss,
    info_nce,
)
from .mrl import MRLConfig
from .trainer import TrainConfig, train

VARIANTS = ("La", "Lb", "Lc")


class PairsAsInfoNCE:
    """Router that trains graded-pair batches with in-batch InfoNCE.

    Rows whose gold score reaches ``thresholds[task]`` are kept as
    (left, right) positives and everything else in the batch is dropped,
    which is the information lost by squeezing graded labels into pairs.
    Other batches use the hybrid loss.
    """

    def __init__(self, thresholds):
        self.thresholds = {Task(t): v for t, v in thresholds.items()}

    def __call__(self, task, batch, config):
        if not isinstance(batch, ScoredPairBatch):
            return hybrid_loss(task, batch, config)
        keep = np.flatnonzero(batch.scores >= self.thresholds[Task(task)])
        gl, gr = np.zeros_like(batch.lefts), np.zeros_like(batch.rights)
        if len(keep) == 0:
            return LossOutput(0.0, ScoredPairBatch(gl, gr, batch.scores))
        out = info_nce(RetrievalBatch(batch.lefts[keep], batch.rights[keep]), config.tau_sts)
        gl[keep], gr[keep] = out.grads.queries, out.grads.positives
        return LossOutput(out.value, ScoredPairBatch(gl, gr, batch.scores))


def score_midpoints(datasets):
    """Per graded task, the midpoint of the observed score range."""
    lo, hi = {}, {}
    for ds in datasets:
        if isinstance(ds.examples[0], ScoredExample):
            s = [e.score for e in ds.examples]
            lo[ds.task] = min(lo.get(ds.task, np.inf), min(s))
            hi[ds.task] = max(hi.get(ds.task, -np.inf), max(s))
    return {t: (lo[t] + hi[t]) / 2 for t in lo}


def labeled_as_triplets(dataset):
    """Labeled examples as retrieval triplets, keeping size and order."""
    examples = [RetrievalExample(e.text, (e.pos_label,), e.neg_labels) for e in dataset.examples]
    return TaskDataset(Task.RETRIEVAL, examples, dataset.name)


def variant_setup(datasets, variant):
    """``(datasets, router)`` implementing one loss variant.

    Dataset sizes, tasks and order are preserved, so every variant sees the
    same batch schedule for a given seed.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown loss variant {variant!r}")
    if variant == "Lc":
        return list(datasets), hybrid_loss
    sets = [labeled_as_triplets(ds) if isinstance(ds.examples[0], LabeledExample) else ds for ds in datasets]
    return sets, (PairsAsInfoNCE(score_midpoints(datasets)) if variant == "La" else hybrid_loss)


def run_variant(train_sets, eval_suites, variant, seed, encoder_config=EncoderConfig(),
                train_config=TrainConfig(), eval_dim=None):
    cfg = replace(train_config, seed=seed)
    sets, router = variant_setup(train_sets, variant)
    ckpt, log = train(sets, encoder_config, cfg, router=router)
    report = eval_all(ckpt.encoder(), eval_suites, eval_dim or encoder_config.out_dim)
    return report, ckpt, log


def loss_ablation(train_sets, eval_suites, seeds=(0, 1, 2), **kw):
    """``{variant: [report per seed]}``."""
    return {v: [run_variant(train_sets, eval_suites, v, s, **kw)[0] for s in seeds] for v in VARIANTS}


def mrl_truncation(train_sets, eval_suites, dims=(16, 32, 64, 128), seed=0,
                   encoder_config=EncoderConfig(), train_config=TrainConfig()):
    """Train once with Matryoshka over ``dims``; report each eval prefix."""
    cfg = replace(train_config, seed=seed, mrl=MRLConfig(tuple(dims)))
    ckpt, _ = train(train_sets, encoder_config, cfg)
    enc = ckpt.encoder()
    return {d: eval_all(enc, eval_suites, d) for d in dims}


def mrl_vs_single(train_sets, eval_suites, dims=(16, 32, 64, 128), seed=0,
                  encoder_config=EncoderConfig(), train_config=TrainConfig()):
    """Full-dimension reports for a Matryoshka run and a single-dim run."""
    full = encoder_config.out_dim
    out = {}
    for name, mrl in (("mrl", MRLConfig(tuple(dims))), ("single", MRLConfig.single(full))):
        ckpt, _ = train(train_sets, encoder_config, replace(train_config, seed=seed, mrl=mrl))
        out[name] = eval_all(ckpt.encoder(), eval_suites, full)
    return out


def points(reports):
    return np.array([100 * r.average for r in reports])
