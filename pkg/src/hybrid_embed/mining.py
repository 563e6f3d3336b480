"""Hard-negative mining from a fixed rank window of an exhaustive cosine scan."""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCorpus, LengthMismatch, WindowEmpty
from .numerics import as_vec, normalize_rows


@dataclass(frozen=True)
class MiningConfig:
    rank_lo: int = 50
    rank_hi: int = 100
    samples_per_query: int = 15
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.rank_lo <= self.rank_hi:
            raise ValueError("need 1 <= rank_lo <= rank_hi")
        if self.samples_per_query < 1:
            raise ValueError("samples_per_query must be >= 1")


def rank_corpus(query_emb, corpus_embs):
    """Corpus indices by descending cosine to the query; ties by index."""
    corpus = np.atleast_2d(as_vec(corpus_embs))
    if corpus.size == 0:
        raise EmptyCorpus("corpus is empty")
    q = as_vec(query_emb)
    if q.shape[-1] != corpus.shape[1]:
        raise LengthMismatch(f"query dim {q.shape[-1]} != corpus dim {corpus.shape[1]}")
    qn, _ = normalize_rows(q)
    cn, _ = normalize_rows(corpus)
    scores = np.clip(cn @ qn[0], -1.0, 1.0)
    # stable sort on the negated score keeps ascending index among ties
    return np.argsort(-scores, kind="stable")


def rank_window(ranked, n_corpus, config):
    """1-based inclusive positions ``[rank_lo, min(rank_hi, n)]`` of ``ranked``."""
    if n_corpus < config.rank_lo:
        return ranked[:0]
    return ranked[config.rank_lo - 1 : min(config.rank_hi, n_corpus)]


def mine_negatives(query_emb, corpus_embs, gold_indices, config=MiningConfig(), query_index=0):
    """Sample up to ``samples_per_query`` non-gold documents from the rank window.

    Gold documents are removed after ranking, so window positions are the
    ranks an operator would see in a raw retrieval dump. The RNG for query
    ``i`` is seeded with ``config.seed ^ i``; the result is listed in rank
    order.
    """
    corpus = np.atleast_2d(as_vec(corpus_embs))
    if corpus.size == 0:
        raise EmptyCorpus("corpus is empty")
    ranked = rank_corpus(query_emb, corpus)
    gold = {int(g) for g in gold_indices}
    window = [int(i) for i in rank_window(ranked, len(corpus), config) if int(i) not in gold]
    if not window:
        raise WindowEmpty(
            f"no candidates at ranks {config.rank_lo}-{config.rank_hi} "
            f"(corpus size {len(corpus)}, {len(gold)} gold)"
        )
    rng = np.random.default_rng(config.seed ^ query_index)
    k = min(config.samples_per_query, len(window))
    picked = set(rng.choice(len(window), size=k, replace=False).tolist())
    return [window[j] for j in range(len(window)) if j in picked]


def mine_all(query_embs, corpus_embs, gold_sets, config=MiningConfig()):
    """Mine every query; query ``i`` uses RNG seed ``config.seed ^ i``."""
    return [
        mine_negatives(q, corpus_embs, gold, config, query_index=i)
        for i, (q, gold) in enumerate(zip(query_embs, gold_sets))
    ]
