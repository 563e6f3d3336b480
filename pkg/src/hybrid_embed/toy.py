"""Seeded synthetic corpora for desk-scale experiments.

A :class:`ToyWorld` is a vocabulary of invented words with latent structure:

* ``n_topics`` topics laid out on a line, each with its own words. Topic
  distance sets the graded similarity of STS pairs and the binary label of
  pair-classification pairs.
* every topic splits into ``subtopics``; a retrieval query and its relevant
  documents share a subtopic.
* a *sentiment* attribute (classification) and a *domain* attribute
  (clustering). A marked text carries ``marked_markers`` words from its
  class's marker list, and by default the class label is the first word of
  that list, so label embeddings live in the same vocabulary as the texts.

Every text mixes in filler words shared by all classes, so the untrained
encoder sees only a blurred version of each structure.
"""

from dataclasses import dataclass
from pathlib import Path
import string

import numpy as np

from .data import LabeledExample, RetrievalExample, ScoredExample, TaskDataset, load_jsonl, write_jsonl
from .evaluation import (
    ClassificationSet,
    ClusteringSet,
    PairSet,
    RerankingSet,
    RetrievalSet,
    STSSet,
    dump_eval_jsonl,
    load_eval_jsonl,
)
from .losses import Task

LETTERS = np.array(list(string.ascii_lowercase))


def sts_score(t1, t2, width=4.0):
    """Gold similarity in [0, 5] falling linearly with topic distance."""
    return 5.0 * max(0.0, 1.0 - abs(t1 - t2) / width)


def pair_label(t1, t2):
    return int(abs(t1 - t2) <= 1)


@dataclass
class ToyWorld:
    seed: int = 0
    n_topics: int = 8
    topic_words: int = 16
    subtopics: int = 5
    subtopic_words: int = 4
    n_sentiments: int = 4
    n_domains: int = 6
    marker_words: int = 8
    filler_words: int = 120
    n_filler: int = 4
    marked_markers: int = 2
    marked_topic: int = 1
    marked_filler: int = 3
    label_from_markers: bool = True

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self._used = set()
        self.topics = [self._words(self.topic_words) for _ in range(self.n_topics)]
        self.sub = [[self._words(self.subtopic_words) for _ in range(self.subtopics)] for _ in range(self.n_topics)]
        self.sentiment_markers = [self._words(self.marker_words) for _ in range(self.n_sentiments)]
        self.domain_markers = [self._words(self.marker_words) for _ in range(self.n_domains)]
        self.filler = self._words(self.filler_words)
        if self.label_from_markers:
            self.sentiment_labels = [m[0] for m in self.sentiment_markers]
            self.domain_labels = [m[0] for m in self.domain_markers]
        else:
            self.sentiment_labels = [self._word() for _ in range(self.n_sentiments)]
            self.domain_labels = [self._word() for _ in range(self.n_domains)]

    def _word(self):
        while True:
            w = "".join(self.rng.choice(LETTERS, size=self.rng.integers(4, 8)))
            if w not in self._used:
                self._used.add(w)
                return w

    def _words(self, n):
        return [self._word() for _ in range(n)]

    def _pick(self, pool, k):
        return [pool[i] for i in self.rng.choice(len(pool), size=k, replace=False)]

    def _join(self, words):
        words = list(words)
        self.rng.shuffle(words)
        return " ".join(words)

    def _randint(self, n):
        return int(self.rng.integers(n))

    # ---- text recipes ----------------------------------------------------------

    def topical(self, topic, n_topic=3):
        return self._join(self._pick(self.topics[topic], n_topic) + self._pick(self.filler, self.n_filler))

    def query(self, topic, sub):
        return self._join(self._pick(self.sub[topic][sub], 2) + self._pick(self.topics[topic], 1)
                          + self._pick(self.filler, 1))

    def document(self, topic, sub):
        return self._join(self._pick(self.sub[topic][sub], 2) + self._pick(self.topics[topic], 2)
                          + self._pick(self.filler, self.n_filler))

    def marked(self, markers):
        """A text carrying attribute marker words over topical background."""
        words = self._pick(self.topics[self._randint(self.n_topics)], self.marked_topic)
        words += self._pick(self.filler, self.marked_filler)
        return self._join(words + self._pick(markers, self.marked_markers))

    def scored_pairs(self, n):
        out = []
        for _ in range(n):
            t1 = self._randint(self.n_topics)
            t2 = min(self.n_topics - 1, max(0, t1 + int(self.rng.integers(-5, 6))))
            out.append((self.topical(t1), self.topical(t2), t1, t2))
        return out

    def _labeled(self, n, markers, labels):
        out = []
        for _ in range(n):
            c = self._randint(len(labels))
            neg = tuple(l for i, l in enumerate(labels) if i != c)
            out.append(LabeledExample(self.marked(markers[c]), labels[c], neg))
        return out

    # ---- training data ---------------------------------------------------------

    def train_datasets(self, n_retrieval=320, n_sts=320, n_pair=320, n_classification=320, n_clustering=320):
        retrieval = []
        for _ in range(n_retrieval):
            t, s = self._randint(self.n_topics), self._randint(self.subtopics)
            other = (s + 1 + self._randint(self.subtopics - 1)) % self.subtopics
            retrieval.append(RetrievalExample(self.query(t, s), (self.document(t, s),), (self.document(t, other),)))
        sts = [ScoredExample(a, b, sts_score(t1, t2)) for a, b, t1, t2 in self.scored_pairs(n_sts)]
        pair = [ScoredExample(a, b, float(pair_label(t1, t2))) for a, b, t1, t2 in self.scored_pairs(n_pair)]
        return [
            TaskDataset(Task.RETRIEVAL, retrieval, "toy_retrieval"),
            TaskDataset(Task.STS, sts, "toy_sts"),
            TaskDataset(Task.PAIR_CLASSIFICATION, pair, "toy_pair"),
            TaskDataset(Task.CLASSIFICATION, self._labeled(n_classification, self.sentiment_markers, self.sentiment_labels), "toy_classification"),
            TaskDataset(Task.CLUSTERING, self._labeled(n_clustering, self.domain_markers, self.domain_labels), "toy_clustering"),
        ]

    # ---- evaluation data -------------------------------------------------------

    def eval_suites(self, per_class=60, n_cluster=480, n_pairs=600, n_queries=160, docs_per_subtopic=3,
                    n_rerank=120, rerank_candidates=10):
        def classes(k, n):
            return [c for c in range(k) for _ in range(n)]

        tr, te = classes(self.n_sentiments, per_class), classes(self.n_sentiments, per_class)
        classification = ClassificationSet(
            [self.marked(self.sentiment_markers[c]) for c in tr], [self.sentiment_labels[c] for c in tr],
            [self.marked(self.sentiment_markers[c]) for c in te], [self.sentiment_labels[c] for c in te],
            name="toy_classification",
        )
        cl = [i % self.n_domains for i in range(n_cluster)]
        clustering = ClusteringSet([self.marked(self.domain_markers[c]) for c in cl], cl, name="toy_clustering")

        pairs = self.scored_pairs(n_pairs)
        pair = PairSet([p[0] for p in pairs], [p[1] for p in pairs], [pair_label(p[2], p[3]) for p in pairs],
                       name="toy_pair")
        pairs = self.scored_pairs(n_pairs)
        sts = STSSet([p[0] for p in pairs], [p[1] for p in pairs], [sts_score(p[2], p[3]) for p in pairs],
                     name="toy_sts")

        corpus, owner = [], []
        for t in range(self.n_topics):
            for s in range(self.subtopics):
                for _ in range(docs_per_subtopic):
                    corpus.append(self.document(t, s))
                    owner.append((t, s))
        queries, relevant = [], []
        for _ in range(n_queries):
            t, s = self._randint(self.n_topics), self._randint(self.subtopics)
            queries.append(self.query(t, s))
            relevant.append({i for i, o in enumerate(owner) if o == (t, s)})
        retrieval = RetrievalSet(queries, corpus, relevant, name="toy_retrieval")

        rq, rc, rr = [], [], []
        for _ in range(n_rerank):
            t, s = self._randint(self.n_topics), self._randint(self.subtopics)
            cands = [self.document(t, s)]
            for i in range(rerank_candidates - 1):
                if i % 2 == 0:
                    cands.append(self.document(t, (s + 1 + self._randint(self.subtopics - 1)) % self.subtopics))
                else:
                    cands.append(self.document(self._randint(self.n_topics), self._randint(self.subtopics)))
            rq.append(self.query(t, s))
            rc.append(cands)
            rr.append({0})
        reranking = RerankingSet(rq, rc, rr, name="toy_reranking")
        return [classification, clustering, pair, reranking, retrieval, sts]


def make_suite(seed=0, **world_kw):
    """``(train_datasets, eval_suites)`` for the multi-task toy world."""
    world = ToyWorld(seed, **world_kw)
    return world.train_datasets(), world.eval_suites()


def paraphrase_task(seed=0, n_clusters=8, per_cluster=20, held_out=4, content=4, filler=3):
    """Retrieval toy: ``n_clusters`` groups of ``per_cluster`` paraphrases.

    A paraphrase draws ``content`` of its cluster's 10 content words plus
    ``filler`` words from a pool of 40 shared by all clusters. Training pairs
    two paraphrases of one cluster with a hard negative from another cluster. For evaluation the last ``held_out``
    paraphrases of every cluster are queries against the remaining
    paraphrases as corpus; any same-cluster document is relevant.

    Returns ``(train_dataset, RetrievalSet)``.
    """
    world = ToyWorld(seed, n_topics=n_clusters, topic_words=10, filler_words=40, n_filler=filler)
    para = [[world.topical(c, n_topic=content) for _ in range(per_cluster)] for c in range(n_clusters)]
    rng = np.random.default_rng([seed, 7])
    train_part = [p[: per_cluster - held_out] for p in para]
    examples = []
    for c, texts in enumerate(train_part):
        for i, q in enumerate(texts):
            j = (i + 1 + rng.integers(len(texts) - 1)) % len(texts)
            other = (c + 1 + rng.integers(n_clusters - 1)) % n_clusters
            examples.append(RetrievalExample(q, (texts[j],), (train_part[other][rng.integers(len(texts))],)))
    corpus, owner = [], []
    for c, texts in enumerate(train_part):
        corpus += texts
        owner += [c] * len(texts)
    queries, relevant = [], []
    for c, p in enumerate(para):
        for q in p[per_cluster - held_out :]:
            queries.append(q)
            relevant.append({i for i, o in enumerate(owner) if o == c})
    return (TaskDataset(Task.RETRIEVAL, examples, "toy_paraphrase"),
            RetrievalSet(queries, corpus, relevant, name="toy_paraphrase"))


SUITE_PARTS = ("train", "eval", "paraphrase")
# training order fixes the batch schedule, so it is not left to the filesystem
TRAIN_NAMES = ("toy_retrieval", "toy_sts", "toy_pair", "toy_classification", "toy_clustering")


def write_suite(root, seed=0):
    """Write the multi-task suite and the paraphrase task as JSONL under ``root``.

    Layout: ``train/<name>.jsonl`` and ``eval/<name>.jsonl`` for the
    multi-task world, ``paraphrase/train.jsonl`` and ``paraphrase/eval.jsonl``
    for :func:`paraphrase_task`. Returns the written paths.
    """
    root = Path(root)
    for part in SUITE_PARTS:
        (root / part).mkdir(parents=True, exist_ok=True)
    train, suites = make_suite(seed)
    written = []
    for ds in train:
        path = root / "train" / f"{ds.name}.jsonl"
        write_jsonl(path, ds.task, ds.examples)
        written.append(path)
    for ds in suites:
        path = root / "eval" / f"{ds.name}.jsonl"
        dump_eval_jsonl(ds, path)
        written.append(path)
    para_train, para_eval = paraphrase_task(seed)
    write_jsonl(root / "paraphrase" / "train.jsonl", para_train.task, para_train.examples)
    dump_eval_jsonl(para_eval, root / "paraphrase" / "eval.jsonl")
    return written + [root / "paraphrase" / "train.jsonl", root / "paraphrase" / "eval.jsonl"]


def load_suite(root):
    """``(train_datasets, eval_suites)`` read back from :func:`write_suite` output."""
    root = Path(root)
    train = [load_jsonl(root / "train" / f"{name}.jsonl") for name in TRAIN_NAMES]
    suites = [load_eval_jsonl(p) for p in sorted((root / "eval").glob("*.jsonl"))]
    return train, suites


def load_paraphrase(root):
    root = Path(root) / "paraphrase"
    train = load_jsonl(root / "train.jsonl")
    return TaskDataset(train.task, train.examples, "toy_paraphrase"), load_eval_jsonl(root / "eval.jsonl")
