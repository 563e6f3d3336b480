"""Six-task embedding evaluation producing a per-task table and its average.

An *encoder* is any callable mapping a list of texts to an ``(n, dim)``
array. Every metric works on cosine geometry of the ``eval_dim`` prefix.
"""

from collections import defaultdict
from dataclasses import dataclass, field
import json
import math
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .errors import (
    ConstantInput,
    DegenerateClusters,
    DimOutOfRange,
    MissingSplit,
    NoRelevantDocs,
    ParseError,
    SchemaError,
    SingleClass,
)
from .losses import TASKS, Task
from .numerics import normalize_rows

TASK_COLUMNS = {
    Task.CLASSIFICATION: "Class.",
    Task.CLUSTERING: "Cluster.",
    Task.PAIR_CLASSIFICATION: "Pair.",
    Task.RERANKING: "Rerank.",
    Task.RETRIEVAL: "Retr.",
    Task.STS: "STS",
}


@dataclass
class ClassificationSet:
    train_texts: list
    train_labels: list
    test_texts: list
    test_labels: list
    name: str = "classification"
    task: Task = Task.CLASSIFICATION


@dataclass
class ClusteringSet:
    texts: list
    clusters: list
    name: str = "clustering"
    task: Task = Task.CLUSTERING


@dataclass
class PairSet:
    texts_a: list
    texts_b: list
    labels: list
    name: str = "pair_classification"
    task: Task = Task.PAIR_CLASSIFICATION


@dataclass
class RetrievalSet:
    queries: list
    corpus: list
    relevant: list  # per query, a set of corpus indices
    name: str = "retrieval"
    task: Task = Task.RETRIEVAL


@dataclass
class RerankingSet:
    queries: list
    candidates: list  # per query, a list of candidate texts
    relevant: list  # per query, a set of indices into its candidates
    name: str = "reranking"
    task: Task = Task.RERANKING


@dataclass
class STSSet:
    texts_a: list
    texts_b: list
    scores: list
    name: str = "sts"
    task: Task = Task.STS


def embed(encoder, texts, eval_dim):
    """Unit-normalised ``eval_dim`` prefix of the encoder's embeddings."""
    E = np.asarray(encoder(list(texts)), dtype=np.float64)
    if not 1 <= eval_dim <= E.shape[1]:
        raise DimOutOfRange(f"eval_dim {eval_dim} outside [1, {E.shape[1]}]")
    U, _ = normalize_rows(E[:, :eval_dim])
    return U


# ---- metrics on precomputed quantities -------------------------------------

def nearest_centroid_accuracy(train_emb, train_labels, test_emb, test_labels):
    labels = sorted(set(train_labels))
    train_labels = np.asarray(train_labels)
    centroids = np.stack([train_emb[train_labels == l].mean(axis=0) for l in labels])
    # ties resolve to the first label in sorted order
    pred = np.argmax(test_emb @ centroids.T, axis=1)
    return float(np.mean(np.asarray(labels)[pred] == np.asarray(test_labels)))


def kmeans(X, k, seed=0, restarts=10, max_iter=100):
    """Lloyd's algorithm; initial centroids are ``k`` distinct data points.

    Returns the assignment with the lowest inertia across restarts.
    """
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(restarts):
        C = X[rng.choice(len(X), size=k, replace=False)].copy()
        assign = None
        for _ in range(max_iter):
            d2 = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
            new = np.argmin(d2, axis=1)
            if assign is not None and np.array_equal(new, assign):
                break
            assign = new
            for j in range(k):
                members = X[assign == j]
                if len(members):
                    C[j] = members.mean(axis=0)
        inertia = float(((X - C[assign]) ** 2).sum())
        if inertia < best_inertia:
            best, best_inertia = assign, inertia
    return best


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def v_measure(gold, pred):
    """Harmonic mean of homogeneity and completeness (natural-log entropies)."""
    _, g = np.unique(gold, return_inverse=True)
    _, c = np.unique(pred, return_inverse=True)
    table = np.zeros((g.max() + 1, c.max() + 1))
    np.add.at(table, (g, c), 1)
    n = table.sum()
    h_g = _entropy(table.sum(axis=1))
    h_c = _entropy(table.sum(axis=0))
    nz = table > 0
    joint = table[nz] / n
    # conditional entropies H(G|C) and H(C|G)
    col = np.broadcast_to(table.sum(axis=0, keepdims=True), table.shape)[nz] / n
    row = np.broadcast_to(table.sum(axis=1, keepdims=True), table.shape)[nz] / n
    h_g_given_c = float(-(joint * np.log(joint / col)).sum())
    h_c_given_g = float(-(joint * np.log(joint / row)).sum())
    homogeneity = 1.0 if h_g == 0 else 1 - h_g_given_c / h_g
    completeness = 1.0 if h_c == 0 else 1 - h_c_given_g / h_c
    if homogeneity + completeness == 0:
        return 0.0
    return 2 * homogeneity * completeness / (homogeneity + completeness)


def best_threshold_accuracy(scores, labels):
    """Max accuracy of ``score >= t`` over every observed ``t`` (and +inf)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    n, total_pos = len(s), int(y.sum())
    # predicting the top i items positive: tp = cum positives, tn = negatives below
    cum_pos = np.concatenate([[0], np.cumsum(y)])
    i = np.arange(n + 1)
    correct = cum_pos + (n - i) - (total_pos - cum_pos)
    # only cut where the score changes, so ties fall on the same side
    valid = np.ones(n + 1, dtype=bool)
    valid[1:n] = s[1:] != s[:-1]
    return float(correct[valid].max() / n)


def dcg_at_k(rels, k):
    rels = np.asarray(rels, dtype=np.float64)[:k]
    return float((rels / np.log2(np.arange(2, len(rels) + 2))).sum())


def ndcg_at_k(ranked_relevance, n_relevant, k=10):
    """Binary-relevance nDCG@k for one ranked list."""
    ideal = dcg_at_k(np.ones(min(n_relevant, k)), k)
    return dcg_at_k(ranked_relevance, k) / ideal


def average_precision(ranked_relevance):
    rel = np.asarray(ranked_relevance, dtype=np.float64)
    if rel.sum() == 0:
        return 0.0
    precision = np.cumsum(rel) / np.arange(1, len(rel) + 1)
    return float((precision * rel).sum() / rel.sum())


def _rank(query_vec, doc_mat):
    return np.argsort(-(doc_mat @ query_vec), kind="stable")


# ---- per-task evaluators ----------------------------------------------------

def eval_classification(encoder, dataset, eval_dim):
    if not dataset.train_texts or not dataset.test_texts:
        raise MissingSplit("classification needs non-empty train and test splits")
    tr = embed(encoder, dataset.train_texts, eval_dim)
    te = embed(encoder, dataset.test_texts, eval_dim)
    return nearest_centroid_accuracy(tr, dataset.train_labels, te, dataset.test_labels)


def eval_clustering(encoder, dataset, eval_dim, seed=0):
    k = len(set(dataset.clusters))
    if k < 2:
        raise DegenerateClusters("need at least two gold clusters")
    X = embed(encoder, dataset.texts, eval_dim)
    return v_measure(dataset.clusters, kmeans(X, k, seed=seed))


def eval_pair(encoder, dataset, eval_dim):
    if len(set(int(l) for l in dataset.labels)) < 2:
        raise SingleClass("pair classification needs both labels present")
    A = embed(encoder, dataset.texts_a, eval_dim)
    B = embed(encoder, dataset.texts_b, eval_dim)
    return best_threshold_accuracy(np.clip((A * B).sum(axis=1), -1, 1), dataset.labels)


def eval_retrieval(encoder, dataset, eval_dim, k=10):
    """Mean nDCG@k; documents tied on score are ordered by corpus index."""
    if any(len(r) == 0 for r in dataset.relevant):
        raise NoRelevantDocs("every query needs at least one relevant document")
    Q = embed(encoder, dataset.queries, eval_dim)
    D = embed(encoder, dataset.corpus, eval_dim)
    scores = []
    for q, rel in zip(Q, dataset.relevant):
        ranked = _rank(q, D)
        scores.append(ndcg_at_k([int(i) in rel for i in ranked], len(rel), k))
    return float(np.mean(scores))


def recall_at_k(encoder, dataset, eval_dim, k=1):
    """Fraction of queries with a relevant document in the top ``k``."""
    Q = embed(encoder, dataset.queries, eval_dim)
    D = embed(encoder, dataset.corpus, eval_dim)
    hits = [any(int(i) in rel for i in _rank(q, D)[:k]) for q, rel in zip(Q, dataset.relevant)]
    return float(np.mean(hits))


def eval_reranking(encoder, dataset, eval_dim):
    """Mean average precision over each query's own candidate list."""
    if any(len(r) == 0 for r in dataset.relevant):
        raise NoRelevantDocs("every query needs at least one relevant candidate")
    Q = embed(encoder, dataset.queries, eval_dim)
    aps = []
    for q, cands, rel in zip(Q, dataset.candidates, dataset.relevant):
        ranked = _rank(q, embed(encoder, cands, eval_dim))
        aps.append(average_precision([int(i) in rel for i in ranked]))
    return float(np.mean(aps))


def spearman(x, y):
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ConstantInput("Spearman correlation undefined for constant input")
    return float(spearmanr(x, y).statistic)


def eval_sts(encoder, dataset, eval_dim):
    A = embed(encoder, dataset.texts_a, eval_dim)
    B = embed(encoder, dataset.texts_b, eval_dim)
    return spearman(np.clip((A * B).sum(axis=1), -1, 1), dataset.scores)


EVALUATORS = {
    Task.CLASSIFICATION: eval_classification,
    Task.CLUSTERING: eval_clustering,
    Task.PAIR_CLASSIFICATION: eval_pair,
    Task.RERANKING: eval_reranking,
    Task.RETRIEVAL: eval_retrieval,
    Task.STS: eval_sts,
}


@dataclass
class EvalReport:
    """Per-task scores in [0, 1] (STS in [-1, 1]); ``average`` is the mean of
    the task columns present, each column itself a mean over its datasets."""

    per_task: dict
    per_dataset: dict = field(default_factory=dict)
    eval_dim: int = 0

    @property
    def average(self):
        return float(np.mean(list(self.per_task.values())))

    def points(self):
        return {str(t): 100 * v for t, v in self.per_task.items()} | {"average": 100 * self.average}

    def to_json(self):
        return {
            "eval_dim": self.eval_dim,
            "per_task": {str(t): v for t, v in self.per_task.items()},
            "per_dataset": self.per_dataset,
            "average": self.average,
        }

    def to_text(self, label=None):
        cols = [t for t in TASK_COLUMNS if t in self.per_task]
        head = ["Eval Dim."] + [TASK_COLUMNS[t] for t in cols] + ["Avg."]
        row = [str(label if label is not None else self.eval_dim)]
        row += [f"{100 * self.per_task[t]:.2f}" for t in cols] + [f"{100 * self.average:.2f}"]
        widths = [max(len(h), len(r)) for h, r in zip(head, row)]
        fmt = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        return fmt(head) + "\n" + fmt(row)


def eval_all(encoder, suites, eval_dim, seed=0):
    """Evaluate every dataset, average within each task, then across tasks."""
    by_task = defaultdict(list)
    per_dataset = {}
    cache = {}

    def cached(texts):
        missing = [t for t in dict.fromkeys(texts) if t not in cache]
        if missing:
            for t, e in zip(missing, np.asarray(encoder(missing), dtype=np.float64)):
                cache[t] = e
        return np.stack([cache[t] for t in texts])

    for ds in suites:
        fn = EVALUATORS[Task(ds.task)]
        score = fn(cached, ds, eval_dim, seed=seed) if fn is eval_clustering else fn(cached, ds, eval_dim)
        by_task[Task(ds.task)].append(score)
        per_dataset[ds.name] = score
    per_task = {t: float(np.mean(by_task[t])) for t in TASKS if t in by_task}
    return EvalReport(per_task, per_dataset, eval_dim)


def format_reports(reports):
    """Stack several reports (e.g. one per eval dim) into one aligned table."""
    lines = [r.to_text().splitlines() for r in reports]
    return "\n".join([lines[0][0]] + [l[1] for l in lines]) if lines else ""


# ---- JSONL suites -------------------------------------------------------------

def load_eval_jsonl(path):
    """Read one evaluation dataset. Record shapes by task:

    classification  {"text", "label", "split": "train"|"test"}
    clustering      {"text", "cluster"}
    pair_classification  {"text_a", "text_b", "label": 0|1}
    sts             {"text_a", "text_b", "score"}
    retrieval       {"kind": "doc", "id", "text"} / {"kind": "query", "text", "relevant": [ids]}
    reranking       {"query", "positive": [...], "negative": [...]}

    Every record also carries ``"task"``.
    """
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(lineno, str(exc)) from None
                if not isinstance(rec, dict):
                    raise ParseError(lineno, "record must be a JSON object")
                rows.append((lineno, rec))
    if not rows:
        raise SchemaError(0, "task", f"{path} is empty")
    try:
        task = Task(rows[0][1].get("task"))
    except ValueError:
        raise SchemaError(rows[0][0], "task", f"unknown task {rows[0][1].get('task')!r}") from None
    name = path.stem

    def need(lineno, rec, key):
        if key not in rec:
            raise SchemaError(lineno, key, "missing")
        return rec[key]

    if task is Task.CLASSIFICATION:
        split = {"train": ([], []), "test": ([], [])}
        for ln, r in rows:
            s = need(ln, r, "split")
            if s not in split:
                raise SchemaError(ln, "split", f"expected train or test, got {s!r}")
            split[s][0].append(need(ln, r, "text"))
            split[s][1].append(need(ln, r, "label"))
        return ClassificationSet(*split["train"], *split["test"], name=name)
    if task is Task.CLUSTERING:
        return ClusteringSet([need(ln, r, "text") for ln, r in rows], [need(ln, r, "cluster") for ln, r in rows], name=name)
    if task is Task.PAIR_CLASSIFICATION:
        return PairSet([need(ln, r, "text_a") for ln, r in rows], [need(ln, r, "text_b") for ln, r in rows],
                       [int(need(ln, r, "label")) for ln, r in rows], name=name)
    if task is Task.STS:
        return STSSet([need(ln, r, "text_a") for ln, r in rows], [need(ln, r, "text_b") for ln, r in rows],
                      [float(need(ln, r, "score")) for ln, r in rows], name=name)
    if task is Task.RERANKING:
        queries, cands, rels = [], [], []
        for ln, r in rows:
            pos, neg = need(ln, r, "positive"), need(ln, r, "negative")
            queries.append(need(ln, r, "query"))
            cands.append(list(pos) + list(neg))
            rels.append(set(range(len(pos))))
        return RerankingSet(queries, cands, rels, name=name)
    docs, queries = {}, []
    for ln, r in rows:
        kind = need(ln, r, "kind")
        if kind == "doc":
            docs[need(ln, r, "id")] = need(ln, r, "text")
        elif kind == "query":
            queries.append((ln, need(ln, r, "text"), need(ln, r, "relevant")))
        else:
            raise SchemaError(ln, "kind", f"expected doc or query, got {kind!r}")
    ids = list(docs)
    pos_of = {d: i for i, d in enumerate(ids)}
    relevant = []
    for ln, _, rel in queries:
        unknown = [d for d in rel if d not in pos_of]
        if unknown:
            raise SchemaError(ln, "relevant", f"unknown doc ids {unknown}")
        relevant.append({pos_of[d] for d in rel})
    return RetrievalSet([q for _, q, _ in queries], [docs[d] for d in ids], relevant, name=name)


def dump_eval_jsonl(dataset, path):
    """Inverse of :func:`load_eval_jsonl`."""
    task = str(Task(dataset.task))
    recs = []
    if isinstance(dataset, ClassificationSet):
        recs += [{"text": t, "label": l, "split": "train"} for t, l in zip(dataset.train_texts, dataset.train_labels)]
        recs += [{"text": t, "label": l, "split": "test"} for t, l in zip(dataset.test_texts, dataset.test_labels)]
    elif isinstance(dataset, ClusteringSet):
        recs = [{"text": t, "cluster": c} for t, c in zip(dataset.texts, dataset.clusters)]
    elif isinstance(dataset, PairSet):
        recs = [{"text_a": a, "text_b": b, "label": int(l)} for a, b, l in zip(dataset.texts_a, dataset.texts_b, dataset.labels)]
    elif isinstance(dataset, STSSet):
        recs = [{"text_a": a, "text_b": b, "score": float(s)} for a, b, s in zip(dataset.texts_a, dataset.texts_b, dataset.scores)]
    elif isinstance(dataset, RerankingSet):
        for q, c, rel in zip(dataset.queries, dataset.candidates, dataset.relevant):
            recs.append({"query": q, "positive": [c[i] for i in sorted(rel)],
                         "negative": [x for i, x in enumerate(c) if i not in rel]})
    else:
        recs = [{"kind": "doc", "id": f"d{i}", "text": t} for i, t in enumerate(dataset.corpus)]
        recs += [{"kind": "query", "text": q, "relevant": [f"d{i}" for i in sorted(rel)]}
                 for q, rel in zip(dataset.queries, dataset.relevant)]
    with open(path, "w", encoding="utf-8") as fh:
        for r in recs:
            fh.write(json.dumps({"task": task, **r}, ensure_ascii=False) + "\n")
