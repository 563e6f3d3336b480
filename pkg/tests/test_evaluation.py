import math

from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from hybrid_embed.errors import (
    ConstantInput,
    DegenerateClusters,
    DimOutOfRange,
    MissingSplit,
    NoRelevantDocs,
    ParseError,
    SchemaError,
    SingleClass,
)
from hybrid_embed.evaluation import (
    ClassificationSet,
    ClusteringSet,
    EvalReport,
    PairSet,
    RerankingSet,
    RetrievalSet,
    STSSet,
    average_precision,
    best_threshold_accuracy,
    dump_eval_jsonl,
    eval_all,
    eval_classification,
    eval_clustering,
    eval_pair,
    eval_reranking,
    eval_retrieval,
    eval_sts,
    format_reports,
    kmeans,
    load_eval_jsonl,
    ndcg_at_k,
    recall_at_k,
    spearman,
    v_measure,
)
from hybrid_embed.losses import Task
import oracles


class Lookup:
    """Encoder backed by a text -> vector table."""

    def __init__(self, table, scale=1.0):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.scale = scale

    def __call__(self, texts):
        return np.stack([self.scale * self.table[t] for t in texts])


def one_hot(i, dim=4):
    v = np.full(dim, 0.01)
    v[i] = 1.0
    return v


def perfect_suites():
    table = {}
    for i in range(4):
        for j in range(3):
            table[f"c{i}_{j}"] = one_hot(i)
    cls = ClassificationSet([f"c{i}_0" for i in range(4)], list("abcd"), [f"c{i}_1" for i in range(4)], list("abcd"))
    clu = ClusteringSet([f"c{i}_{j}" for i in range(4) for j in range(3)], [i for i in range(4) for _ in range(3)])
    pair = PairSet(["c0_0", "c1_0"], ["c0_1", "c2_0"], [1, 0])
    retr = RetrievalSet(["c0_0", "c1_0"], ["c2_1", "c0_1", "c1_1"], [{1}, {2}])
    rer = RerankingSet(["c3_0"], [["c3_1", "c0_2", "c1_2"]], [{0}])
    sts = STSSet(["c0_0", "c0_0", "c0_0"], ["c0_1", "c1_1", "c2_1"], [3.0, 0.5, 1.0])
    table["c2_1"] = one_hot(2) + 0.5 * one_hot(0)
    return Lookup(table), [cls, clu, pair, retr, rer, sts]


class TestMetrics:
    def test_ndcg_ideal(self):
        assert ndcg_at_k([1, 1, 0, 0], 2, 10) == 1.0

    def test_ndcg_rank_two(self):
        assert ndcg_at_k([0, 1], 1, k=2) == pytest.approx(1 / math.log2(3), abs=1e-12)
        assert ndcg_at_k([0, 1], 1, k=2) == pytest.approx(0.6309, abs=1e-4)

    def test_average_precision(self):
        assert average_precision([1, 0, 1]) == pytest.approx((1 + 2 / 3) / 2)
        assert average_precision([0, 0]) == 0.0

    def test_threshold_perfect(self):
        assert best_threshold_accuracy([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0

    def test_threshold_degenerate(self):
        assert best_threshold_accuracy([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_threshold_oracle(self):
        scores, labels = [0.3, 0.7, 0.1, 0.7, 0.5, 0.2], [1, 0, 0, 1, 1, 0]
        assert best_threshold_accuracy(scores, labels) == pytest.approx(oracles.best_threshold_accuracy(scores, labels))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=15))
    def test_threshold_property(self, rows):
        scores, labels = [float(s) for s, _ in rows], [l for _, l in rows]
        got = best_threshold_accuracy(scores, labels)
        assert got == pytest.approx(oracles.best_threshold_accuracy(scores, labels))
        assert got >= 0.5 or got >= max(np.mean(labels), 1 - np.mean(labels))

    def test_v_measure_perfect_and_collapsed(self):
        assert v_measure([0, 0, 1, 1], [5, 5, 7, 7]) == pytest.approx(1.0)
        assert v_measure([0, 0, 1, 1], [0, 0, 0, 0]) == 0.0

    def test_v_measure_hand(self):
        # gold {a,a,b,b}, pred {x,x,x,y}: H(G)=ln2, H(C)=H(3/4,1/4),
        # H(G|C)=3/4 H(2/3,1/3), H(C|G)=1/2 H(1/2,1/2)
        h = lambda *p: -sum(q * math.log(q) for q in p)
        hom = 1 - 0.75 * h(2 / 3, 1 / 3) / math.log(2)
        com = 1 - 0.5 * math.log(2) / h(0.75, 0.25)
        assert v_measure(list("aabb"), list("xxxy")) == pytest.approx(2 * hom * com / (hom + com), abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=2, max_size=20))
    def test_v_measure_oracle(self, rows):
        gold, pred = [g for g, _ in rows], [p for _, p in rows]
        assert v_measure(gold, pred) == pytest.approx(oracles.v_measure(gold, pred), abs=1e-12)

    def test_spearman(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
        x, y = [0.1, 0.4, 0.4, 0.9, 0.2], [1.0, 3.0, 2.0, 5.0, 4.0]
        assert spearman(x, y) == pytest.approx(oracles.spearman(x, y), abs=1e-12)
        with pytest.raises(ConstantInput):
            spearman([1, 1], [1, 2])

    def test_kmeans_separated(self):
        X = np.array([[0, 0], [0, 0.1], [5, 5], [5, 5.1], [10, 0], [10, 0.1]], dtype=float)
        assign = kmeans(X, 3, seed=0)
        assert v_measure([0, 0, 1, 1, 2, 2], assign) == pytest.approx(1.0)
        np.testing.assert_array_equal(assign, kmeans(X, 3, seed=0))


class TestEvaluators:
    def test_perfect_suite(self):
        enc, suites = perfect_suites()
        report = eval_all(enc, suites, 4)
        assert set(report.per_task) == set(Task)
        for t, v in report.per_task.items():
            assert v == pytest.approx(1.0), t
        assert report.average == pytest.approx(1.0)

    def test_scale_invariance(self):
        enc, suites = perfect_suites()
        a = eval_all(enc, suites, 3).per_task
        b = eval_all(Lookup(enc.table, scale=7.5), suites, 3).per_task
        for t in a:
            assert a[t] == pytest.approx(b[t], abs=1e-12)

    def test_deterministic(self, rng):
        texts = [f"t{i}" for i in range(30)]
        enc = Lookup({t: rng.normal(size=6) for t in texts})
        clu = ClusteringSet(texts, [i % 3 for i in range(30)])
        assert eval_clustering(enc, clu, 6) == eval_clustering(enc, clu, 6)

    def test_shuffled_labels_near_chance(self, rng):
        texts = [f"t{i}" for i in range(400)]
        enc = Lookup({t: rng.normal(size=8) for t in texts})
        labels = list(rng.integers(0, 2, size=400))
        ds = ClassificationSet(texts[:200], labels[:200], texts[200:], labels[200:])
        assert abs(eval_classification(enc, ds, 8) - 0.5) < 0.1

    def test_random_retrieval_low(self, rng):
        texts = [f"d{i}" for i in range(100)] + [f"q{i}" for i in range(50)]
        enc = Lookup({t: rng.normal(size=16) for t in texts})
        ds = RetrievalSet([f"q{i}" for i in range(50)], [f"d{i}" for i in range(100)], [{i} for i in range(50)])
        assert eval_retrieval(enc, ds, 16) < 0.3
        assert recall_at_k(enc, ds, 16, k=100) == 1.0

    def test_full_dim_matches_untruncated(self):
        enc, suites = perfect_suites()
        ds = suites[3]
        manual = []
        for q, rel in zip(ds.queries, ds.relevant):
            sims = [oracles.cos(enc.table[q], enc.table[d]) for d in ds.corpus]
            ranked = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
            manual.append(ndcg_at_k([i in rel for i in ranked], len(rel)))
        assert eval_retrieval(enc, ds, 4) == pytest.approx(np.mean(manual), abs=1e-15)
        with pytest.raises(DimOutOfRange):
            eval_retrieval(enc, suites[3], 5)

    def test_errors(self):
        enc, _ = perfect_suites()
        with pytest.raises(MissingSplit):
            eval_classification(enc, ClassificationSet([], [], ["c0_0"], ["a"]), 4)
        with pytest.raises(DegenerateClusters):
            eval_clustering(enc, ClusteringSet(["c0_0", "c0_1"], [0, 0]), 4)
        with pytest.raises(SingleClass):
            eval_pair(enc, PairSet(["c0_0"], ["c0_1"], [1]), 4)
        with pytest.raises(NoRelevantDocs):
            eval_retrieval(enc, RetrievalSet(["c0_0"], ["c0_1"], [set()]), 4)
        with pytest.raises(NoRelevantDocs):
            eval_reranking(enc, RerankingSet(["c0_0"], [["c0_1"]], [set()]), 4)
        with pytest.raises(ConstantInput):
            eval_sts(enc, STSSet(["c0_0", "c1_0"], ["c0_1", "c1_1"], [1.0, 1.0]), 4)


class TestReport:
    def test_average_of_known_values(self):
        vals = dict(zip(Task, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]))
        r = EvalReport(vals, eval_dim=8)
        assert r.average == pytest.approx(0.35)
        assert r.points()["average"] == pytest.approx(35.0)

    def test_two_dims_two_reports(self):
        enc, suites = perfect_suites()
        reports = [eval_all(enc, suites, d) for d in (2, 4)]
        table = format_reports(reports)
        assert len(table.splitlines()) == 3 and "Avg." in table
        assert reports[0].to_json()["eval_dim"] == 2


class TestJsonl:
    def test_round_trip(self, tmp_path):
        _, suites = perfect_suites()
        for i, ds in enumerate(suites):
            path = tmp_path / f"s{i}.jsonl"
            dump_eval_jsonl(ds, path)
            back = load_eval_jsonl(path)
            assert type(back) is type(ds) and back.task == ds.task

    def test_bad_json(self, tmp_path):
        (tmp_path / "x.jsonl").write_text("{oops\n")
        with pytest.raises(ParseError):
            load_eval_jsonl(tmp_path / "x.jsonl")

    def test_unknown_task(self, tmp_path):
        (tmp_path / "x.jsonl").write_text('{"task": "translation"}\n')
        with pytest.raises(SchemaError):
            load_eval_jsonl(tmp_path / "x.jsonl")

    def test_missing_field(self, tmp_path):
        (tmp_path / "x.jsonl").write_text('{"task": "sts", "text_a": "a", "text_b": "b"}\n')
        with pytest.raises(SchemaError):
            load_eval_jsonl(tmp_path / "x.jsonl")

    def test_unknown_doc(self, tmp_path):
        (tmp_path / "x.jsonl").write_text('{"task": "retrieval", "kind": "query", "text": "q", "relevant": ["zz"]}\n')
        with pytest.raises(SchemaError):
            load_eval_jsonl(tmp_path / "x.jsonl")
