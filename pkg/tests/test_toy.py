import numpy as np

from hybrid_embed.data import LabeledExample
from hybrid_embed.losses import Task
from hybrid_embed.toy import (
    ToyWorld,
    load_paraphrase,
    load_suite,
    make_suite,
    pair_label,
    paraphrase_task,
    sts_score,
    write_suite,
)
from conftest import SUITE


class TestScores:
    def test_sts(self):
        assert sts_score(3, 3) == 5.0
        assert sts_score(0, 2) == 2.5
        assert sts_score(0, 7) == 0.0

    def test_pair(self):
        assert pair_label(2, 3) == 1 and pair_label(2, 4) == 0


class TestWorld:
    def test_words_unique(self):
        w = ToyWorld(0)
        words = sum(w.topics, []) + w.filler + sum(w.sentiment_markers, []) + sum(w.domain_markers, [])
        assert len(words) == len(set(words))

    def test_marked_text(self):
        w = ToyWorld(0)
        text = w.marked(w.sentiment_markers[1]).split()
        assert len(text) == w.marked_topic + w.marked_filler + w.marked_markers
        assert sum(t in w.sentiment_markers[1] for t in text) == w.marked_markers

    def test_labels_from_markers(self):
        w = ToyWorld(0)
        assert w.sentiment_labels == [m[0] for m in w.sentiment_markers]
        assert ToyWorld(0, label_from_markers=False).sentiment_labels[0] not in w.sentiment_markers[0]

    def test_suite_shape(self):
        train, suites = make_suite(0)
        assert [d.task for d in train] == [Task.RETRIEVAL, Task.STS, Task.PAIR_CLASSIFICATION,
                                           Task.CLASSIFICATION, Task.CLUSTERING]
        assert {s.task for s in suites} == set(Task)
        ex = train[3].examples[0]
        assert isinstance(ex, LabeledExample) and len(ex.neg_labels) == 3

    def test_seeded(self):
        a, b = make_suite(5), make_suite(5)
        assert a[0][0].examples == b[0][0].examples
        assert make_suite(6)[0][0].examples != a[0][0].examples

    def test_paraphrase(self):
        train, ev = paraphrase_task(0)
        assert len(ev.queries) == 32 and len(ev.corpus) == 128 and len(train) == 128
        assert all(len(r) == 16 for r in ev.relevant)


class TestShipped:
    def test_files_match_generator(self, tmp_path):
        written = write_suite(tmp_path, seed=0)
        for path in written:
            shipped = SUITE / path.relative_to(tmp_path)
            assert shipped.read_bytes() == path.read_bytes(), shipped

    def test_load_matches_make(self):
        train, suites = load_suite(SUITE)
        ref_train, ref_suites = make_suite(0)
        for a, b in zip(train, ref_train):
            assert a.task == b.task and a.examples == b.examples
        assert sorted(s.name for s in suites) == sorted(s.name for s in ref_suites)

    def test_paraphrase_loads(self):
        train, ev = load_paraphrase(SUITE)
        ref_train, ref_ev = paraphrase_task(0)
        assert train.examples == ref_train.examples and ev.queries == ref_ev.queries
        assert ev.relevant == ref_ev.relevant
