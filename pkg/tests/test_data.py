import json

from hypothesis import given, settings
from hypothesis import strategies as st
import pytest

from hybrid_embed.data import (
    LabeledExample,
    RetrievalExample,
    ScoredExample,
    TaskDataset,
    load_jsonl,
    parse_record,
    plan_batches,
    reformat_labeled,
    to_record,
    write_jsonl,
)
from hybrid_embed.errors import (
    BatchTooSmall,
    DegenerateLabelSet,
    EmptyDataset,
    ParseError,
    SchemaError,
    UnknownLabel,
)
from hybrid_embed.losses import Task


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def dataset(n, task=Task.STS, name=""):
    return TaskDataset(task, [ScoredExample(f"a{i}", f"b{i}", float(i % 3)) for i in range(n)], name)


class TestParse:
    def test_scored_echo(self):
        task, ex = parse_record({"task": "sts", "text_a": "a", "text_b": "b", "score": 0.8})
        assert task == Task.STS and ex == ScoredExample("a", "b", 0.8)

    def test_missing_score(self):
        with pytest.raises(SchemaError) as err:
            parse_record({"task": "sts", "text_a": "a", "text_b": "b"}, lineno=4)
        assert err.value.field == "score" and err.value.line == 4

    def test_retrieval_neg_optional(self):
        _, ex = parse_record({"task": "retrieval", "query": "q", "pos": ["p"]})
        assert ex == RetrievalExample("q", ("p",), ())

    @pytest.mark.parametrize(
        "obj",
        [
            {"task": "retrieval", "query": "q", "pos": []},
            {"task": "retrieval", "query": "", "pos": ["p"]},
            {"task": "classification", "text": "t", "pos_label": "a", "neg_labels": []},
            {"task": "sts", "text_a": "a", "text_b": "b", "score": True},
            {"task": "sts", "text_a": "a", "text_b": "b", "score": 1, "extra": 1},
            {"task": "translation", "text": "t"},
            {"text": "t"},
            ["not", "an", "object"],
        ],
    )
    def test_schema_errors(self, obj):
        with pytest.raises(SchemaError):
            parse_record(obj)

    def test_round_trip(self):
        ex = LabeledExample("text", "a", ("b", "c"))
        assert parse_record(to_record(Task.CLUSTERING, ex)) == (Task.CLUSTERING, ex)


class TestLoad:
    def test_three_line_retrieval(self, tmp_path):
        lines = [json.dumps({"task": "retrieval", "query": f"q{i}", "pos": ["p"], "neg": ["n"]}) for i in range(3)]
        ds = load_jsonl(write_lines(tmp_path / "r.jsonl", lines))
        assert ds.task == Task.RETRIEVAL and len(ds) == 3 and ds.name == "r"
        assert all(isinstance(e, RetrievalExample) for e in ds.examples)

    def test_blank_lines_skipped(self, tmp_path):
        line = json.dumps({"task": "sts", "text_a": "a", "text_b": "b", "score": 1})
        assert len(load_jsonl(write_lines(tmp_path / "s.jsonl", [line, "", line]))) == 2

    def test_bad_json(self, tmp_path):
        with pytest.raises(ParseError) as err:
            load_jsonl(write_lines(tmp_path / "x.jsonl", ['{"task": "sts"', ""]))
        assert err.value.line == 1

    def test_mixed_tasks(self, tmp_path):
        a = json.dumps({"task": "sts", "text_a": "a", "text_b": "b", "score": 1})
        b = json.dumps({"task": "pair_classification", "text_a": "a", "text_b": "b", "score": 1})
        with pytest.raises(SchemaError):
            load_jsonl(write_lines(tmp_path / "m.jsonl", [a, b]))

    def test_empty_file(self, tmp_path):
        (tmp_path / "e.jsonl").write_text("\n")
        with pytest.raises(EmptyDataset):
            load_jsonl(tmp_path / "e.jsonl")

    def test_write_then_load(self, tmp_path):
        exs = [LabeledExample("t1", "x", ("y",)), LabeledExample("t2", "y", ("x",))]
        write_jsonl(tmp_path / "c.jsonl", Task.CLASSIFICATION, exs)
        assert load_jsonl(tmp_path / "c.jsonl").examples == exs

    def test_wrong_variant(self):
        with pytest.raises(TypeError):
            TaskDataset(Task.STS, [RetrievalExample("q", ("p",))])


class TestReformat:
    def test_ten_categories(self):
        labels = [f"l{i}" for i in range(10)]
        out = reformat_labeled([(f"t{i}", labels[i]) for i in range(10)], labels)
        assert all(len(e.neg_labels) == 9 for e in out)
        assert out[3].neg_labels == tuple(l for l in labels if l != "l3")

    def test_two_categories(self):
        out = reformat_labeled([("t", "a")], ["a", "b"])
        assert out == [LabeledExample("t", "a", ("b",))]

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            reformat_labeled([("t", "c")], ["a", "b"])

    def test_degenerate(self):
        with pytest.raises(DegenerateLabelSet):
            reformat_labeled([("t", "a")], ["a", "a"])


class TestPlan:
    def test_ten_by_five(self):
        plan = plan_batches([dataset(10)], 5, seed=0)
        assert len(plan) == 2
        assert sorted(i for b in plan.schedule for i in b.indices) == list(range(10))

    def test_deterministic(self):
        ds = [dataset(30), dataset(17, Task.PAIR_CLASSIFICATION)]
        assert plan_batches(ds, 4, 9).schedule == plan_batches(ds, 4, 9).schedule

    def test_interleaved_counts(self):
        plan = plan_batches([dataset(100), dataset(50, Task.PAIR_CLASSIFICATION)], 10, 0)
        assert len(plan) == 15
        owners = [b.dataset for b in plan.schedule]
        assert owners.count(0) == 10 and owners.count(1) == 5
        first, last = owners.index(1), len(owners) - 1 - owners[::-1].index(1)
        assert last - first + 1 > 5

    def test_partial_batches(self):
        assert [len(b.indices) for b in plan_batches([dataset(12)], 5, 0).schedule] == [5, 5, 2]
        assert len(plan_batches([dataset(11)], 5, 0)) == 2

    def test_batch_too_small(self):
        with pytest.raises(BatchTooSmall):
            plan_batches([dataset(4)], 1, 0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(2, 40), min_size=1, max_size=4), st.integers(2, 9), st.integers(0, 2**32))
    def test_coverage(self, sizes, bs, seed):
        ds = [dataset(n) for n in sizes]
        plan = plan_batches(ds, bs, seed)
        for di, n in enumerate(sizes):
            seen = [i for b in plan.schedule if b.dataset == di for i in b.indices]
            assert len(seen) == len(set(seen))
            assert all(0 <= i < n for i in seen)
            assert len(seen) >= (n // bs) * bs
        assert all(b.task == ds[b.dataset].task for b in plan.schedule)
