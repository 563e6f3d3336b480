"""Training records, JSONL I/O, label reformatting and single-task batch plans."""

from dataclasses import asdict, dataclass
import json
import math
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from .errors import (
    BatchTooSmall,
    DegenerateLabelSet,
    EmptyDataset,
    ParseError,
    SchemaError,
    UnknownLabel,
)
from .losses import Task


@dataclass(frozen=True)
class RetrievalExample:
    query: str
    pos: tuple
    neg: tuple = ()


@dataclass(frozen=True)
class ScoredExample:
    text_a: str
    text_b: str
    score: float


@dataclass(frozen=True)
class LabeledExample:
    text: str
    pos_label: str
    neg_labels: tuple


TrainExample = Union[RetrievalExample, ScoredExample, LabeledExample]

VARIANT_FOR_TASK = {
    Task.RETRIEVAL: RetrievalExample,
    Task.RERANKING: RetrievalExample,
    Task.STS: ScoredExample,
    Task.PAIR_CLASSIFICATION: ScoredExample,
    Task.CLASSIFICATION: LabeledExample,
    Task.CLUSTERING: LabeledExample,
}

# field name -> expected JSON kind
_SCHEMAS = {
    RetrievalExample: {"query": "str", "pos": "strlist", "neg": "strlist"},
    ScoredExample: {"text_a": "str", "text_b": "str", "score": "number"},
    LabeledExample: {"text": "str", "pos_label": "str", "neg_labels": "strlist"},
}


@dataclass
class TaskDataset:
    task: Task
    examples: list
    name: str = ""

    def __post_init__(self):
        self.task = Task(self.task)
        if not self.examples:
            raise EmptyDataset(f"dataset {self.name or self.task} has no examples")
        kind = VARIANT_FOR_TASK[self.task]
        for ex in self.examples:
            if not isinstance(ex, kind):
                raise TypeError(f"{self.task} dataset cannot hold {type(ex).__name__}")

    def __len__(self):
        return len(self.examples)


def _check_field(lineno, name, kind, value):
    if kind == "str":
        if not isinstance(value, str) or not value.strip():
            raise SchemaError(lineno, name, "expected a non-empty string")
        return value
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise SchemaError(lineno, name, "expected a finite number")
        return float(value)
    if not isinstance(value, list) or not all(isinstance(v, str) and v.strip() for v in value):
        raise SchemaError(lineno, name, "expected a list of non-empty strings")
    return tuple(value)


def parse_record(obj, lineno=0):
    """Validate one decoded JSON object; returns ``(task, example)``."""
    if not isinstance(obj, dict):
        raise SchemaError(lineno, "task", "record is not a JSON object")
    if "task" not in obj:
        raise SchemaError(lineno, "task", "missing")
    try:
        task = Task(obj["task"])
    except ValueError:
        raise SchemaError(lineno, "task", f"unknown task {obj['task']!r}") from None
    kind = VARIANT_FOR_TASK[task]
    schema = _SCHEMAS[kind]
    for key in obj:
        if key != "task" and key not in schema:
            raise SchemaError(lineno, key, "unknown field")
    values = {}
    for name, ftype in schema.items():
        if name not in obj:
            if kind is RetrievalExample and name == "neg":
                values[name] = ()
                continue
            raise SchemaError(lineno, name, "missing")
        values[name] = _check_field(lineno, name, ftype, obj[name])
    if kind is RetrievalExample and not values["pos"]:
        raise SchemaError(lineno, "pos", "needs at least one positive")
    if kind is LabeledExample and not values["neg_labels"]:
        raise SchemaError(lineno, "neg_labels", "needs at least one negative label")
    return task, kind(**values)


def load_jsonl(path):
    """Read a single-task JSONL training file into a :class:`TaskDataset`."""
    path = Path(path)
    task, examples = None, []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, exc.msg) from None
            t, ex = parse_record(obj, lineno)
            if task is None:
                task = t
            elif t != task:
                raise SchemaError(lineno, "task", f"file mixes {task} and {t}")
            examples.append(ex)
    if not examples:
        raise EmptyDataset(f"{path} contains no records")
    return TaskDataset(task, examples, name=path.stem)


def to_record(task, example):
    rec = {"task": str(Task(task))}
    for k, v in asdict(example).items():
        rec[k] = list(v) if isinstance(v, tuple) else v
    return rec


def write_jsonl(path, task, examples):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(to_record(task, ex), ensure_ascii=False) + "\n")


def reformat_labeled(texts, label_set):
    """Turn ``(text, label)`` pairs into label triplets: the text's own label
    is the positive and every other label in ``label_set`` (in order) is a
    negative."""
    label_set = list(label_set)
    if len(set(label_set)) < 2:
        raise DegenerateLabelSet("need at least two distinct labels")
    known = set(label_set)
    out = []
    for text, label in texts:
        if label not in known:
            raise UnknownLabel(f"label {label!r} not in label set")
        out.append(LabeledExample(text, label, tuple(l for l in label_set if l != label)))
    return out


class PlannedBatch(NamedTuple):
    dataset: int
    task: Task
    indices: tuple


@dataclass
class BatchPlan:
    schedule: list
    batch_size: int
    seed: int

    def __len__(self):
        return len(self.schedule)


def plan_batches(datasets, batch_size, seed):
    """One epoch of single-task batches, interleaved in proportion to size.

    Each dataset is shuffled and chunked; a trailing chunk is kept only if it
    holds at least two examples. Batch ``k`` of a dataset with ``B`` batches
    gets a sort key drawn uniformly from ``[k/B, (k+1)/B)``, so every task is
    spread across the whole epoch.
    """
    if batch_size < 2:
        raise BatchTooSmall("batch_size must be at least 2")
    rng = np.random.default_rng(seed)
    keyed = []
    for di, ds in enumerate(datasets):
        if len(ds) == 0:
            raise EmptyDataset(f"dataset {di} is empty")
        order = rng.permutation(len(ds))
        chunks = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
        chunks = [c for c in chunks if len(c) >= 2]
        jitter = rng.random(len(chunks))
        for k, chunk in enumerate(chunks):
            key = (k + jitter[k]) / len(chunks)
            keyed.append((key, di, PlannedBatch(di, ds.task, tuple(int(i) for i in chunk))))
    keyed.sort(key=lambda t: (t[0], t[1]))
    return BatchPlan([b for _, _, b in keyed], batch_size, seed)
