"""Command-line entry point: ``hybrid-embed <command> [flags]``.

Commands: train, eval, mine, synth, gradcheck, reformat. Every command
writes ``manifest.json`` into ``--out`` before doing any real work, and
every output file is written to a temporary name and renamed on success.

Exit codes::

    0  success
    1  gradcheck tolerance exceeded
    2  configuration error
    3  data error (missing path, parse or schema failure)
    4  non-finite loss or gradient
    5  requested dimension exceeds the model's output dimension
    6  any other library error
"""

import argparse
from dataclasses import asdict, fields
import json
import logging
from pathlib import Path
import sys

from . import __version__
from .data import RetrievalExample, load_jsonl, reformat_labeled, to_record
from .encoder import Encoder, EncoderConfig, init_params
from .errors import (
    AbortOnNonFinite,
    DataError,
    DimOutOfRange,
    HybridEmbedError,
    NonFiniteGradient,
)
from .evaluation import eval_all, format_reports, load_eval_jsonl
from .gradcheck import gradient_suite
from .losses import LossConfig
from .mining import MiningConfig, mine_all
from .mrl import MRLConfig
from .synth import Endpoint, MockLLM, brainstorm_topics, generate_triplets, pick_examples
from .trainer import TrainConfig, _atomic_write, checkpoint_bytes, load_checkpoint, train, write_loss_csv

log = logging.getLogger("hybrid_embed")

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_DATA, EXIT_NONFINITE, EXIT_DIM, EXIT_OTHER = 0, 1, 2, 3, 4, 5, 6
GRADCHECK_TOL = 1e-4


class ConfigError(Exception):
    pass


# ---- config -------------------------------------------------------------------

def _section(cls, raw, name):
    known = {f.name for f in fields(cls)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown key(s) in {name}: {sorted(extra)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def read_config(path):
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def train_settings(cfg, args):
    """``(data paths, EncoderConfig, TrainConfig)`` from a config dict; flags win.

    Config layout::

        {"data": [paths], "seed": 0,
         "encoder": {EncoderConfig fields},
         "train": {TrainConfig scalar fields, "mrl_dims": [...], "mrl_weights": [...]},
         "loss": {LossConfig fields}}
    """
    extra = set(cfg) - {"data", "seed", "encoder", "train", "loss"}
    if extra:
        raise ConfigError(f"unknown top-level key(s): {sorted(extra)}")
    data = list(args.data or cfg.get("data", []))
    if not data:
        raise ConfigError("no training data given (config 'data' or --data)")
    enc = _section(EncoderConfig, cfg.get("encoder", {}), "encoder")
    tr = dict(cfg.get("train", {}))
    dims = tr.pop("mrl_dims", None)
    weights = tr.pop("mrl_weights", None)
    if args.dims:
        dims = args.dims
    try:
        mrl = MRLConfig(tuple(dims or (16, 32, 64, 128)), None if weights is None else tuple(weights))
    except ValueError as exc:
        raise ConfigError(f"mrl: {exc}") from None
    for key, flag in (("seed", args.seed), ("steps", args.steps), ("lr", args.lr)):
        if flag is not None:
            tr[key] = flag
    tr.setdefault("seed", cfg.get("seed", 0))
    loss = _section(LossConfig, cfg.get("loss", {}), "loss")
    tr_cfg = _section(TrainConfig, {**tr, "mrl": mrl, "loss": loss}, "train")
    if mrl.dims[-1] > enc.out_dim:
        raise DimOutOfRange(f"MRL dim {mrl.dims[-1]} exceeds out_dim {enc.out_dim}")
    return data, enc, tr_cfg


def _jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    return obj


def write_manifest(out, command, config, seed, inputs, outputs):
    """The run manifest: everything needed to rerun the command."""
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": json.loads(json.dumps(config, default=_jsonable)),
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
    }
    _atomic_write(out / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    return manifest


def _require(paths):
    for p in paths:
        if not Path(p).exists():
            raise FileNotFoundError(p)


def _write_jsonl(path, records):
    blob = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    _atomic_write(path, blob.encode("utf-8"))


# ---- commands -----------------------------------------------------------------

def cmd_train(args):
    data, enc, cfg = train_settings(read_config(args.config), args)
    _require(data)
    out = Path(args.out)
    ckpt_path, csv_path = out / "model.ckpt", out / "loss.csv"
    write_manifest(out, "train", {"encoder": enc, "train": cfg, "data": data}, cfg.seed, data,
                   [ckpt_path, csv_path])
    datasets = [load_jsonl(p) for p in data]
    ckpt, records = train(datasets, enc, cfg)
    tmp_csv = csv_path.with_name(csv_path.name + ".tmp")
    write_loss_csv(tmp_csv, records)
    tmp_csv.replace(csv_path)
    _atomic_write(ckpt_path, checkpoint_bytes(ckpt))
    print(f"seed={cfg.seed} steps={cfg.steps} final_loss={records[-1].loss:.6f} checkpoint={ckpt_path}")
    return EXIT_OK


def cmd_eval(args):
    _require([args.checkpoint, *args.suites])
    ckpt = load_checkpoint(args.checkpoint)
    dims = args.dims or [ckpt.encoder_config.out_dim]
    for d in dims:
        if d > ckpt.encoder_config.out_dim:
            raise DimOutOfRange(f"eval dim {d} exceeds checkpoint out_dim {ckpt.encoder_config.out_dim}")
    seed = args.seed or 0
    out = Path(args.out)
    outputs = [out / "reports.json", out / "reports.txt"]
    write_manifest(out, "eval", {"checkpoint": args.checkpoint, "dims": dims}, seed,
                   [args.checkpoint, *args.suites], outputs)
    suites = [load_eval_jsonl(p) for p in args.suites]
    enc = ckpt.encoder()
    reports = [eval_all(enc, suites, d, seed=seed) for d in dims]
    blob = json.dumps([r.to_json() for r in reports], indent=2) + "\n"
    _atomic_write(outputs[0], blob.encode())
    table = format_reports(reports)
    _atomic_write(outputs[1], (table + "\n").encode())
    print(table)
    return EXIT_OK


def _corpus_of(dataset):
    texts, index = [], {}
    for ex in dataset.examples:
        for t in (*ex.pos, *ex.neg):
            if t not in index:
                index[t] = len(texts)
                texts.append(t)
    return texts, index


def cmd_mine(args):
    inputs = [args.data[0]] + ([args.checkpoint] if args.checkpoint else [])
    _require(inputs)
    cfg = read_config(args.config)
    mining = _section(MiningConfig, {**cfg.get("mining", {}), **({"seed": args.seed} if args.seed is not None else {})},
                      "mining")
    out = Path(args.out)
    target = out / "mined.jsonl"
    write_manifest(out, "mine", {"mining": mining, "checkpoint": args.checkpoint}, mining.seed, inputs, [target])
    ds = load_jsonl(args.data[0])
    if not isinstance(ds.examples[0], RetrievalExample):
        raise DataError(f"{args.data[0]}: mining needs retrieval examples, got {ds.task}")
    if args.checkpoint:
        enc = load_checkpoint(args.checkpoint).encoder()
    else:
        config = EncoderConfig()
        enc = Encoder(init_params(config, mining.seed), config)
    corpus, index = _corpus_of(ds)
    corpus_embs = enc(corpus)
    query_embs = enc([e.query for e in ds.examples])
    gold = [{index[t] for t in e.pos} for e in ds.examples]
    mined = mine_all(query_embs, corpus_embs, gold, mining)
    examples = [RetrievalExample(e.query, e.pos, tuple(corpus[i] for i in m)) for e, m in zip(ds.examples, mined)]
    _write_jsonl(target, [to_record(ds.task, e) for e in examples])
    print(f"seed={mining.seed} queries={len(examples)} corpus={len(corpus)} out={target}")
    return EXIT_OK


def cmd_synth(args):
    cfg = read_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    language = cfg.get("language", "English")
    if args.mock:
        if args.fixture:
            _require([args.fixture])
        endpoint = MockLLM(args.fixture)
    elif args.endpoint:
        _require([args.endpoint])
        try:
            endpoint = Endpoint.from_config(args.endpoint)
        except (KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{args.endpoint}: {exc}") from None
    else:
        raise ConfigError("synth needs --mock or --endpoint")
    out = Path(args.out)
    if args.phase == 1:
        _require([args.examples] if args.examples else [])
        examples = (Path(args.examples).read_text(encoding="utf-8").splitlines() if args.examples
                    else cfg.get("example_tasks", []))
        examples = list(dict.fromkeys(e.strip() for e in examples if e.strip()))
        if len(examples) < 2:
            raise ConfigError("phase 1 needs two or more example tasks (--examples or config 'example_tasks')")
        target = out / "topics.json"
        write_manifest(out, "synth", {"phase": 1, "num": args.num, "mock": args.mock}, seed,
                       [args.examples] if args.examples else [], [target])
        topics = brainstorm_topics(pick_examples(examples, seed), args.num, endpoint)
        _atomic_write(target, (json.dumps(topics, indent=2, ensure_ascii=False) + "\n").encode("utf-8"))
        print(f"seed={seed} topics={len(topics)} out={target}")
        return EXIT_OK
    if not args.topics:
        raise ConfigError("phase 2 needs --topics")
    _require([args.topics])
    target = out / "triplets.jsonl"
    write_manifest(out, "synth", {"phase": 2, "language": language, "mock": args.mock,
                                  "generations": args.generations}, seed, [args.topics], [target])
    raw = Path(args.topics).read_text(encoding="utf-8")
    topics = json.loads(raw) if raw.lstrip().startswith("[") else [t for t in raw.splitlines() if t.strip()]
    if not topics:
        raise DataError(f"{args.topics}: no topics")
    examples, failures = generate_triplets(topics, endpoint, args.generations, seed=seed, language=language)
    _write_jsonl(target, [to_record("retrieval", e) for e in examples])
    print(f"seed={seed} triplets={len(examples)} rejected={len(failures)} out={target}")
    return EXIT_OK


def cmd_gradcheck(args):
    seed = args.seed or 0
    if args.out:
        write_manifest(Path(args.out), "gradcheck", {"batches": args.batches}, seed, [], [])
    errs = gradient_suite(n_batches=args.batches, seed=seed)
    for name, err in errs.items():
        print(f"loss={name} max_rel_err={err:.3e}")
    return EXIT_OK if max(errs.values()) < GRADCHECK_TOL else EXIT_TOLERANCE


def cmd_reformat(args):
    src = args.data[0]
    _require([src])
    out = Path(args.out)
    target = out / "labeled.jsonl"
    write_manifest(out, "reformat", {"task": args.task}, None, [src], [target])
    pairs = []
    with open(src, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                pairs.append((rec["text"], rec["label"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{src}:{lineno}: expected {{'text', 'label'}} ({exc})") from None
    label_set = list(dict.fromkeys(l for _, l in pairs))
    examples = reformat_labeled(pairs, label_set)
    _write_jsonl(target, [to_record(args.task, e) for e in examples])
    print(f"examples={len(examples)} labels={len(label_set)} out={target}")
    return EXIT_OK


# ---- parser -------------------------------------------------------------------

def _dims(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --dims {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="hybrid-embed", description="Multi-task embedding training toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=out_required, help="output directory")

    sp = sub.add_parser("train", help="train an encoder")
    common(sp)
    sp.add_argument("--data", nargs="+", help="training JSONL files")
    sp.add_argument("--dims", type=_dims, help="Matryoshka dims, e.g. 16,32,64,128")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--lr", type=float)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint on JSONL suites")
    common(sp)
    sp.add_argument("checkpoint")
    sp.add_argument("suites", nargs="+")
    sp.add_argument("--dims", type=_dims)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("mine", help="fill retrieval negatives from a rank window")
    common(sp)
    sp.add_argument("--data", nargs=1, required=True, help="retrieval JSONL")
    sp.add_argument("--checkpoint", help="encoder used for ranking (default: seeded random init)")
    sp.set_defaults(fn=cmd_mine)

    sp = sub.add_parser("synth", help="LLM data synthesis; credential from $SYNTH_API_KEY")
    common(sp)
    sp.add_argument("--phase", type=int, choices=(1, 2), default=2)
    sp.add_argument("--mock", action="store_true", help="use the offline mock LLM")
    sp.add_argument("--fixture", help="with --mock: JSON map of request digest to canned response")
    sp.add_argument("--endpoint", help="JSON file with endpoint url and model")
    sp.add_argument("--topics", help="phase 2: topics, one per line or a JSON list")
    sp.add_argument("--examples", help="phase 1: example tasks, one per line")
    sp.add_argument("--num", type=int, default=20, help="phase 1: number of topics")
    sp.add_argument("--generations", type=int, default=10, help="phase 2: generations per topic")
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("gradcheck", help="finite-difference check of every loss")
    common(sp, out_required=False)
    sp.add_argument("--batches", type=int, default=20)
    sp.set_defaults(fn=cmd_gradcheck)

    sp = sub.add_parser("reformat", help="(text, label) JSONL -> labeled training records")
    common(sp)
    sp.add_argument("--data", nargs=1, required=True)
    sp.add_argument("--task", choices=("classification", "clustering"), default="classification")
    sp.set_defaults(fn=cmd_reformat)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DimOutOfRange as exc:
        print(f"dimension error: {exc}", file=sys.stderr)
        return EXIT_DIM
    except (FileNotFoundError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AbortOnNonFinite, NonFiniteGradient) as exc:
        print(f"non-finite: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except HybridEmbedError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
