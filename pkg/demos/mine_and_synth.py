"""Hard-negative mining and the offline synthesis pipeline.

    python demos/mine_and_synth.py

Part one ranks a 200-document toy corpus for a few queries and samples 15
negatives from ranks 50 to 100. Part two runs both synthesis phases against
the mock LLM, so no network or credential is needed.
"""

from pathlib import Path

from hybrid_embed.encoder import Encoder, EncoderConfig, init_params
from hybrid_embed.mining import MiningConfig, mine_all, rank_corpus
from hybrid_embed.synth import MockLLM, brainstorm_topics, generate_triplets, pick_examples
from hybrid_embed.toy import load_suite

DATA = Path(__file__).resolve().parents[1] / "data"


def mining():
    train_sets, _ = load_suite(DATA / "toy_suite")
    examples = train_sets[0].examples
    corpus = list(dict.fromkeys(t for e in examples for t in (*e.pos, *e.neg)))[:200]
    index = {t: i for i, t in enumerate(corpus)}
    queries = [e for e in examples if e.pos[0] in index][:3]
    cfg = EncoderConfig()
    enc = Encoder(init_params(cfg, 0), cfg)
    D, Q = enc(corpus), enc([e.query for e in queries])
    gold = [{index[e.pos[0]]} for e in queries]
    for e, q, m in zip(queries, Q, mine_all(Q, D, gold, MiningConfig())):
        ranked = list(rank_corpus(q, D))
        print(f"query: {e.query}")
        print(f"  gold rank {ranked.index(index[e.pos[0]]) + 1}; mined ranks {[ranked.index(i) + 1 for i in m]}")


def synthesis():
    pool = [l for l in (DATA / "example_tasks.txt").read_text().splitlines() if l]
    mock = MockLLM(DATA / "mock_fixture.json")
    topics = brainstorm_topics(pick_examples(pool, 0), 3, mock)
    examples, failures = generate_triplets(topics, mock, generations=10, seed=0)
    print("\ntopics:", *topics, sep="\n  ")
    print(f"{len(examples)} triplets, {len(failures)} rejected; first query: {examples[0].query!r}")


if __name__ == "__main__":
    mining()
    synthesis()
