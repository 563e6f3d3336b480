from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from hybrid_embed.errors import EmptyCorpus, LengthMismatch, WindowEmpty, ZeroNorm
from hybrid_embed.mining import MiningConfig, mine_all, mine_negatives, rank_corpus
import oracles


def corpus(n, dim=16, seed=0):
    r = np.random.default_rng(seed)
    return r.normal(size=dim), r.normal(size=(n, dim))


def positions(q, docs):
    # oracle: 1-based rank of every doc, by cosine then index
    order = sorted(range(len(docs)), key=lambda i: (-oracles.cos(q, docs[i]), i))
    return {d: r + 1 for r, d in enumerate(order)}


class TestConfig:
    @pytest.mark.parametrize("kw", [{"rank_lo": 0}, {"rank_lo": 10, "rank_hi": 5}, {"samples_per_query": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            MiningConfig(**kw)


class TestRank:
    def test_query_itself_first(self):
        q, docs = corpus(20)
        docs[7] = q
        assert rank_corpus(q, docs)[0] == 7

    def test_orthogonal(self):
        assert list(rank_corpus([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])) == [0, 1]

    def test_matches_oracle(self):
        q, docs = corpus(200)
        pos = positions(q, docs)
        assert list(rank_corpus(q, docs)) == sorted(pos, key=pos.get)

    def test_ties_by_index(self):
        assert list(rank_corpus([1.0, 0.0], [[0.0, 1.0], [2.0, 0.0], [1.0, 0.0], [0.0, 3.0]])) == [1, 2, 0, 3]

    def test_errors(self):
        with pytest.raises(EmptyCorpus):
            rank_corpus([1.0], np.zeros((0, 1)))
        with pytest.raises(LengthMismatch):
            rank_corpus([1.0, 0.0], [[1.0, 0.0, 0.0]])
        with pytest.raises(ZeroNorm):
            rank_corpus([0.0, 0.0], [[1.0, 0.0]])


class TestMine:
    def test_two_hundred(self):
        q, docs = corpus(200)
        out = mine_negatives(q, docs, set())
        pos = positions(q, docs)
        assert len(out) == 15 and len(set(out)) == 15
        assert all(50 <= pos[i] <= 100 for i in out)

    def test_sixty(self):
        q, docs = corpus(60)
        out = mine_negatives(q, docs, set())
        pos = positions(q, docs)
        assert len(out) == 11 and all(50 <= pos[i] <= 60 for i in out)

    def test_forty(self):
        q, docs = corpus(40)
        with pytest.raises(WindowEmpty):
            mine_negatives(q, docs, set())

    def test_window_all_gold(self):
        q, docs = corpus(55)
        window = rank_corpus(q, docs)[49:]
        with pytest.raises(WindowEmpty):
            mine_negatives(q, docs, set(window.tolist()))

    def test_gold_removed_after_ranking(self):
        q, docs = corpus(200)
        ranked = rank_corpus(q, docs)
        gold = set(ranked[[0, 60, 70]].tolist())
        out = mine_negatives(q, docs, gold, MiningConfig(samples_per_query=100))
        assert sorted(out) == sorted(set(ranked[49:100].tolist()) - gold)

    def test_rank_order(self):
        q, docs = corpus(200)
        out = mine_negatives(q, docs, set())
        pos = positions(q, docs)
        assert [pos[i] for i in out] == sorted(pos[i] for i in out)

    def test_seed(self):
        q, docs = corpus(200)
        a = mine_negatives(q, docs, set(), MiningConfig(seed=3))
        assert a == mine_negatives(q, docs, set(), MiningConfig(seed=3))
        assert a != mine_negatives(q, docs, set(), MiningConfig(seed=4))

    def test_mine_all_per_query_seed(self):
        r = np.random.default_rng(1)
        qs, docs = r.normal(size=(3, 8)), r.normal(size=(120, 8))
        got = mine_all(qs, docs, [set(), {0}, set()], MiningConfig(seed=5))
        for i, q in enumerate(qs):
            assert got[i] == mine_negatives(q, docs, [set(), {0}, set()][i], MiningConfig(seed=5), query_index=i)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(50, 150), st.lists(st.integers(0, 49), max_size=10))
    def test_contract(self, seed, n, gold):
        q, docs = corpus(n, dim=6, seed=seed)
        cfg = MiningConfig(seed=seed)
        out = mine_negatives(q, docs, set(gold), cfg)
        ranked = list(rank_corpus(q, docs))
        assert not set(out) & set(gold)
        assert all(50 <= ranked.index(i) + 1 <= 100 for i in out)
        assert len(out) == min(15, len(set(ranked[49:100]) - set(gold)))
