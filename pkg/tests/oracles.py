"""Slow, loop-based reference implementations used only by the tests.

Nothing here imports the package's numerics, so a shared bug cannot hide.
"""

import hashlib
import math


def cos(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return dot / (na * nb)


def lse(xs):
    m = max(xs)
    return m + math.log(sum(math.exp(x - m) for x in xs))


def info_nce(queries, positives, negatives, tau, in_batch=True):
    """Double loop over rows and candidates."""
    n = len(queries)
    total = 0.0
    for i in range(n):
        logits = [cos(queries[i], positives[i]) / tau]
        logits += [cos(queries[i], d) / tau for d in negatives[i]]
        if in_batch:
            for j in range(n):
                if j != i:
                    logits.append(cos(queries[i], positives[j]) / tau)
                    logits += [cos(queries[i], d) / tau for d in negatives[j]]
        total += -(logits[0] - lse(logits))
    return total / n


def label_nce(texts, pos_labels, neg_labels, tau):
    return info_nce(texts, pos_labels, neg_labels, tau, in_batch=False)


def cosent(lefts, rights, scores, tau):
    """Sum over every ordered pair of pairs with a strictly larger gold score."""
    c = [cos(a, b) for a, b in zip(lefts, rights)]
    terms = [0.0]
    for i in range(len(c)):
        for j in range(len(c)):
            if scores[i] > scores[j]:
                terms.append((c[j] - c[i]) / tau)
    return lse(terms)


def bucket(gram, vocab, seed):
    h = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little") % vocab


def ngram_ids(text, n, vocab, seed):
    text = text.strip()
    grams = [text] if len(text) < n else [text[i : i + n] for i in range(len(text) - n + 1)]
    return [bucket(g, vocab, seed) for g in grams][:512]


def entropy(counts):
    total = sum(counts)
    return -sum(c / total * math.log(c / total) for c in counts if c)


def v_measure(gold, pred):
    """Homogeneity / completeness from a contingency table built by hand."""
    table = {}
    for g, p in zip(gold, pred):
        table[(g, p)] = table.get((g, p), 0) + 1
    golds, preds = sorted(set(gold)), sorted(set(pred))
    n = len(gold)
    h_c = entropy([sum(table.get((g, p), 0) for p in preds) for g in golds])
    h_k = entropy([sum(table.get((g, p), 0) for g in golds) for p in preds])
    h_c_given_k = 0.0
    for p in preds:
        col = [table.get((g, p), 0) for g in golds]
        h_c_given_k += sum(col) / n * entropy(col)
    h_k_given_c = 0.0
    for g in golds:
        row = [table.get((g, p), 0) for p in preds]
        h_k_given_c += sum(row) / n * entropy(row)
    hom = 1.0 if h_c == 0 else 1 - h_c_given_k / h_c
    com = 1.0 if h_k == 0 else 1 - h_k_given_c / h_k
    return 0.0 if hom + com == 0 else 2 * hom * com / (hom + com)


def best_threshold_accuracy(scores, labels):
    """Try every threshold between and beyond the observed scores."""
    cuts = sorted(set(scores))
    cands = [cuts[0] - 1] + [(a + b) / 2 for a, b in zip(cuts, cuts[1:])] + [cuts[-1] + 1]
    best = 0.0
    for t in cands:
        acc = sum((s > t) == bool(l) for s, l in zip(scores, labels)) / len(scores)
        best = max(best, acc)
    return best


def ranks(xs):
    """1-based ranks with ties given their average rank."""
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    r = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        for k in range(i, j + 1):
            r[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return r


def pearson(x, y):
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def spearman(x, y):
    return pearson(ranks(x), ranks(y))


def adamw(p, g, m, v, t, lr, b1=0.9, b2=0.999, eps=1e-8, wd=0.01):
    """Scalar AdamW step written out term by term."""
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    p = p * (1 - lr * wd)
    mhat = m / (1 - b1**t)
    vhat = v / (1 - b2**t)
    return p - lr * mhat / (math.sqrt(vhat) + eps), m, v
