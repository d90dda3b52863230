import math
import random
from collections import Counter

import numpy as np
import pytest

import toporag


def ring(n):
    return toporag.Graph([f"node {i}" for i in range(n)], [(i, (i + 1) % n) for i in range(n)])


def ref_bleu4(cand, ref):
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        c = Counter(tuple(cand[i:i + n]) for i in range(len(cand) - n + 1))
        r = Counter(tuple(ref[i:i + n]) for i in range(len(ref) - n + 1))
        total = sum(c.values())
        hit = sum(min(v, r[g]) for g, v in c.items())
        log_sum += math.log(hit / total if hit else 0.1 / (total + 0.1)) / 4
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(log_sum)


def test_bleu_matches_reference():
    rng = random.Random(4)
    vocab = "a b c d e f g".split()
    for _ in range(50):
        cand = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 12)))
        ref = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 12)))
        expected = ref_bleu4(toporag.tokenize(cand), toporag.tokenize(ref))
        assert toporag.bleu4(cand, ref) == pytest.approx(expected, abs=1e-9)


def test_rouge_examples():
    assert toporag.rouge_l("the cat sat", "the cat sat") == pytest.approx(1.0)
    assert toporag.rouge_l("a b", "c d") == 0.0


def test_exact_proximity_matches_dense_diffusion():
    g = toporag.Graph([f"t{i}" for i in range(7)], [(0, 1), (1, 2), (2, 3), (3, 0), (3, 4), (5, 6)])
    emb = toporag.proximity_embedding(g, depth=3, projection_dim=0)
    a = np.zeros((7, 7))
    for u, v in g.edges:
        a[u, v] = a[v, u] = 1.0
    a_hat = a / a.sum(axis=1, keepdims=True)
    expected = sum(np.linalg.matrix_power(a_hat, k) for k in range(1, 4)) / 3
    assert np.allclose(emb.rows, expected, atol=1e-12)
    assert emb.kind == "proximity"


def test_projected_embedding_is_seeded():
    g = ring(12)
    a = toporag.proximity_embedding(g, projection_dim=16, seed=5)
    b = toporag.proximity_embedding(g, projection_dim=16, seed=5)
    assert a.rows.shape == (12, 16)
    assert np.array_equal(a.rows, b.rows)
    assert a.fingerprint == b.fingerprint


def test_role_embedding_cycle_is_uniform():
    emb = toporag.role_embedding(ring(9), sample_count=10)
    assert np.allclose(emb.rows, emb.rows[0], atol=1e-8)


def test_index_tie_break():
    emb = toporag.proximity_embedding(ring(6), projection_dim=0)
    index = toporag.build_index(emb, pool=list(range(6)), k=3)
    assert len(index) == 6
    for node, row in enumerate(index):
        ids = [i for i, _ in row]
        assert node not in ids
        scores = [s for _, s in row]
        assert scores == sorted(scores, reverse=True)
        for (i1, s1), (i2, s2) in zip(row, row[1:]):
            assert s1 > s2 or i1 < i2


def test_invalid_config_raises():
    with pytest.raises(ValueError):
        toporag.proximity_embedding(ring(4), depth=0)


def test_cli_help():
    code, out, _ = toporag.run_cli(["--help"])
    assert code == 0
    assert "ingest" in out
