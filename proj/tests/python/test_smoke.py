import math

import numpy as np
import pytest

import ecgcl


def test_similarity_orthogonal_units():
    a = np.array([[1.0, 0.0]])
    b = np.array([[0.0, 1.0]])
    assert ecgcl.similarity(a, b, "l1") == 2.0
    assert ecgcl.similarity(a, b, "l2") == pytest.approx(math.sqrt(2.0))
    assert ecgcl.similarity(a, b, "cosine") == 1.0


def test_similarity_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 16))
    b = rng.normal(size=(6, 16))
    assert ecgcl.similarity(a, b, "l2") == pytest.approx(np.linalg.norm(a - b, axis=1).mean())
    assert ecgcl.similarity(a, b, "l1") == pytest.approx(np.abs(a - b).sum(axis=1).mean())


def test_total_loss_example():
    logits = np.zeros((1, 5))
    y = np.array([[1.0, 0, 0, 1, 0]])
    t = ecgcl.total_loss(logits, y, np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), "l2", 2.0)
    assert t["total"] == pytest.approx(3.521575, abs=1e-6)
    assert t["cls"] == pytest.approx(math.log(2.0))


def test_bce_matches_numpy():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(8, 5))
    y = (rng.random((8, 5)) < 0.3).astype(float)
    p = 1 / (1 + np.exp(-z))
    ref = -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean()
    assert ecgcl.classification_loss(z, y) == pytest.approx(ref, rel=1e-9)


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        ecgcl.classification_loss(np.zeros((2, 5)), np.zeros((3, 5)))


def test_auc_against_pairwise_count():
    rng = np.random.default_rng(2)
    s = rng.normal(size=40)
    y = (rng.random(40) < 0.4).astype(int)
    pos, neg = s[y == 1], s[y == 0]
    ref = ((pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()) / (len(pos) * len(neg))
    assert ecgcl.roc_auc(s.tolist(), y.tolist()) == pytest.approx(ref, abs=1e-12)
    assert ecgcl.roc_auc([0.1, 0.2], [1, 1]) is None


def test_macro_auc_report():
    scores = np.array([[0.9, 0.1], [0.2, 0.8], [0.7, 0.3], [0.1, 0.6]] * 2)
    labels = np.array([[1, 0], [0, 1], [1, 0], [0, 1]] * 2, dtype=float)
    r = ecgcl.macro_auc(scores, labels)
    assert r["macro_auc"] == 1.0
    assert r["n_eval"] == 8


def test_soft_encode_layout():
    v = ecgcl.soft_encode(age=47, sex="female")
    assert len(v) == 36
    assert sum(v[0:10]) == pytest.approx(1.0)
    assert v[10:12] == [0.0, 1.0]
    assert v[32:36] == [0.0, 0.0, 1.0, 1.0]


def test_lead_subsets():
    assert ecgcl.lead_subset(3) == [0, 1, 7]
    assert ecgcl.lead_subset(12) == list(range(12))
    with pytest.raises(ValueError):
        ecgcl.lead_subset(5)


def test_synthetic_corpus_shapes_and_determinism():
    a = ecgcl.make_synthetic_corpus(12, 3)
    b = ecgcl.make_synthetic_corpus(12, 3)
    assert len(a) == 12
    assert a[0]["signal"].shape == (12, 1000)
    assert a[0]["signal"].dtype == np.float32
    assert np.array_equal(a[5]["signal"], b[5]["signal"])
    assert [r["fold"] for r in a[:10]] == list(range(1, 11))
    assert all(sum(r["label"]) >= 1 for r in a)


def test_desk_config_hash_ignores_paths():
    cfg = ecgcl.desk_config()
    assert cfg["optimizer"]["batch_size"] == 32
    moved = dict(cfg)
    moved["paths"] = {"data": "/elsewhere", "out": "/tmp/x"}
    assert ecgcl.config_hash(moved) == ecgcl.config_hash(cfg)
    cfg["loss"] = dict(cfg["loss"], alpha=2.0)
    assert ecgcl.config_hash(cfg) != ecgcl.config_hash(moved)
