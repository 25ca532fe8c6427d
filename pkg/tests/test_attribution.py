import json

import numpy as np
import pytest

from selgen import attribution as at
from selgen import gaussian_ood as g
from selgen.errors import DimensionMismatch, EmptyDocument, MalformedLine, MissingVariant, SingleSegment

UNIT_1D = g.GaussianModel(np.zeros(1), np.eye(1), 100, 0.0)


def test_compose_single_segment():
    doc = at.make_document("d", [("s0", 3, [1.0, 2.0])])
    np.testing.assert_array_equal(at.compose_mean(doc.segments), [1.0, 2.0])


def test_compose_weighted():
    doc = at.make_document("d", [("a", 1, [0.0, 1.0]), ("b", 3, [4.0, 1.0])])
    np.testing.assert_array_equal(at.compose_mean(doc.segments), [3.0, 1.0])


def test_compose_equal_counts_is_plain_mean():
    emb = np.random.default_rng(0).normal(size=(5, 3))
    doc = at.make_document("d", [(str(i), 2, e) for i, e in enumerate(emb)])
    np.testing.assert_allclose(at.compose_mean(doc.segments), emb.mean(axis=0), rtol=1e-14)


def test_compose_reconstructs_token_mean():
    tokens = np.random.default_rng(1).normal(size=(12, 4))
    bounds = [(0, 5), (5, 6), (6, 12)]
    doc = at.make_document("d", [(str(i), b - a, tokens[a:b].mean(axis=0)) for i, (a, b) in enumerate(bounds)])
    np.testing.assert_allclose(at.compose_mean(doc.segments), tokens.mean(axis=0), rtol=1e-13, atol=1e-15)


def test_compose_empty():
    with pytest.raises(EmptyDocument):
        at.compose_mean([])


def test_one_dimensional_hand_computation():
    doc = at.make_document("d", [("zero", 1, [0.0]), ("ten", 1, [10.0])])
    out = dict(at.sentence_attribution(doc, UNIT_1D))
    assert out == {"zero": -75.0, "ten": 25.0}


def test_unchanged_score_gives_zero():
    doc = at.make_document("d", [("a", 1, [2.0]), ("b", 1, [2.0]), ("c", 2, [2.0])])
    assert all(v == 0.0 for _, v in at.sentence_attribution(doc, UNIT_1D))


def test_exact_matches_compositional():
    rng = np.random.default_rng(2)
    scorer = g.fit_rmd(input_fg=rng.normal(size=(50, 3)), input_bg=rng.normal(size=(50, 3)) + 1)
    segs = [(f"s{i}", int(rng.integers(1, 6)), rng.normal(size=3)) for i in range(4)]
    comp = at.make_document("d", segs)
    variants = {sid: at.compose_mean([s for s in comp.segments if s.segment_id != sid]) for sid, _, _ in segs}
    exact = at.make_document("d", segs, at.compose_mean(comp.segments), variants)
    a = at.sentence_attribution(comp, scorer, "input", "compositional")
    b = at.sentence_attribution(exact, scorer, "input", "exact")
    assert [s for s, _ in a] == [s for s, _ in b]
    np.testing.assert_allclose([v for _, v in a], [v for _, v in b], atol=1e-9)


def test_positive_attribution_removal_lowers_score():
    rng = np.random.default_rng(3)
    model = g.fit_gaussian(rng.normal(size=(100, 2)))
    doc = at.make_document("d", [(f"s{i}", 1 + i, rng.normal(size=2) * 3) for i in range(5)])
    full = g.md_score(model, at.compose_mean(doc.segments))
    for i, (sid, value) in enumerate(at.sentence_attribution(doc, model)):
        without = g.md_score(model, at.compose_mean(doc.segments[:i] + doc.segments[i + 1 :]))
        assert value == pytest.approx(full - without, rel=1e-12, abs=1e-12)
        if value > 0:
            assert without < full


def test_errors():
    single = at.make_document("d", [("a", 1, [1.0])])
    with pytest.raises(SingleSegment):
        at.sentence_attribution(single, UNIT_1D)
    two = at.make_document("d", [("a", 1, [1.0]), ("b", 1, [2.0])], [1.5], {"a": [2.0]})
    with pytest.raises(MissingVariant):
        at.sentence_attribution(two, UNIT_1D, mode="exact")
    with pytest.raises(MissingVariant):
        at.sentence_attribution(at.make_document("d", [("a", 1, [1.0]), ("b", 1, [2.0])]), UNIT_1D, mode="exact")
    with pytest.raises(ValueError):
        at.sentence_attribution(two, UNIT_1D, mode="other")
    with pytest.raises(DimensionMismatch):
        at.make_document("d", [("a", 1, [1.0]), ("b", 1, [2.0, 3.0])])
    with pytest.raises(ValueError):
        at.make_document("d", [("a", 0, [1.0])])


def test_rows_and_reader():
    line = json.dumps({"doc_id": "x", "segments": [{"segment_id": "p", "token_count": 1, "embedding": [0.0]},
                                                    {"segment_id": "q", "token_count": 1, "embedding": [10.0]}]})
    docs = at.read_documents([line, ""])
    rows = at.attribution_rows(docs[0], at.sentence_attribution(docs[0], UNIT_1D), "compositional")
    assert rows == [
        {"doc_id": "x", "segment_id": "p", "attribution": -75.0, "mode": "compositional"},
        {"doc_id": "x", "segment_id": "q", "attribution": 25.0, "mode": "compositional"},
    ]
    with pytest.raises(MalformedLine) as info:
        at.read_documents([line, '{"doc_id": "y"}'])
    assert info.value.line == 2
