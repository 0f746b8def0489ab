from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, strategies as st

from evoting import (
    BioTag,
    PredictionRow,
    PredictionSet,
    argmax_labels,
    load_labels,
    load_predictions,
    normalize_vector,
    save_labels,
    save_predictions,
    validate_alignment,
)
from evoting.errors import DuplicateRow, ProbabilityError, SchemaError
from evoting.labels import NUM_TAGS, TAGS
from evoting.predictions import argmax_index

from conftest import predictions_from_tags, spread_vector

CANONICAL_TAGS = [t.value for t in TAGS]


def header_line(model_id="m1", tags=None, kind="token_probs"):
    return json.dumps({"kind": kind, "model_id": model_id, "tags": tags or CANONICAL_TAGS})


def row_line(doc_id="d1", index=0, start=0, end=2, probs=None):
    probs = probs if probs is not None else [1.0, 0, 0, 0, 0, 0, 0]
    return json.dumps(
        {"doc_id": doc_id, "token_index": index, "start": start, "end": end, "probs": probs}
    )


def write_lines(path, *lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_load_minimal_file(tmp_path):
    path = tmp_path / "p.jsonl"
    write_lines(path, header_line(), row_line())
    pred = load_predictions(path)
    assert pred.model_id == "m1"
    assert pred.rows[("d1", 0)].probs[0] == 1.0


def test_round_trip_identity(tmp_path, toy_tokenized):
    pred = predictions_from_tags(toy_tokenized, "m1", confidence=0.8)
    # run through the loader once so rows carry validated vectors
    first = tmp_path / "a.jsonl"
    save_predictions(pred, first)
    loaded = load_predictions(first)
    second = tmp_path / "b.jsonl"
    save_predictions(loaded, second)
    assert load_predictions(second) == loaded


def test_header_required(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_predictions(path)


def test_header_tag_order_is_fixed(tmp_path):
    path = tmp_path / "p.jsonl"
    permuted = list(reversed(CANONICAL_TAGS))
    write_lines(path, header_line(tags=permuted), row_line())
    with pytest.raises(SchemaError):
        load_predictions(path)


def test_header_needs_model_id(tmp_path):
    path = tmp_path / "p.jsonl"
    write_lines(path, json.dumps({"kind": "token_probs", "tags": CANONICAL_TAGS}), row_line())
    with pytest.raises(SchemaError):
        load_predictions(path)


def test_row_arity_checked(tmp_path):
    path = tmp_path / "p.jsonl"
    write_lines(path, header_line(), row_line(probs=[0.5, 0.5]))
    with pytest.raises(SchemaError):
        load_predictions(path)


def test_negative_probability_rejected(tmp_path):
    path = tmp_path / "p.jsonl"
    write_lines(path, header_line(), row_line(probs=[1.1, -0.1, 0, 0, 0, 0, 0]))
    with pytest.raises(ProbabilityError):
        load_predictions(path)


def test_sum_outside_tolerance_rejected(tmp_path):
    path = tmp_path / "p.jsonl"
    write_lines(path, header_line(), row_line(probs=[0.9, 0.0999, 0, 0, 0, 0, 0]))
    with pytest.raises(ProbabilityError):
        load_predictions(path)


def test_sum_within_tolerance_renormalized(tmp_path):
    path = tmp_path / "p.jsonl"
    off = [0.9000004, 0.0999999, 0, 0, 0, 0, 0]
    write_lines(path, header_line(), row_line(probs=off))
    pred = load_predictions(path)
    assert math.fsum(pred.rows[("d1", 0)].probs) == 1.0


def test_duplicate_row_rejected(tmp_path):
    path = tmp_path / "p.jsonl"
    write_lines(path, header_line(), row_line(index=3), row_line(index=3))
    with pytest.raises(DuplicateRow):
        load_predictions(path)


def test_label_file_round_trip(tmp_path, toy_tokenized):
    pred = predictions_from_tags(toy_tokenized, "m1")
    labels = argmax_labels(pred)
    path = tmp_path / "labels.jsonl"
    save_labels(labels, path)
    assert load_labels(path) == labels


def test_label_file_rejects_unknown_tag(tmp_path):
    path = tmp_path / "l.jsonl"
    rec = {"doc_id": "d1", "token_index": 0, "start": 0, "end": 2, "tag": "B-Dosage"}
    write_lines(path, header_line(kind="token_labels"), json.dumps(rec))
    with pytest.raises(SchemaError):
        load_labels(path)


def test_argmax_tie_breaks_to_canonical_order():
    assert argmax_index((0.5, 0.5, 0, 0, 0, 0, 0)) == 0
    assert argmax_index((0.0, 0.3, 0.3, 0.4, 0, 0, 0)) == 3


def test_argmax_uniform_vector_is_O(toy_tokenized):
    uniform = normalize_vector([1.0 / NUM_TAGS] * NUM_TAGS)
    row = PredictionRow(doc_id="d", index=0, start=0, end=1, probs=uniform)
    labels = argmax_labels(PredictionSet(model_id="m", rows={("d", 0): row}))
    assert labels.rows[("d", 0)].tag is BioTag.O


POSITIVE_VECTORS = st.lists(
    st.floats(min_value=1e-3, max_value=1.0, allow_nan=False), min_size=NUM_TAGS, max_size=NUM_TAGS
).filter(lambda v: len({round(x, 9) for x in v}) == NUM_TAGS)


class TestArgmaxScaling:
    @given(POSITIVE_VECTORS, st.floats(min_value=1e-3, max_value=1e3))
    def test_scaling_then_renormalizing_keeps_argmax(self, raw, c):
        """Multiplying by c > 0 and renormalizing never moves the argmax."""
        total = math.fsum(raw)
        base = normalize_vector([x / total for x in raw])
        scaled_total = math.fsum(x * c for x in raw)
        scaled = normalize_vector([x * c / scaled_total for x in raw])
        assert argmax_index(base) == argmax_index(scaled)


def test_normalize_vector_is_stable_under_reload():
    vec = normalize_vector([1 / NUM_TAGS] * NUM_TAGS)
    assert normalize_vector(vec) == vec


def test_validate_alignment_clean(toy_tokenized):
    pred = predictions_from_tags(toy_tokenized, "m1")
    assert validate_alignment(pred, toy_tokenized) == []


def test_validate_alignment_missing_row(toy_tokenized):
    pred = predictions_from_tags(toy_tokenized, "m1")
    del pred.rows[("note-01", 0)]
    violations = validate_alignment(pred, toy_tokenized)
    assert [v.kind for v in violations] == ["missing_row"]
    assert violations[0].doc_id == "note-01"


def test_validate_alignment_unknown_document(toy_tokenized):
    pred = predictions_from_tags(toy_tokenized, "m1")
    pred.rows[("ghost", 0)] = PredictionRow(
        doc_id="ghost", index=0, start=0, end=1, probs=spread_vector(0, 0.9)
    )
    violations = validate_alignment(pred, toy_tokenized)
    assert [v.kind for v in violations] == ["unknown_document"]


def test_validate_alignment_unknown_token_and_offsets(toy_tokenized):
    pred = predictions_from_tags(toy_tokenized, "m1")
    pred.rows[("note-01", 99)] = PredictionRow(
        doc_id="note-01", index=99, start=500, end=501, probs=spread_vector(0, 0.9)
    )
    row = pred.rows[("note-01", 0)]
    pred.rows[("note-01", 0)] = PredictionRow(
        doc_id="note-01", index=0, start=row.start + 1, end=row.end + 1, probs=row.probs
    )
    kinds = sorted(v.kind for v in validate_alignment(pred, toy_tokenized))
    assert kinds == ["offset_mismatch", "unknown_token"]


def test_validate_alignment_is_symmetric_complete(toy_tokenized):
    pred = predictions_from_tags(toy_tokenized, "m1")
    del pred.rows[("note-02", 1)]
    del pred.rows[("note-04", 0)]
    violations = validate_alignment(pred, toy_tokenized)
    missing = sum(1 for v in violations if v.kind == "missing_row")
    matched = sum(
        1
        for doc in toy_tokenized.documents
        for tok in doc.tokens
        if (tok.doc_id, tok.index) in pred.rows
    )
    assert matched + missing == toy_tokenized.total_tokens()
