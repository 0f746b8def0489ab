"""Windowed inference: stitching, center preference, label permutation."""

import json
import math

import torch
from evoting import load_predictions
from transformers import AutoModelForTokenClassification, AutoTokenizer

from conftest import TOY_DOCS, permute_checkpoint, read_rows
from evoting_adapter import AdapterConfig, CANONICAL_TAGS, export_predictions

SMALL_WINDOW = 12


def export(checkpoint, tokens_file, out, **kwargs):
    return export_predictions(
        AdapterConfig(checkpoint=str(checkpoint), tokens=tokens_file, out=out, **kwargs)
    )


def renormalized(vector):
    total = math.fsum(vector)
    return [v / total for v in vector]


def doc_words(tokens_file, doc_id):
    words = []
    for line in tokens_file.read_text().splitlines():
        rec = json.loads(line)
        if rec["doc_id"] == doc_id:
            words.append((rec["index"], rec["surface"]))
    return [surface for _, surface in sorted(words)]


def direct_first_subword(checkpoint, words):
    """Single forward pass over the whole document, no windowing at all."""
    tok = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModelForTokenClassification.from_pretrained(checkpoint).eval()
    enc = tok(words, is_split_into_words=True, return_tensors="pt")
    with torch.no_grad():
        probs = torch.softmax(model(**enc).logits, dim=-1)[0]
    first = {}
    for pos, wid in enumerate(enc.word_ids()):
        if wid is not None and wid not in first:
            first[wid] = pos
    return [renormalized(probs[first[w]].double().tolist()) for w in range(len(words))]


def oracle_windowed_first_subword(checkpoint, words, cap):
    """Independent reimplementation of window, center pick, first pooling."""
    tok = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModelForTokenClassification.from_pretrained(checkpoint).eval()
    overlap = (cap - tok.num_special_tokens_to_add(pair=False)) // 2
    enc = tok(
        words, is_split_into_words=True, truncation=True, max_length=cap,
        stride=overlap, return_overflowing_tokens=True, padding=True, return_tensors="pt",
    )
    tensors = {k: enc[k] for k in ("input_ids", "attention_mask", "token_type_ids") if k in enc}
    with torch.no_grad():
        probs = torch.softmax(model(**tensors).logits.double(), dim=-1)
    lengths = enc["attention_mask"].sum(dim=1).tolist()
    placements = {}
    for win in range(probs.shape[0]):
        for pos, wid in enumerate(enc.word_ids(win)):
            if wid is None:
                continue
            placements.setdefault(wid, {}).setdefault(win, []).append(pos)
    out = []
    for w in range(len(words)):
        full = max(len(p) for p in placements[w].values())
        best_win, best_dist = None, None
        for win in sorted(placements[w]):
            positions = placements[w][win]
            if len(positions) != full:
                continue
            dist = abs((positions[0] + positions[-1]) / 2 - (lengths[win] - 1) / 2)
            if best_dist is None or dist < best_dist:
                best_win, best_dist = win, dist
        vec = probs[best_win, placements[w][best_win][0]].double().tolist()
        out.append(renormalized(vec))
    return out, probs.shape[0]


class TestWindowing:
    def test_long_document_still_yields_one_record_per_token(
        self, checkpoint, tokens_file, tmp_path
    ):
        out = export(checkpoint, tokens_file, tmp_path / "w.jsonl", max_length=SMALL_WINDOW)
        pred = load_predictions(out)
        _, rows = read_rows(out)
        token_count = len(tokens_file.read_text().splitlines())
        assert len(rows) == token_count
        assert len(pred.rows) == token_count
        for rec in rows:
            assert abs(math.fsum(rec["probs"]) - 1.0) <= 1e-12

    def test_stitched_equals_direct_single_pass(self, checkpoint, tokens_file, tmp_path):
        out = export(checkpoint, tokens_file, tmp_path / "p.jsonl")
        _, rows = read_rows(out)
        for doc_id, _, _ in TOY_DOCS:
            words = doc_words(tokens_file, doc_id)
            expected = direct_first_subword(checkpoint, words)
            got = [rec["probs"] for rec in rows if rec["doc_id"] == doc_id]
            assert len(got) == len(expected)
            dev = max(
                abs(a - b) for g, e in zip(got, expected) for a, b in zip(g, e)
            )
            assert dev <= 1e-5, f"{doc_id}: stitched deviates from direct by {dev}"

    def test_overlap_vectors_come_from_the_most_central_window(
        self, checkpoint, tokens_file, tmp_path
    ):
        out = export(checkpoint, tokens_file, tmp_path / "w.jsonl", max_length=SMALL_WINDOW)
        _, rows = read_rows(out)
        words = doc_words(tokens_file, "note-03")
        expected, n_windows = oracle_windowed_first_subword(checkpoint, words, SMALL_WINDOW)
        assert n_windows > 1, "fixture document must not fit a single small window"
        got = [rec["probs"] for rec in rows if rec["doc_id"] == "note-03"]
        assert len(got) == len(expected)
        dev = max(abs(a - b) for g, e in zip(got, expected) for a, b in zip(g, e))
        assert dev <= 1e-12

    def test_windowed_and_single_window_disagree_at_window_edges(
        self, checkpoint, tokens_file, tmp_path
    ):
        # context truncation must actually change something, or the windowing
        # tests above would be vacuous
        small = export(checkpoint, tokens_file, tmp_path / "s.jsonl", max_length=SMALL_WINDOW)
        full = export(checkpoint, tokens_file, tmp_path / "f.jsonl")
        _, rows_s = read_rows(small)
        _, rows_f = read_rows(full)
        dev = max(
            abs(a - b)
            for rs, rf in zip(rows_s, rows_f)
            if rs["doc_id"] == "note-03"
            for a, b in zip(rs["probs"], rf["probs"])
        )
        assert dev > 1e-3


class TestLabelPermutation:
    PERM = [3, 5, 0, 6, 2, 1, 4]

    def test_opaque_permuted_head_with_map_matches_canonical(
        self, checkpoint, tokens_file, tmp_path
    ):
        names = [f"L{j}" for j in range(7)]
        permuted = permute_checkpoint(checkpoint, tmp_path / "permuted", self.PERM, names)
        label_map = {names[j]: CANONICAL_TAGS[self.PERM[j]] for j in range(7)}
        base_out = export(checkpoint, tokens_file, tmp_path / "base.jsonl")
        perm_out = export(permuted, tokens_file, tmp_path / "perm.jsonl", label_map=label_map)
        _, base_rows = read_rows(base_out)
        _, perm_rows = read_rows(perm_out)
        assert len(base_rows) == len(perm_rows)
        dev = max(
            abs(a - b)
            for rb, rp in zip(base_rows, perm_rows)
            for a, b in zip(rb["probs"], rp["probs"])
        )
        assert dev <= 1e-12

    def test_permuted_canonical_names_need_no_map(self, checkpoint, tokens_file, tmp_path):
        names = [CANONICAL_TAGS[self.PERM[j]] for j in range(7)]
        permuted = permute_checkpoint(checkpoint, tmp_path / "permuted2", self.PERM, names)
        base_out = export(checkpoint, tokens_file, tmp_path / "base.jsonl")
        perm_out = export(permuted, tokens_file, tmp_path / "perm.jsonl")
        _, base_rows = read_rows(base_out)
        _, perm_rows = read_rows(perm_out)
        dev = max(
            abs(a - b)
            for rb, rp in zip(base_rows, perm_rows)
            for a, b in zip(rb["probs"], rp["probs"])
        )
        assert dev <= 1e-12
