"""Turn a fine-tuned token-classification checkpoint into a prediction file.

The adapter bridges two worlds: subword models on one side, the word-level
prediction interchange format on the other. It reads a token export file
(one JSON record per word token: doc_id, index, start, end, surface), runs
the checkpoint over each document, pools subword probabilities back to one
vector per word, and writes the line-delimited prediction format whose
header names the model and the canonical tag order.

Documents longer than the model's sequence window are split into
overlapping windows (overlap: half the usable window). Where windows
overlap, each word keeps the vector from the window in which it sits most
centrally, so no word is scored at a window edge when a better placement
exists.
"""

from __future__ import annotations

import json
import math
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .errors import AdapterError, AlignmentError, ConfigError, LabelMapError, TokenFileError

# Interchange contract: tag strings and their order, as consumed by the
# voting toolkit. Index 0 must stay "O".
CANONICAL_TAGS = (
    "O",
    "B-Disposition",
    "I-Disposition",
    "B-NoDisposition",
    "I-NoDisposition",
    "B-Undetermined",
    "I-Undetermined",
)

POOLING_RULES = ("first", "mean")

# Caps inferred from a checkpoint beyond this are treated as "unset";
# some tokenizers report a sentinel of 1e30 when no limit was stored.
_SANE_WINDOW_CAP = 1_000_000


@dataclass(frozen=True)
class WordToken:
    """One word-level token from the consumer's token export."""

    doc_id: str
    index: int
    start: int
    end: int
    surface: str


@dataclass
class AdapterConfig:
    """Everything export_predictions needs.

    label_map translates checkpoint label names to canonical tags; None
    means the checkpoint already uses canonical names (in any order).
    max_length of None infers the window from the checkpoint.
    """

    checkpoint: str
    tokens: str | Path
    out: str | Path
    label_map: Mapping[str, str] | None = None
    pooling: str = "first"
    model_id: str | None = None
    max_length: int | None = None
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.pooling not in POOLING_RULES:
            raise ConfigError(
                f"unknown pooling rule {self.pooling!r}, expected one of {POOLING_RULES}"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.max_length is not None and self.max_length < 4:
            raise ConfigError(f"max_length {self.max_length} leaves no room for content")


def load_word_tokens(path: str | Path) -> dict[str, list[WordToken]]:
    """Read a token export file, grouped by document, ordered by index."""
    path = Path(path)
    docs: dict[str, dict[int, WordToken]] = {}
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise TokenFileError(f"{path}: {exc.strerror or exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TokenFileError(f"{path}:{lineno}: invalid record: {exc}") from None
            try:
                tok = WordToken(
                    doc_id=rec["doc_id"],
                    index=int(rec["index"]),
                    start=int(rec["start"]),
                    end=int(rec["end"]),
                    surface=rec["surface"],
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise TokenFileError(f"{path}:{lineno}: bad token record ({exc!r})") from None
            per_doc = docs.setdefault(tok.doc_id, {})
            if tok.index in per_doc:
                raise TokenFileError(
                    f"{path}:{lineno}: duplicate token index {tok.index} in {tok.doc_id}"
                )
            per_doc[tok.index] = tok
    return {
        doc_id: [per_doc[i] for i in sorted(per_doc)] for doc_id, per_doc in sorted(docs.items())
    }


def resolve_label_order(
    id2label: Mapping[int, str], label_map: Mapping[str, str] | None = None
) -> tuple[int, ...]:
    """Map canonical tag positions to checkpoint label ids.

    Returns order such that order[c] is the checkpoint label id whose
    probability belongs at canonical position c. The composed mapping must
    be a bijection onto the canonical set or LabelMapError is raised.
    """
    n = len(CANONICAL_TAGS)
    if len(id2label) != n:
        raise LabelMapError(
            f"checkpoint has {len(id2label)} labels, the canonical set has {n}"
        )
    names = {}
    for i in range(n):
        if i not in id2label:
            raise LabelMapError(f"checkpoint label ids are not 0..{n - 1}: missing {i}")
        names[i] = id2label[i]
    if label_map is not None:
        unknown = sorted(set(label_map) - set(names.values()))
        if unknown:
            raise LabelMapError(f"label map names absent from the checkpoint: {unknown}")
    source: dict[str, int] = {}
    for i, name in names.items():
        target = label_map.get(name, name) if label_map is not None else name
        if target not in CANONICAL_TAGS:
            raise LabelMapError(
                f"checkpoint label {name!r} maps to {target!r}, not a canonical tag"
            )
        if target in source:
            raise LabelMapError(f"two checkpoint labels map to {target!r}")
        source[target] = i
    # len checks above make this a permutation; missing tags cannot happen
    # once all 7 targets are distinct canonical names.
    return tuple(source[tag] for tag in CANONICAL_TAGS)


@dataclass
class _WindowPlacement:
    window: int
    positions: list[int] = field(default_factory=list)


def _pick_window(placements: list[_WindowPlacement], window_lengths: list[int]) -> _WindowPlacement:
    """Choose the placement whose pieces sit most centrally in their window.

    Placements covering more of the word's pieces win outright; a window
    boundary can cut a word in half and the overlap re-serves it whole.
    """
    full = max(len(p.positions) for p in placements)
    best = None
    best_dist = math.inf
    for p in placements:
        if len(p.positions) != full:
            continue
        center = (window_lengths[p.window] - 1) / 2
        word_center = (p.positions[0] + p.positions[-1]) / 2
        dist = abs(word_center - center)
        if dist < best_dist:
            best, best_dist = p, dist
    assert best is not None
    return best


def _window_cap(config: AdapterConfig, model, tokenizer) -> int:
    model_cap = getattr(model.config, "max_position_embeddings", None)
    if config.max_length is not None:
        if model_cap is not None and config.max_length > model_cap:
            raise ConfigError(
                f"max_length {config.max_length} exceeds the checkpoint's positional cap {model_cap}"
            )
        return config.max_length
    cap = model_cap
    if cap is None:
        cap = getattr(tokenizer, "model_max_length", None)
    if cap is None or cap > _SANE_WINDOW_CAP:
        raise ConfigError(
            "checkpoint declares no usable sequence cap; pass max_length explicitly"
        )
    return int(cap)


def _doc_probabilities(
    model, tokenizer, words: list[str], cap: int, batch_size: int, device: torch.device
) -> tuple[torch.Tensor, list[list[int | None]], list[int]]:
    """Run windowed inference over one document.

    Returns (probs, word_ids per window, content length per window) where
    probs has shape [windows, padded_len, labels] and holds softmax output.
    """
    specials = tokenizer.num_special_tokens_to_add(pair=False)
    content = cap - specials
    if content < 1:
        raise ConfigError(f"max_length {cap} leaves no room for content tokens")
    overlap = content // 2
    enc = tokenizer(
        words,
        is_split_into_words=True,
        truncation=True,
        max_length=cap,
        stride=overlap,
        return_overflowing_tokens=True,
        padding=True,
        return_tensors="pt",
    )
    n_windows = enc["input_ids"].shape[0]
    word_ids = [enc.word_ids(i) for i in range(n_windows)]
    lengths = enc["attention_mask"].sum(dim=1).tolist()
    tensor_keys = [k for k in ("input_ids", "attention_mask", "token_type_ids") if k in enc]
    chunks = []
    with torch.no_grad():
        for lo in range(0, n_windows, batch_size):
            batch = {k: enc[k][lo : lo + batch_size].to(device) for k in tensor_keys}
            logits = model(**batch).logits
            # float64 softmax: label permutations then reorder the sum in the
            # denominator below measurement noise instead of at float32 eps
            chunks.append(torch.softmax(logits.double(), dim=-1).cpu())
    return torch.cat(chunks, dim=0), word_ids, lengths


def _pool(probs: torch.Tensor, placement: _WindowPlacement, pooling: str) -> torch.Tensor:
    vectors = probs[placement.window, placement.positions]
    if pooling == "first":
        return vectors[0]
    return vectors.mean(dim=0)


def _renormalize(vector: list[float]) -> list[float]:
    total = math.fsum(vector)
    return [v / total for v in vector]


def export_predictions(config: AdapterConfig) -> Path:
    """Run the checkpoint over every document and write the prediction file.

    Emits exactly one record per word token, vectors renormalized, in a
    single atomic write (temp file then rename). Returns the output path.
    """
    from transformers import AutoModelForTokenClassification, AutoTokenizer

    docs = load_word_tokens(config.tokens)
    try:
        tokenizer = AutoTokenizer.from_pretrained(config.checkpoint)
        model = AutoModelForTokenClassification.from_pretrained(config.checkpoint)
    except (OSError, ValueError) as exc:
        raise AdapterError(f"{config.checkpoint}: cannot load checkpoint: {exc}") from None
    if not getattr(tokenizer, "is_fast", False):
        raise ConfigError(
            f"{config.checkpoint}: tokenizer does not expose word alignment; a fast tokenizer is required"
        )
    try:
        device = torch.device(config.device)
    except RuntimeError as exc:
        raise ConfigError(f"bad device {config.device!r}: {exc}") from None
    model.to(device)
    model.eval()
    order = resolve_label_order(model.config.id2label, config.label_map)
    cap = _window_cap(config, model, tokenizer)

    records = []
    for doc_id, tokens in docs.items():
        words = [t.surface for t in tokens]
        probs, word_ids, lengths = _doc_probabilities(
            model, tokenizer, words, cap, config.batch_size, device
        )
        placements: dict[int, list[_WindowPlacement]] = {}
        for win, ids in enumerate(word_ids):
            seen: dict[int, _WindowPlacement] = {}
            for pos, wid in enumerate(ids):
                if wid is None:
                    continue
                if wid not in seen:
                    seen[wid] = _WindowPlacement(window=win)
                    placements.setdefault(wid, []).append(seen[wid])
                seen[wid].positions.append(pos)
        for w, token in enumerate(tokens):
            if w not in placements:
                raise AlignmentError(
                    f"{doc_id}: token {token.index} ({token.surface!r}) produced no subword pieces"
                )
            chosen = _pick_window(placements[w], lengths)
            pooled = _pool(probs, chosen, config.pooling)
            vector = _renormalize([pooled[i].item() for i in order])
            records.append(
                {
                    "doc_id": doc_id,
                    "token_index": token.index,
                    "start": token.start,
                    "end": token.end,
                    "probs": vector,
                }
            )

    header = {
        "kind": "token_probs",
        "model_id": config.model_id or str(config.checkpoint),
        "tags": list(CANONICAL_TAGS),
    }
    out = Path(config.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="\n") as fh:
        for record in [header, *records]:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
    os.replace(tmp, out)
    return out
