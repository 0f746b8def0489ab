"""Shared fixtures: a tiny deterministic checkpoint and a toy corpus.

The checkpoint is a two-layer model with a handwritten wordpiece vocab, so
every test runs in milliseconds and inference is bit-reproducible. The toy
corpus token file is produced by the consumer toolkit's own CLI, which
keeps the adapter honest about the interchange formats.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest
import torch
import transformers
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import BertNormalizer
from tokenizers.pre_tokenizers import BertPreTokenizer
from tokenizers.processors import BertProcessing
from transformers import (
    AutoModelForTokenClassification,
    AutoTokenizer,
    BertConfig,
    BertForTokenClassification,
    BertTokenizerFast,
)

from evoting.cli import main as evoting_main
from evoting_adapter import CANONICAL_TAGS

transformers.logging.set_verbosity_error()
transformers.logging.disable_progress_bar()

PIECES = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "patient", "stopped", "lis", "##ino", "##pril", "today", ".",
    "met", "##formin", "asp", "##irin", "continue", "daily",
    "unclear", "if", "was", "taken",
]

TOY_DOCS = [
    (
        "note-01",
        "Patient stopped lisinopril today. Continue metformin daily.",
        "T1\tDisposition 16 26\tlisinopril\nT2\tNoDisposition 43 52\tmetformin\n",
    ),
    (
        "note-02",
        "Unclear if aspirin was taken.",
        "T1\tUndetermined 11 18\taspirin\n",
    ),
    (
        "note-03",
        "Patient stopped lisinopril today. " * 6,
        "T1\tDisposition 16 26\tlisinopril\n",
    ),
]


def build_wordpiece_tokenizer() -> BertTokenizerFast:
    vocab = {p: i for i, p in enumerate(PIECES)}
    backend = Tokenizer(WordPiece(vocab, unk_token="[UNK]"))
    backend.normalizer = BertNormalizer(lowercase=True)
    backend.pre_tokenizer = BertPreTokenizer()
    backend.post_processor = BertProcessing(
        sep=("[SEP]", vocab["[SEP]"]), cls=("[CLS]", vocab["[CLS]"])
    )
    return BertTokenizerFast(
        tokenizer_object=backend,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )


def build_checkpoint(target: Path, seed: int = 7) -> Path:
    """Save a freshly initialized tiny model with canonical labels."""
    target.mkdir(parents=True, exist_ok=True)
    build_wordpiece_tokenizer().save_pretrained(target)
    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(PIECES),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
        num_labels=len(CANONICAL_TAGS),
        id2label=dict(enumerate(CANONICAL_TAGS)),
        label2id={name: i for i, name in enumerate(CANONICAL_TAGS)},
    )
    BertForTokenClassification(config).save_pretrained(target)
    return target


def permute_checkpoint(base: Path, target: Path, perm: list[int], names: list[str]) -> Path:
    """Derive a checkpoint whose label id j carries base label perm[j].

    Classifier rows move with the labels, so names[j] still denotes the
    same scores; only the order and the naming change.
    """
    target.mkdir(parents=True, exist_ok=True)
    AutoTokenizer.from_pretrained(base).save_pretrained(target)
    model = AutoModelForTokenClassification.from_pretrained(base)
    with torch.no_grad():
        weight = model.classifier.weight.clone()
        bias = model.classifier.bias.clone()
        model.classifier.weight.copy_(weight[perm])
        model.classifier.bias.copy_(bias[perm])
    model.config.id2label = {j: names[j] for j in range(len(names))}
    model.config.label2id = {names[j]: j for j in range(len(names))}
    model.save_pretrained(target)
    return target


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> Path:
    return build_checkpoint(tmp_path_factory.mktemp("ckpt") / "base")


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    """Toy corpus plus its corpus.jsonl and tokens.jsonl token export."""
    base = tmp_path_factory.mktemp("corpus")
    text_dir = base / "text"
    ann_dir = base / "ann"
    text_dir.mkdir()
    ann_dir.mkdir()
    for doc_id, text, ann in TOY_DOCS:
        (text_dir / f"{doc_id}.txt").write_text(text, encoding="utf-8")
        (ann_dir / f"{doc_id}.ann").write_text(ann, encoding="utf-8")
    assert evoting_main(["ingest", "--text-dir", str(text_dir), "--ann-dir", str(ann_dir),
                         "--out", str(base / "corpus.jsonl")]) == 0
    assert evoting_main(["tag", "--corpus", str(base / "corpus.jsonl"),
                         "--out", str(base / "tokens.jsonl")]) == 0
    return base


@pytest.fixture(scope="session")
def tokens_file(corpus_dir: Path) -> Path:
    return corpus_dir / "tokens.jsonl"


def read_rows(path: Path) -> tuple[dict, list[dict]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    records = [json.loads(line) for line in lines]
    return records[0], records[1:]
