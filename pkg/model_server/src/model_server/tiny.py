"""Construct a tiny randomly-initialized QA checkpoint with no downloads.

Used by smoke tests and available anywhere a real checkpoint is not: the
model is a one-layer transformer over a small generated wordpiece vocab,
so it loads and trains in seconds on a CPU.
"""

from __future__ import annotations

import string
from pathlib import Path

VOCAB_SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def build_tiny_qa_checkpoint(directory: str, seed: int = 0) -> str:
    import torch
    from transformers import BertConfig, BertForQuestionAnswering, BertTokenizerFast

    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)

    pieces = list(string.ascii_lowercase) + list(string.digits)
    vocab = (
        VOCAB_SPECIALS
        + pieces
        + [f"##{p}" for p in pieces]
        + ["the", "of", "is", "was", "who", "what", "##s", "##ed", "##ing"]
    )
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")

    tokenizer = BertTokenizerFast(vocab_file=str(vocab_file), do_lower_case=True)
    tokenizer.save_pretrained(str(path))

    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=512,
    )
    model = BertForQuestionAnswering(config)
    model.save_pretrained(str(path))
    return str(path)
