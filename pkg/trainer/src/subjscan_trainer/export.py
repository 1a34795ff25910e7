"""Per-sentence raw logit export in the pipeline's JSONL format."""

from __future__ import annotations

import json
from pathlib import Path

import torch

from .data import iter_batches, read_tsv
from .models import load_checkpoint


@torch.no_grad()
def export_logits(ckpt_dir: str | Path, input_tsv: str | Path, out_path: str | Path, batch_size: int = 32) -> int:
    """Run the checkpoint over a corpus and write one record per line.

    Logits are emitted in [OBJ, SUBJ] order, untouched by softmax or
    temperature; the file is byte-stable across repeated exports.
    """
    tokenizer, model = load_checkpoint(ckpt_dir)
    examples = read_tsv(input_tsv, require_labels=False)
    max_length = getattr(tokenizer, "model_max_length", 512) or 512

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with out_path.open("w", encoding="utf-8") as fh:
        for batch in iter_batches(examples, batch_size, shuffle=False):
            encoded = tokenizer(
                [e.text for e in batch],
                padding=True,
                truncation=True,
                max_length=max_length,
                return_tensors="pt",
            )
            logits = model(**encoded).logits.double().tolist()
            for example, (z_obj, z_subj) in zip(batch, logits):
                fh.write(json.dumps({"sentence_id": example.sentence_id, "logits": [z_obj, z_subj]}) + "\n")
                written += 1
    return written
