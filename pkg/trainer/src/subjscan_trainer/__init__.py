"""Encoder fine-tuning and per-sentence logit export.

The only contract shared with the main pipeline is file-shaped: corpus
TSVs in, logits JSONL (``[OBJ, SUBJ]`` order) out.
"""

__version__ = "0.1.0"
