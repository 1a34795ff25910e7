"""Model and tokenizer resolution.

``model: tiny-random`` builds a small randomly initialized encoder with
a word-level tokenizer fitted on the training text, so smoke runs work
offline; any other value is handed to ``from_pretrained`` (hub id or a
local checkpoint directory).
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from tokenizers import Tokenizer
from tokenizers.models import WordLevel
from tokenizers.pre_tokenizers import Whitespace
from tokenizers.processors import TemplateProcessing
from transformers import (
    AutoModelForSequenceClassification,
    AutoTokenizer,
    BertConfig,
    BertForSequenceClassification,
    PreTrainedTokenizerFast,
)

from .config import TrainConfig
from .data import LABELS

TINY_MODEL_NAME = "tiny-random"

_SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]")


def _word_level_tokenizer(texts: Sequence[str], max_length: int) -> PreTrainedTokenizerFast:
    vocab: dict[str, int] = {tok: i for i, tok in enumerate(_SPECIALS)}
    for text in texts:
        for word in text.lower().split():
            if word not in vocab:
                vocab[word] = len(vocab)
    tokenizer = Tokenizer(WordLevel(vocab, unk_token="[UNK]"))
    tokenizer.pre_tokenizer = Whitespace()
    tokenizer.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    return PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        pad_token="[PAD]",
        unk_token="[UNK]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        model_max_length=max_length,
        do_lower_case=True,
    )


def build(config: TrainConfig, train_texts: Sequence[str]):
    """Return (tokenizer, model) ready for fine-tuning, labels [OBJ, SUBJ]."""
    label_kwargs = {
        "num_labels": len(LABELS),
        "id2label": {i: name for i, name in enumerate(LABELS)},
        "label2id": {name: i for i, name in enumerate(LABELS)},
    }
    if config.model == TINY_MODEL_NAME:
        tokenizer = _word_level_tokenizer(train_texts, config.max_length)
        bert_config = BertConfig(
            vocab_size=tokenizer.vocab_size,
            hidden_size=config.tiny.hidden_size,
            num_hidden_layers=config.tiny.num_layers,
            num_attention_heads=config.tiny.num_heads,
            intermediate_size=config.tiny.intermediate_size,
            max_position_embeddings=config.max_length + 2,
            pad_token_id=tokenizer.pad_token_id,
            **label_kwargs,
        )
        return tokenizer, BertForSequenceClassification(bert_config)
    tokenizer = AutoTokenizer.from_pretrained(config.model)
    model = AutoModelForSequenceClassification.from_pretrained(config.model, **label_kwargs)
    return tokenizer, model


def load_checkpoint(ckpt_dir: str | Path):
    """Reload a saved checkpoint for inference, in eval mode."""
    tokenizer = AutoTokenizer.from_pretrained(str(ckpt_dir))
    model = AutoModelForSequenceClassification.from_pretrained(str(ckpt_dir)).eval()
    return tokenizer, model
