"""Fine-tuning loop: AdamW, gradient clipping, focal loss, early stopping.

The checkpoint written to ``<out>/checkpoint`` is always the best epoch
by dev macro-F1; ``<out>/train_log.json`` records the full history.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from sklearn.metrics import f1_score

from .config import TrainConfig
from .data import Example, inverse_frequency_weights, iter_batches, read_tsv
from .losses import focal_loss
from .models import build


class EarlyStopper:
    """Patience counter over a maximized metric; best score never regresses."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_score: float | None = None
        self.best_epoch: int | None = None
        self.stale = 0

    def update(self, epoch: int, score: float) -> bool:
        """Record an epoch score; returns True when it is a new best."""
        if self.best_score is None or score > self.best_score:
            self.best_score = score
            self.best_epoch = epoch
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


@dataclass
class TrainSummary:
    best_epoch: int
    best_dev_macro_f1: float
    epochs_run: int
    stopped_early: bool
    checkpoint_dir: Path
    log_path: Path


def _encode(tokenizer, batch: Sequence[Example], max_length: int, device):
    encoded = tokenizer(
        [e.text for e in batch],
        padding=True,
        truncation=True,
        max_length=max_length,
        return_tensors="pt",
    )
    return {k: v.to(device) for k, v in encoded.items()}


@torch.no_grad()
def predict_labels(model, tokenizer, examples: Sequence[Example], batch_size: int, max_length: int, device) -> list[int]:
    model.eval()
    predictions: list[int] = []
    for batch in iter_batches(examples, batch_size, shuffle=False):
        logits = model(**_encode(tokenizer, batch, max_length, device)).logits
        predictions.extend(logits.argmax(dim=-1).tolist())
    return predictions


def dev_macro_f1(model, tokenizer, examples: Sequence[Example], batch_size: int, max_length: int, device) -> float:
    preds = predict_labels(model, tokenizer, examples, batch_size, max_length, device)
    golds = [e.label for e in examples]
    return float(f1_score(golds, preds, average="macro", zero_division=0))


def train(config: TrainConfig, train_tsv: str | Path, dev_tsv: str | Path, out_dir: str | Path) -> TrainSummary:
    random.seed(config.seed)
    np.random.seed(config.seed)
    torch.manual_seed(config.seed)

    train_examples = read_tsv(train_tsv)
    dev_examples = read_tsv(dev_tsv)
    if config.class_weights == "train":
        weights = inverse_frequency_weights(train_examples)
    elif config.class_weights == "none":
        weights = (1.0, 1.0)
    else:
        weights = tuple(float(w) for w in config.class_weights)
    weight_tensor = torch.tensor(weights, dtype=torch.float32)

    device = torch.device("cuda" if torch.cuda.is_available() else "cpu")
    tokenizer, model = build(config, [e.text for e in train_examples])
    model.to(device)

    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
    use_amp = config.mixed_precision and device.type == "cuda"
    scaler = torch.amp.GradScaler(device.type, enabled=use_amp)

    out_dir = Path(out_dir)
    checkpoint_dir = out_dir / "checkpoint"
    out_dir.mkdir(parents=True, exist_ok=True)

    shuffle_rng = random.Random(config.seed)
    if config.shuffle == "once":
        train_examples = list(train_examples)
        shuffle_rng.shuffle(train_examples)

    stopper = EarlyStopper(config.patience)
    history: list[dict] = []
    epochs_run = 0
    for epoch in range(1, config.epochs + 1):
        epochs_run = epoch
        model.train()
        epoch_loss, batches = 0.0, 0
        per_epoch_shuffle = config.shuffle == "per-epoch"
        for batch in iter_batches(train_examples, config.batch_size, per_epoch_shuffle, shuffle_rng):
            inputs = _encode(tokenizer, batch, config.max_length, device)
            targets = torch.tensor([e.label for e in batch], device=device)
            optimizer.zero_grad()
            with torch.autocast(device_type=device.type, enabled=use_amp):
                logits = model(**inputs).logits
                loss = focal_loss(logits, targets, gamma=config.focal_gamma, class_weights=weight_tensor)
            scaler.scale(loss).backward()
            scaler.unscale_(optimizer)
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.max_grad_norm)
            scaler.step(optimizer)
            scaler.update()
            epoch_loss += float(loss.detach())
            batches += 1

        score = dev_macro_f1(model, tokenizer, dev_examples, config.batch_size, config.max_length, device)
        improved = stopper.update(epoch, score)
        history.append({
            "epoch": epoch,
            "train_loss": epoch_loss / max(batches, 1),
            "dev_macro_f1": score,
            "improved": improved,
        })
        if improved:
            model.save_pretrained(checkpoint_dir)
            tokenizer.save_pretrained(checkpoint_dir)
        if stopper.should_stop:
            break

    stopped_early = epochs_run < config.epochs
    log_path = out_dir / "train_log.json"
    log_path.write_text(
        json.dumps(
            {
                "model": config.model,
                "epochs_configured": config.epochs,
                "epochs_run": epochs_run,
                "batch_size": config.batch_size,
                "learning_rate": config.learning_rate,
                "weight_decay": config.weight_decay,
                "focal_gamma": config.focal_gamma,
                "class_weights": list(weights),
                "max_grad_norm": config.max_grad_norm,
                "patience": config.patience,
                "seed": config.seed,
                "shuffle": config.shuffle,
                "best_epoch": stopper.best_epoch,
                "best_dev_macro_f1": stopper.best_score,
                "stopped_early": stopped_early,
                "history": history,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return TrainSummary(
        best_epoch=stopper.best_epoch,
        best_dev_macro_f1=stopper.best_score,
        epochs_run=epochs_run,
        stopped_early=stopped_early,
        checkpoint_dir=checkpoint_dir,
        log_path=log_path,
    )
