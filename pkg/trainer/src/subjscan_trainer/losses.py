"""Training objective: class-weighted focal loss."""

from __future__ import annotations

import torch
import torch.nn.functional as F


def focal_loss(
    logits: torch.Tensor,
    targets: torch.Tensor,
    gamma: float = 2.0,
    class_weights: torch.Tensor | None = None,
) -> torch.Tensor:
    """Mean of -alpha_t * (1 - p_t)^gamma * log(p_t) over the batch.

    At gamma = 0 this is (weighted) cross-entropy.
    """
    log_probs = F.log_softmax(logits, dim=-1)
    log_p_t = log_probs.gather(1, targets.unsqueeze(1)).squeeze(1)
    p_t = log_p_t.exp()
    loss = -((1.0 - p_t) ** gamma) * log_p_t
    if class_weights is not None:
        loss = loss * class_weights.to(logits.device)[targets]
    return loss.mean()
