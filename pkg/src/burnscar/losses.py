"""Binary cross-entropy and the two-head deep-supervision loss."""

from __future__ import annotations

import torch

PROB_EPS = 1e-7


def bce(y, y_hat_prob, eps: float = PROB_EPS) -> torch.Tensor:
    """Mean binary cross-entropy between targets and probabilities.

    Probabilities are clamped to [eps, 1-eps] before the logs.
    """
    y = torch.as_tensor(y)
    y_hat_prob = torch.as_tensor(y_hat_prob)
    if y.shape != y_hat_prob.shape:
        raise ValueError(f"shape mismatch {tuple(y.shape)} vs {tuple(y_hat_prob.shape)}")
    p = y_hat_prob.clamp(eps, 1.0 - eps)
    return -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p)).mean()


def compound_loss(outputs, y_hr, y_lr, weights: tuple[float, float] = (1.0, 1.0)):
    """Deep-supervision loss: weighted sum of the LR and HR head BCEs.

    Returns (total, lr_term, hr_term); with unit weights the total is
    exactly the sum of the two terms.
    """
    loss_lr = bce(y_lr, torch.sigmoid(outputs.y_lr_logits))
    loss_hr = bce(y_hr, torch.sigmoid(outputs.y_hr_logits))
    total = weights[0] * loss_lr + weights[1] * loss_hr
    return total, loss_lr, loss_hr
