"""Loss functions with analytic gradients.

Both losses accept a single sample (f,) or a batch (B, f); batch losses are
reduced so that the B=1 case coincides with the single-sample definition.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

PROB_CLAMP = 1e-7


def masked_mse_loss(pred, target, mask):
    """Mean squared error over masked positions only.

    Unmasked positions contribute neither loss nor gradient, equivalent to
    overwriting their targets with the predictions. An all-false mask yields
    zero loss and a zero gradient.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        return 0.0, np.zeros_like(pred)
    diff = np.where(mask, pred - target, 0.0)
    loss = float(np.sum(diff * diff) / count)
    grad = 2.0 * diff / count
    return loss, grad


def classifier_loss(p, t, alpha: float = 1.0, beta: float = 1.0):
    """Tunable classifier loss: beta * mean BCE(t, p^alpha) + (1-beta) * RMSE(t, p).

    Raising alpha pushes the model toward higher probabilities (more
    extreme-class predictions); beta trades the blunt BCE penalty against
    the gentler RMSE distance. Probabilities are clamped at 1e-7 before
    logs; p^alpha is computed before the clamp.
    """
    if alpha < 1:
        raise ConfigError("alpha must be >= 1")
    if not (0.0 <= beta <= 1.0):
        raise ConfigError("beta must lie in [0, 1]")
    p = np.asarray(p, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    squeeze = p.ndim == 1
    p2 = np.atleast_2d(p)
    t2 = np.atleast_2d(t)
    batch, f = p2.shape
    grad = np.zeros_like(p2)

    q = p2 ** alpha
    qc = np.clip(q, PROB_CLAMP, 1.0 - PROB_CLAMP)
    bce = -(t2 * np.log(qc) + (1.0 - t2) * np.log(1.0 - qc))
    loss = beta * float(np.mean(bce))
    if beta > 0:
        inside = (q > PROB_CLAMP) & (q < 1.0 - PROB_CLAMP)
        dbce_dq = np.where(inside, -(t2 / qc) + (1.0 - t2) / (1.0 - qc), 0.0)
        grad += beta * dbce_dq * alpha * p2 ** (alpha - 1.0) / (batch * f)

    if beta < 1:
        per_sample_mse = np.mean((t2 - p2) ** 2, axis=1)
        rmse = np.sqrt(per_sample_mse)
        loss += (1.0 - beta) * float(np.mean(rmse))
        nonzero = rmse > 0
        grad[nonzero] += ((1.0 - beta) * (p2[nonzero] - t2[nonzero])
                          / (f * rmse[nonzero, None]) / batch)

    return loss, grad[0] if squeeze else grad
