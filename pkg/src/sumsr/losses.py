"""Training objectives.

All losses return 0-dim torch tensors so they stay differentiable when fed
tensors that require grad; wrap with float() for plain numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import DataError, InputError


def _pair(a, b) -> tuple[torch.Tensor, torch.Tensor]:
    ta = a if isinstance(a, torch.Tensor) else torch.as_tensor(np.asarray(a, dtype=np.float64))
    tb = b if isinstance(b, torch.Tensor) else torch.as_tensor(np.asarray(b, dtype=np.float64))
    return ta, tb


def recon_loss(original, reconstructed) -> torch.Tensor:
    """Squared Euclidean distance summed over every entry of the sequences."""
    v, v_hat = _pair(original, reconstructed)
    if v.shape != v_hat.shape:
        raise InputError(f"shape mismatch: {tuple(v.shape)} vs {tuple(v_hat.shape)}")
    return ((v - v_hat) ** 2).sum()


def spar_loss(scores, sigma: float) -> torch.Tensor:
    """Absolute deviation of the mean importance score from the target sigma."""
    p = scores if isinstance(scores, torch.Tensor) else torch.as_tensor(np.asarray(scores, dtype=np.float64))
    return (p.mean() - sigma).abs()


def mask_loss(masked_input, reconstructed, masked_indices) -> torch.Tensor:
    """Mean squared row distance restricted to the masked (replaced) rows."""
    v, v_hat = _pair(masked_input, reconstructed)
    if v.shape != v_hat.shape:
        raise InputError(f"shape mismatch: {tuple(v.shape)} vs {tuple(v_hat.shape)}")
    idx = np.asarray(masked_indices, dtype=np.int64)
    if idx.size == 0:
        raise InputError("masked index set is empty; resample the mask")
    if idx.min() < 0 or idx.max() >= v.shape[0]:
        raise InputError("masked indices out of range")
    diff = v[idx] - v_hat[idx]
    return (diff**2).sum(dim=1).mean()


def model_loss(l_recon, l_spar) -> torch.Tensor:
    a, b = _pair(l_recon, l_spar)
    return a + b


@dataclass
class LossValues:
    """One training step's loss readings, with the hyperparameters in force."""

    l_recon: float
    l_spar: float
    l_model: float
    sigma: float
    alpha: float
    l_mask: float | None = None

    def __post_init__(self):
        values = [self.l_recon, self.l_spar, self.l_model] + (
            [self.l_mask] if self.l_mask is not None else []
        )
        if not all(np.isfinite(v) for v in values):
            raise DataError("non-finite loss value")
        if abs(self.l_model - (self.l_recon + self.l_spar)) > 1e-6 * max(1.0, abs(self.l_model)):
            raise DataError("l_model must equal l_recon + l_spar")
