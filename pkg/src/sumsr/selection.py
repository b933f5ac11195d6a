"""Unsupervised checkpoint selection from validation losses.

For every selector checkpoint, validation videos are summarized with the
actual (hard) summary pipeline, reconstructed with a fixed reference
reconstructor, and scored by reconstruction and sparsity losses.  Per-epoch
means are min-max normalized across epochs and the chosen epoch maximizes
normalized reconstruction loss minus normalized sparsity loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .dataset import FrameFeatureSequence
from .errors import InputError
from .kts import ShotSegmentation
from .losses import recon_loss, spar_loss
from .networks import MaskVector, Reconstructor, Selector, hard_summary, load_from_numpy
from .summarizer import summarize


@dataclass
class ValidationRecord:
    """Raw per-(epoch, video) validation losses plus their normalized means."""

    recon_raw: np.ndarray  # (E, n_videos)
    spar_raw: np.ndarray
    recon_mean: np.ndarray = field(init=False)
    spar_mean: np.ndarray = field(init=False)
    recon_norm: np.ndarray = field(init=False)
    spar_norm: np.ndarray = field(init=False)

    def __post_init__(self):
        self.recon_raw = np.atleast_2d(np.asarray(self.recon_raw, dtype=np.float64))
        self.spar_raw = np.atleast_2d(np.asarray(self.spar_raw, dtype=np.float64))
        if self.recon_raw.shape != self.spar_raw.shape or self.recon_raw.size == 0:
            raise InputError("recon and spar loss grids must be nonempty and equal-shape")
        self.recon_mean = self.recon_raw.mean(axis=1)
        self.spar_mean = self.spar_raw.mean(axis=1)
        self.recon_norm = normalize_losses(self.recon_mean)
        self.spar_norm = normalize_losses(self.spar_mean)

    @property
    def n_epochs(self) -> int:
        return int(self.recon_raw.shape[0])


def normalize_losses(means: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant array maps to all zeros."""
    v = np.asarray(means, dtype=np.float64)
    if v.size == 0:
        raise InputError("cannot normalize an empty array")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def validation_losses_for_state(
    selector: Selector,
    reconstructor: Reconstructor,
    mask: MaskVector | torch.Tensor,
    val_videos: list[FrameFeatureSequence],
    segmentations: dict[str, ShotSegmentation],
    alpha: float,
    sigma: float,
) -> tuple[list[float], list[float]]:
    """(recon, spar) losses of the currently loaded selector on each video."""
    recs, spars = [], []
    with torch.no_grad():
        for video in val_videos:
            scores = selector(video.features)
            sel = summarize(video, scores.numpy(), segmentations[video.video_id], alpha)
            su = hard_summary(video.features, sel.frame_mask, mask)
            recon = reconstructor(su)
            target = torch.as_tensor(video.features, dtype=recon.dtype)
            recs.append(float(recon_loss(target, recon)))
            spars.append(float(spar_loss(scores, sigma)))
    return recs, spars


def epoch_validation_losses(
    selector: Selector,
    selector_states: list[dict[str, np.ndarray]],
    reconstructor: Reconstructor,
    mask: MaskVector | torch.Tensor,
    val_videos: list[FrameFeatureSequence],
    segmentations: dict[str, ShotSegmentation],
    alpha: float,
    sigma: float,
) -> ValidationRecord:
    """Validation loss grid over selector checkpoints, via the hard-summary
    pipeline with a fixed reference reconstructor."""
    if not selector_states:
        raise InputError("no selector checkpoints to evaluate")
    if not val_videos:
        raise InputError("no validation videos")
    for video in val_videos:
        if video.video_id not in segmentations:
            raise InputError(f"missing segmentation for video {video.video_id!r}")
    recon_grid, spar_grid = [], []
    for state in selector_states:
        load_from_numpy(selector, "selector", state)
        recs, spars = validation_losses_for_state(
            selector, reconstructor, mask, val_videos, segmentations, alpha, sigma
        )
        recon_grid.append(recs)
        spar_grid.append(spars)
    return ValidationRecord(recon_raw=np.array(recon_grid), spar_raw=np.array(spar_grid))


def select_epoch(record: ValidationRecord) -> int:
    """1-based epoch maximizing recon_norm - spar_norm (smallest index on ties)."""
    diff = record.recon_norm - record.spar_norm
    return int(np.argmax(diff)) + 1


def select_reconstructor_joint(
    selector: Selector,
    reconstructor: Reconstructor,
    paired_states: list[dict[str, np.ndarray]],
    val_videos: list[FrameFeatureSequence],
    segmentations: dict[str, ShotSegmentation],
    alpha: float,
    mask: MaskVector | torch.Tensor,
) -> int:
    """1-based epoch whose own reconstructor attains the smallest mean
    validation reconstruction loss on its own hard summaries."""
    if not paired_states:
        raise InputError("no checkpoints to evaluate")
    means = []
    for state in paired_states:
        load_from_numpy(selector, "selector", state)
        load_from_numpy(reconstructor, "reconstructor", state)
        recs = []
        with torch.no_grad():
            for video in val_videos:
                scores = selector(video.features)
                sel = summarize(video, scores.numpy(), segmentations[video.video_id], alpha)
                su = hard_summary(video.features, sel.frame_mask, mask)
                recon = reconstructor(su)
                target = torch.as_tensor(video.features, dtype=recon.dtype)
                recs.append(float(recon_loss(target, recon)))
        means.append(float(np.mean(recs)))
    return int(np.argmin(means)) + 1


def select_iteration(validation_recon_means: list[float]) -> int:
    """1-based iteration with the smallest selected-model validation
    reconstruction loss (earliest on ties)."""
    if not validation_recon_means:
        raise InputError("no iterations to choose from")
    return int(np.argmin(np.asarray(validation_recon_means, dtype=np.float64))) + 1


def selection_diagnostics(record: ValidationRecord) -> list[dict]:
    """Per-epoch curve table: normalized losses and their difference."""
    rows = []
    for i in range(record.n_epochs):
        rows.append(
            {
                "epoch": i + 1,
                "recon_norm": float(record.recon_norm[i]),
                "spar_norm": float(record.spar_norm[i]),
                "difference": float(record.recon_norm[i] - record.spar_norm[i]),
            }
        )
    return rows
