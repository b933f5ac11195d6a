"""Summary assembly: shot-level scores and budgeted knapsack selection.

The summary is built at the native frame rate: the budget is
floor(alpha * n_frames_original) and shot costs are native shot lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FrameFeatureSequence, expand_to_native
from .errors import InputError
from .kts import ShotSegmentation


@dataclass
class ShotSelection:
    """Chosen shots for one video plus the derived frame masks."""

    shot_scores: np.ndarray
    selected: np.ndarray
    frame_mask: np.ndarray
    native_mask: np.ndarray
    total_value: float
    total_length: int

    def keyframe_spans(self) -> list[list[int]]:
        from .dataset import mask_to_spans

        return mask_to_spans(self.native_mask)

    def to_json(self, video_id: str, change_points: list[int]) -> dict:
        return {
            "video_id": video_id,
            "change_points": [int(c) for c in change_points],
            "shot_scores": [float(s) for s in self.shot_scores],
            "selected": [int(a) for a in self.selected],
            "keyframe_spans": self.keyframe_spans(),
            "total_value": float(self.total_value),
            "total_length": int(self.total_length),
        }


def shot_scores(scores: np.ndarray, segmentation: ShotSegmentation) -> np.ndarray:
    """Mean frame importance per shot."""
    p = np.asarray(scores, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] != segmentation.n:
        raise InputError(
            f"scores length {p.shape} inconsistent with segmentation n={segmentation.n}"
        )
    bounds = segmentation.boundaries()
    return np.array([p[bounds[j] : bounds[j + 1]].mean() for j in range(segmentation.n_shots)])


def knapsack_select(shot_values: np.ndarray, lengths: np.ndarray, budget: int) -> np.ndarray:
    """Exact 0/1 knapsack: maximize total value subject to total length <= budget.

    Among optima, prefers the smaller total length, then the lexicographically
    smallest selection vector.  Returns a binary vector over shots.
    """
    values = np.asarray(shot_values, dtype=np.float64)
    lengths = np.asarray(lengths)
    if values.ndim != 1 or lengths.shape != values.shape:
        raise InputError("shot values and lengths must be 1-D and equally long")
    if not np.issubdtype(lengths.dtype, np.integer):
        raise InputError("lengths must be integers")
    if np.any(lengths <= 0):
        raise InputError("lengths must be positive")
    if budget < 0:
        raise InputError("budget must be >= 0")
    n_items = len(values)
    budget = int(budget)
    # Suffix DP over capacity: best value/length using items i..N-1.
    best_val = np.zeros(budget + 1)
    best_len = np.zeros(budget + 1, dtype=np.int64)
    take = np.zeros((n_items, budget + 1), dtype=bool)
    for i in range(n_items - 1, -1, -1):
        li = int(lengths[i])
        if li <= budget:
            take_val = np.full(budget + 1, -np.inf)
            take_len = np.full(budget + 1, np.iinfo(np.int64).max, dtype=np.int64)
            take_val[li:] = values[i] + best_val[: budget + 1 - li]
            take_len[li:] = li + best_len[: budget + 1 - li]
            better = (take_val > best_val) | ((take_val == best_val) & (take_len < best_len))
            take[i] = better
            best_val = np.where(better, take_val, best_val)
            best_len = np.where(better, take_len, best_len)
    selection = np.zeros(n_items, dtype=np.uint8)
    cap = budget
    for i in range(n_items):
        if take[i, cap]:
            selection[i] = 1
            cap -= int(lengths[i])
    return selection


def summarize(
    video: FrameFeatureSequence,
    scores: np.ndarray,
    segmentation: ShotSegmentation,
    alpha: float,
) -> ShotSelection:
    """Score shots, pick them under the alpha budget, and expand the masks."""
    if not (0 < alpha < 1):
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    p_hat = shot_scores(scores, segmentation)
    native_lengths = np.asarray(segmentation.shot_lengths_native, dtype=np.int64)
    budget = int(np.floor(alpha * video.n_frames_original))
    selected = knapsack_select(p_hat, native_lengths, budget)
    bounds = segmentation.boundaries()
    frame_mask = np.zeros(segmentation.n, dtype=np.uint8)
    for j in range(segmentation.n_shots):
        if selected[j]:
            frame_mask[bounds[j] : bounds[j + 1]] = 1
    native_mask = expand_to_native(frame_mask, video.picks, video.n_frames_original)
    return ShotSelection(
        shot_scores=p_hat,
        selected=selected,
        frame_mask=frame_mask,
        native_mask=native_mask,
        total_value=float(p_hat[selected.astype(bool)].sum()),
        total_length=int(native_lengths[selected.astype(bool)].sum()),
    )
