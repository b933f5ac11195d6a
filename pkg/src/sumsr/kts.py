"""Kernel temporal segmentation: shot boundaries from frame features.

Linear-kernel within-segment scatter is minimized by exact dynamic
programming over candidate change points; the number of change points is
chosen automatically by a penalized criterion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass
class ShotSegmentation:
    """A partition of n subsampled frames into N = K+1 shots.

    ``change_points`` are the K interior boundaries in (0, n); shot j spans
    [cp_{j-1}, cp_j) with cp_0 = 0 and cp_K = n.  Native lengths come from
    the picks expansion (frame t owns [picks[t], picks[t+1])).
    """

    change_points: list[int]
    shot_lengths: list[int]
    shot_lengths_native: list[int]
    n: int
    n_frames_original: int

    @property
    def n_shots(self) -> int:
        return len(self.shot_lengths)

    def boundaries(self) -> list[int]:
        return [0, *self.change_points, self.n]

    def validate(self) -> None:
        if len(self.shot_lengths) != len(self.change_points) + 1:
            raise InputError("shot count must be change-point count + 1")
        if sum(self.shot_lengths) != self.n:
            raise InputError("shot lengths must sum to n")
        if sum(self.shot_lengths_native) != self.n_frames_original:
            raise InputError("native shot lengths must sum to n_frames_original")


def _native_boundary(b: int, picks: np.ndarray, n_frames_original: int) -> int:
    return int(picks[b]) if b < len(picks) else int(n_frames_original)


def _native_lengths(boundaries: list[int], picks: np.ndarray, n_frames_original: int) -> list[int]:
    nb = [_native_boundary(b, picks, n_frames_original) for b in boundaries]
    nb[0] = 0  # first shot owns any native frames before picks[0]
    return [nb[i + 1] - nb[i] for i in range(len(nb) - 1)]


def segmentation_from_annotation(
    change_points: list[int],
    picks: np.ndarray,
    n_frames_original: int,
) -> ShotSegmentation:
    """Wrap externally provided change points into a ShotSegmentation."""
    picks = np.asarray(picks, dtype=np.int64)
    n = len(picks)
    if n < 2:
        raise InputError("need at least 2 frames")
    cps = [int(c) for c in change_points]
    if any(not (0 < c < n) for c in cps):
        raise InputError(f"change points must lie strictly inside (0, {n}): {cps}")
    if sorted(set(cps)) != cps:
        raise InputError(f"change points must be strictly increasing: {cps}")
    boundaries = [0, *cps, n]
    lengths = [boundaries[i + 1] - boundaries[i] for i in range(len(boundaries) - 1)]
    seg = ShotSegmentation(
        change_points=cps,
        shot_lengths=lengths,
        shot_lengths_native=_native_lengths(boundaries, picks, n_frames_original),
        n=n,
        n_frames_original=int(n_frames_original),
    )
    seg.validate()
    return seg


def scatter_matrix(features: np.ndarray) -> np.ndarray:
    """S[a, b] = within-segment scatter of frames [a, b), from Gram cumsums.

    Entries with a >= b are +inf so invalid segments never win the DP min.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    cs = np.vstack([np.zeros(x.shape[1]), np.cumsum(x, axis=0)])  # (n+1, d)
    sq = np.concatenate([[0.0], np.cumsum(np.einsum("ij,ij->i", x, x))])  # (n+1,)
    gram_cum = cs @ cs.T  # cumulative Gram: gram_cum[a, b] = cs_a . cs_b
    diag = np.diag(gram_cum)
    lengths = np.arange(n + 1)[None, :] - np.arange(n + 1)[:, None]  # b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        sums_sq = diag[None, :] - 2.0 * gram_cum + diag[:, None]  # ||cs_b - cs_a||^2
        scatter = (sq[None, :] - sq[:, None]) - sums_sq / lengths
    scatter = np.where(lengths >= 1, np.maximum(scatter, 0.0), np.inf)
    return scatter


def _dp_tables(scatter: np.ndarray, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact DP over (number of change points, prefix length).

    Returns (cost, parent): cost[k, b] is the minimal scatter of frames [0, b)
    split by k change points; parent[k, b] the best last boundary (first index
    on ties).
    """
    n = scatter.shape[0] - 1
    cost = np.full((kmax + 1, n + 1), np.inf)
    parent = np.zeros((kmax + 1, n + 1), dtype=np.int64)
    cost[0] = scatter[0]  # cost[0, 0] stays inf: segments must be nonempty
    for k in range(1, kmax + 1):
        # candidate a ranges over k..b-1; rows with cost inf exclude themselves
        cand = cost[k - 1][:, None] + scatter  # (n+1, n+1), cand[a, b]
        parent[k] = np.argmin(cand, axis=0)
        cost[k] = cand[parent[k], np.arange(n + 1)]
    return cost, parent


def _backtrack(parent: np.ndarray, k: int, n: int) -> list[int]:
    cps = []
    b = n
    for kk in range(k, 0, -1):
        b = int(parent[kk, b])
        cps.append(b)
    return cps[::-1]


def kts_segment(
    features: np.ndarray,
    max_change_points: int | None = None,
    penalty_weight: float = 1.0,
    picks: np.ndarray | None = None,
    n_frames_original: int | None = None,
) -> ShotSegmentation:
    """Segment a video into shots by penalized minimum-scatter DP.

    The change-point count k <= max_change_points minimizes
    J(k) + penalty_weight * k * (log(n / k) + 1); ties prefer fewer change
    points.  Defaults: max_change_points = n // 10, penalty_weight = 1.0.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InputError("features must be (n, d) with n >= 2")
    if not np.isfinite(x).all():
        raise InputError("features contain non-finite values")
    if penalty_weight < 0:
        raise InputError("penalty_weight must be >= 0")
    n = x.shape[0]
    if picks is None:
        picks = np.arange(n)
    picks = np.asarray(picks, dtype=np.int64)
    if n_frames_original is None:
        n_frames_original = int(picks[-1]) + 1
    if max_change_points is None:
        max_change_points = n // 10
    if max_change_points < 0:
        raise InputError("max_change_points must be >= 0")
    kmax = min(int(max_change_points), n - 1)
    if n == 2 or kmax == 0:
        return segmentation_from_annotation([], picks, n_frames_original)
    scatter = scatter_matrix(x)
    cost, parent = _dp_tables(scatter, kmax)
    totals = cost[:, n]
    ks = np.arange(kmax + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        penalties = penalty_weight * ks * (np.log(n / ks) + 1.0)
    penalties[0] = 0.0
    k_best = int(np.argmin(totals + penalties))  # argmin takes the first (fewest) on ties
    cps = _backtrack(parent, k_best, n)
    return segmentation_from_annotation(cps, picks, n_frames_original)


def dp_costs(features: np.ndarray, kmax: int) -> np.ndarray:
    """J(k) for k = 0..kmax: minimal total scatter with exactly k change points."""
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    kmax = min(kmax, n - 1)
    cost, _ = _dp_tables(scatter_matrix(x), kmax)
    return cost[:, n]
