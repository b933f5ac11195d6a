"""On-disk dataset container, split generation, and synthetic data.

A dataset is a directory with a ``manifest.json`` plus one binary feature
blob and one JSON annotation file per video.  Feature blobs carry a 16-byte
header (magic ``SUMSRF1\\0``, then n and d as little-endian uint32) followed
by n*d float32 little-endian values, row-major.  Reference summaries are
stored as run-length spans of selected frames at the native frame rate.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, InputError, LoadError, SchemaError

CONTAINER_VERSION = "1"
FEATURE_MAGIC = b"SUMSRF1\x00"

AGGREGATION_MODES = ("max_over_users", "mean_over_users", "single")


@dataclass
class FrameFeatureSequence:
    """One video as an (n, d) sequence of frame embeddings at the subsampled rate.

    ``picks[t]`` is the native-rate frame index of subsampled frame t;
    ``n_frames_original`` is the native frame count.  ``change_points`` is an
    optional externally supplied shot segmentation (subsampled indices).
    """

    video_id: str
    features: np.ndarray
    n_frames_original: int
    picks: np.ndarray
    change_points: list[int] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.picks = np.asarray(self.picks, dtype=np.int64)
        self.n_frames_original = int(self.n_frames_original)
        self.validate()

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def validate(self) -> None:
        if self.features.ndim != 2:
            raise DataError(f"video {self.video_id!r}: features must be 2-D, got {self.features.ndim}-D")
        n, d = self.features.shape
        if n < 2:
            raise DataError(f"video {self.video_id!r}: need at least 2 frames, got {n}")
        if d < 1:
            raise DataError(f"video {self.video_id!r}: need at least 1 feature dimension")
        if not np.isfinite(self.features).all():
            raise DataError(f"video {self.video_id!r}: non-finite feature values")
        if self.picks.shape != (n,):
            raise DataError(f"video {self.video_id!r}: picks length {self.picks.shape} != n={n}")
        if np.any(self.picks < 0):
            raise DataError(f"video {self.video_id!r}: negative pick index")
        if n > 1 and np.any(np.diff(self.picks) <= 0):
            raise DataError(f"video {self.video_id!r}: picks must be strictly increasing")
        if int(self.picks[-1]) >= self.n_frames_original:
            raise DataError(
                f"video {self.video_id!r}: last pick {int(self.picks[-1])} "
                f">= n_frames_original {self.n_frames_original}"
            )
        if self.change_points is not None:
            cps = list(self.change_points)
            if any(not (0 < int(c) < n) for c in cps) or sorted(set(cps)) != cps:
                raise DataError(f"video {self.video_id!r}: invalid change_points {cps}")


@dataclass
class ReferenceSummaries:
    """Per-user (or single ground-truth) keyframe masks at the native rate."""

    per_user_masks: np.ndarray
    aggregation_mode: str = "single"

    def __post_init__(self):
        self.per_user_masks = np.asarray(self.per_user_masks, dtype=np.uint8)
        if self.per_user_masks.ndim != 2 or self.per_user_masks.shape[0] < 1:
            raise DataError("per_user_masks must be a nonempty 2-D array (users x frames)")
        if not np.isin(self.per_user_masks, (0, 1)).all():
            raise DataError("reference masks must be binary")
        if self.aggregation_mode not in AGGREGATION_MODES:
            raise DataError(f"unknown aggregation_mode {self.aggregation_mode!r}")
        if self.aggregation_mode == "single" and self.per_user_masks.shape[0] != 1:
            raise DataError("aggregation_mode 'single' requires exactly one reference mask")

    @property
    def n_users(self) -> int:
        return int(self.per_user_masks.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.per_user_masks.shape[1])


VideoPair = tuple[FrameFeatureSequence, ReferenceSummaries]


def mask_to_spans(mask: np.ndarray) -> list[list[int]]:
    """Run-length encode a binary vector as half-open [start, end) spans of ones."""
    mask = np.asarray(mask).astype(bool)
    if mask.ndim != 1:
        raise DataError("mask must be 1-D")
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, ends = edges[0::2], edges[1::2]
    return [[int(s), int(e)] for s, e in zip(starts, ends)]


def spans_to_mask(spans: list[list[int]], length: int) -> np.ndarray:
    mask = np.zeros(int(length), dtype=np.uint8)
    for s, e in spans:
        if not (0 <= s < e <= length):
            raise DataError(f"span [{s}, {e}) out of range for length {length}")
        mask[s:e] = 1
    return mask


def write_feature_blob(path: Path, features: np.ndarray) -> None:
    features = np.asarray(features, dtype=np.float32)
    n, d = features.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(features.astype("<f4").tobytes(order="C"))


def read_feature_blob(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:8] != FEATURE_MAGIC:
            raise LoadError(f"{path}: not a feature blob (bad magic)")
        n, d = struct.unpack("<II", header[8:])
        payload = fh.read()
    expected = n * d * 4
    if len(payload) != expected:
        raise LoadError(f"{path}: truncated blob ({len(payload)} bytes, expected {expected})")
    return np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()


def _annotation_payload(video: FrameFeatureSequence, refs: ReferenceSummaries) -> dict:
    payload = {
        "picks": [int(p) for p in video.picks],
        "n_frames_original": int(video.n_frames_original),
        "aggregation_mode": refs.aggregation_mode,
        "per_user_masks": [
            {"length": refs.n_frames, "spans": mask_to_spans(m)} for m in refs.per_user_masks
        ],
    }
    if video.change_points is not None:
        payload["change_points"] = [int(c) for c in video.change_points]
    return payload


def save_dataset(pairs: list[VideoPair], out_dir: Path, notes: str = "") -> Path:
    """Write a dataset directory; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not pairs:
        raise ConfigError("cannot save an empty dataset")
    d = pairs[0][0].d
    entries = []
    seen = set()
    for video, refs in pairs:
        if video.video_id in seen:
            raise DataError(f"duplicate video_id {video.video_id!r}")
        seen.add(video.video_id)
        if video.d != d:
            raise SchemaError(f"video {video.video_id!r}: d={video.d} != dataset d={d}")
        if refs.n_frames != video.n_frames_original:
            raise DataError(
                f"video {video.video_id!r}: reference mask length {refs.n_frames} "
                f"!= n_frames_original {video.n_frames_original}"
            )
        feat_rel = f"{video.video_id}.feat"
        anno_rel = f"{video.video_id}.json"
        write_feature_blob(out_dir / feat_rel, video.features)
        (out_dir / anno_rel).write_text(
            json.dumps(_annotation_payload(video, refs), sort_keys=True), encoding="utf-8"
        )
        entries.append({"video_id": video.video_id, "features": feat_rel, "annotations": anno_rel})
    manifest = {
        "container_version": CONTAINER_VERSION,
        "d": int(d),
        "videos": entries,
        "notes": notes,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return manifest_path


def load_dataset(manifest_path: Path) -> list[VideoPair]:
    """Load every video listed in a manifest, in manifest order."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise LoadError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LoadError(f"{manifest_path}: invalid JSON ({exc})") from exc
    version = manifest.get("container_version")
    if version != CONTAINER_VERSION:
        raise SchemaError(f"{manifest_path}: unsupported container_version {version!r}")
    d = int(manifest["d"])
    root = manifest_path.parent
    pairs: list[VideoPair] = []
    seen = set()
    for entry in manifest["videos"]:
        vid = entry["video_id"]
        if vid in seen:
            raise SchemaError(f"duplicate video_id {vid!r} in manifest")
        seen.add(vid)
        feat_path = root / entry["features"]
        anno_path = root / entry["annotations"]
        if not feat_path.exists():
            raise LoadError(f"video {vid!r}: feature blob missing at {feat_path}")
        if not anno_path.exists():
            raise LoadError(f"video {vid!r}: annotation file missing at {anno_path}")
        features = read_feature_blob(feat_path)
        if features.shape[1] != d:
            raise SchemaError(f"video {vid!r}: blob d={features.shape[1]} != manifest d={d}")
        try:
            anno = json.loads(anno_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LoadError(f"video {vid!r}: invalid annotation JSON ({exc})") from exc
        video = FrameFeatureSequence(
            video_id=vid,
            features=features,
            n_frames_original=anno["n_frames_original"],
            picks=np.asarray(anno["picks"], dtype=np.int64),
            change_points=anno.get("change_points"),
        )
        masks = np.stack(
            [spans_to_mask(m["spans"], m["length"]) for m in anno["per_user_masks"]]
        )
        refs = ReferenceSummaries(per_user_masks=masks, aggregation_mode=anno["aggregation_mode"])
        if refs.n_frames != video.n_frames_original:
            raise SchemaError(f"video {vid!r}: mask length != n_frames_original")
        pairs.append((video, refs))
    return pairs


@dataclass
class SplitSpec:
    split_id: int
    train_ids: list[str]
    val_ids: list[str]
    test_ids: list[str]
    seed: int

    def validate(self, known_ids: set[str] | None = None) -> None:
        groups = [set(self.train_ids), set(self.val_ids), set(self.test_ids)]
        if not all(groups[i].isdisjoint(groups[j]) for i in range(3) for j in range(i + 1, 3)):
            raise ConfigError(f"split {self.split_id}: train/val/test overlap")
        if any(len(g) == 0 for g in groups):
            raise ConfigError(f"split {self.split_id}: empty part")
        if known_ids is not None and not set().union(*groups) <= known_ids:
            raise ConfigError(f"split {self.split_id}: ids not present in dataset")


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def make_splits(
    ids: list[str],
    n_splits: int,
    test_fraction: float,
    val_fraction: float,
    seed: int,
) -> list[SplitSpec]:
    """Draw ``n_splits`` random train/val/test partitions of ``ids``.

    |test| = round(test_fraction * |ids|) and |val| = round(val_fraction * |rest|);
    deterministic for a given (ids, seed).
    """
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate ids")
    if not (0 < test_fraction < 1 and 0 < val_fraction < 1):
        raise ConfigError("fractions must lie in (0, 1)")
    if test_fraction + val_fraction >= 1:
        raise ConfigError("test_fraction + val_fraction must be < 1")
    if n_splits < 1:
        raise ConfigError("n_splits must be >= 1")
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    n_test = _round_half_up(test_fraction * len(ids))
    n_val = _round_half_up(val_fraction * (len(ids) - n_test))
    n_train = len(ids) - n_test - n_val
    if min(n_test, n_val, n_train) < 1:
        raise ConfigError(
            f"too few ids ({len(ids)}) for sizes train={n_train} val={n_val} test={n_test}"
        )
    rng = np.random.default_rng(seed)
    splits = []
    for k in range(n_splits):
        perm = [ids[i] for i in rng.permutation(len(ids))]
        test = sorted(perm[:n_test])
        val = sorted(perm[n_test : n_test + n_val])
        train = sorted(perm[n_test + n_val :])
        splits.append(SplitSpec(split_id=k, train_ids=train, val_ids=val, test_ids=test, seed=seed))
    return splits


def save_splits(splits: list[SplitSpec], path: Path) -> None:
    payload = [
        {
            "split_id": s.split_id,
            "train_ids": s.train_ids,
            "val_ids": s.val_ids,
            "test_ids": s.test_ids,
            "seed": s.seed,
        }
        for s in splits
    ]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def load_splits(path: Path) -> list[SplitSpec]:
    path = Path(path)
    if not path.exists():
        raise LoadError(f"split file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: invalid JSON ({exc})") from exc
    splits = [SplitSpec(**entry) for entry in payload]
    for s in splits:
        s.validate()
    return splits


@dataclass
class PlantedStructure:
    """Ground truth of one synthetic video, for oracle-style checks."""

    chapter_bounds: list[int]
    base_centroids: np.ndarray
    event_centroids: np.ndarray
    event_spans: list[tuple[int, int]]
    separation: float
    noise_scale: float

    def centroid_of_frame(self, t: int) -> np.ndarray:
        for (s, e), centroid in zip(self.event_spans, self.event_centroids):
            if s <= t < e:
                return centroid
        for k in range(len(self.chapter_bounds) - 1):
            if self.chapter_bounds[k] <= t < self.chapter_bounds[k + 1]:
                return self.base_centroids[k]
        raise InputError(f"frame {t} outside video")  # pragma: no cover


@dataclass
class SyntheticDataset:
    pairs: list[VideoPair]
    planted: list[PlantedStructure]


def synth_generate(
    n_videos: int,
    n: int,
    d: int,
    n_events: int,
    noise_scale: float,
    seed: int,
    event_length: int = 6,
) -> SyntheticDataset:
    """Generate piecewise-constant videos with planted far-away event segments.

    Each video has ``n_events`` chapters, each holding one event of
    ``event_length`` frames whose centroid sits well outside the base cluster
    (at least 10x the noise scale away).  The single reference mask marks
    exactly the event frames; picks are the identity (no subsampling).
    """
    if d < 2:
        raise ConfigError("d must be >= 2")
    if n_videos < 1 or n_events < 1 or event_length < 1:
        raise ConfigError("n_videos, n_events, event_length must be positive")
    if noise_scale < 0:
        raise ConfigError("noise_scale must be >= 0")
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    if n_events * event_length >= n:
        raise ConfigError("n_events * event_length must be < n")
    bounds = [int(round(k * n / n_events)) for k in range(n_events + 1)]
    if any(bounds[k + 1] - bounds[k] < event_length + 2 for k in range(n_events)):
        raise ConfigError(
            f"infeasible geometry: chapters of ~{n // n_events} frames cannot hold "
            f"events of {event_length} frames with margins"
        )
    scale0 = max(noise_scale, 0.1)
    separation = 12.0 * scale0
    base_radius = scale0
    pairs: list[VideoPair] = []
    planted: list[PlantedStructure] = []
    for v in range(n_videos):
        rng = np.random.default_rng(np.random.SeedSequence((seed, v)))

        def unit() -> np.ndarray:
            vec = rng.standard_normal(d)
            return vec / np.linalg.norm(vec)

        base_centroids = np.stack([unit() * base_radius * rng.uniform(0, 1) for _ in range(n_events)])
        event_centroids = np.stack([unit() * separation for _ in range(n_events)])
        features = np.zeros((n, d))
        mask = np.zeros(n, dtype=np.uint8)
        event_spans = []
        for k in range(n_events):
            cs, ce = bounds[k], bounds[k + 1]
            features[cs:ce] = base_centroids[k]
            start = int(rng.integers(cs + 1, ce - event_length))
            features[start : start + event_length] = event_centroids[k]
            mask[start : start + event_length] = 1
            event_spans.append((start, start + event_length))
        if noise_scale > 0:
            features = features + rng.normal(0.0, noise_scale, size=(n, d))
        video = FrameFeatureSequence(
            video_id=f"synth{v:03d}",
            features=features.astype(np.float32),
            n_frames_original=n,
            picks=np.arange(n),
        )
        refs = ReferenceSummaries(per_user_masks=mask[None, :], aggregation_mode="single")
        pairs.append((video, refs))
        planted.append(
            PlantedStructure(
                chapter_bounds=bounds,
                base_centroids=base_centroids,
                event_centroids=event_centroids,
                event_spans=event_spans,
                separation=separation,
                noise_scale=noise_scale,
            )
        )
    return SyntheticDataset(pairs=pairs, planted=planted)


def expand_to_native(values: np.ndarray, picks: np.ndarray, n_frames_original: int) -> np.ndarray:
    """Expand per-subsampled-frame values to the native rate.

    Subsampled frame t owns native frames [picks[t], picks[t+1]) and the last
    frame owns through n_frames_original - 1.
    """
    values = np.asarray(values)
    picks = np.asarray(picks, dtype=np.int64)
    out = np.zeros(int(n_frames_original), dtype=values.dtype)
    bounds = np.concatenate([picks, [n_frames_original]])
    for t in range(len(picks)):
        out[bounds[t] : bounds[t + 1]] = values[t]
    # native frames before picks[0] (if any) belong to the first subsampled frame
    out[: bounds[0]] = values[0]
    return out
