"""Frame normalization, resampling, windowing and input corruption.

Normalization runs per frame: the hip midpoint moves to the origin, the
horizontal component of the left-hip-to-right-hip axis is rotated onto
+x (rotation about the vertical axis only, so pelvis tilt survives),
and the frame is divided by its max absolute coordinate so every value
lands in [-1, 1].  Per-frame scaling also equalizes actor sizes.

All operations are pure given an explicit seeded generator.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .c3dio import HIP_MARKERS, MotionSequence
from .errors import DegenerateHips, UpsampleRequested

FULL_SEQUENCE = math.inf  # window-width sentinel: take all frames


@dataclass
class PreprocConfig:
    target_fps: float = 30.0
    window: float = 30          # FULL_SEQUENCE takes whole sequences
    offset: int | None = None   # defaults to window // 2
    noise_sigma: float = 0.05
    left_hip: str = HIP_MARKERS[0]
    right_hip: str = HIP_MARKERS[1]
    root: str | None = None     # explicit root marker; hip midpoint otherwise
    vertical_axis: int = 2      # index of the up axis in (x, y, z)

    def __post_init__(self):
        if self.offset is None and self.window is not FULL_SEQUENCE:
            self.offset = max(1, int(self.window) // 2)
        if self.offset is not None and self.offset < 1:
            raise ValueError("offset must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def hip_indices(self, markers) -> tuple:
        return markers.names.index(self.left_hip), markers.names.index(self.right_hip)

    def root_index(self, markers):
        return markers.names.index(self.root) if self.root else None


@dataclass
class WindowBatch:
    windows: list               # list of (w, dim) arrays, ordered by start frame
    parent_id: str
    label: int | None = None
    starts: list = field(default_factory=list)


def orient_center_scale(frame: np.ndarray, left_hip: int, right_hip: int,
                        vertical_axis: int = 2, root: int | None = None) -> np.ndarray:
    """Normalize one flat (3N,) frame; see the module docstring."""
    pts = np.asarray(frame, dtype=np.float64).reshape(-1, 3).copy()
    lh, rh = pts[left_hip], pts[right_hip]
    if np.linalg.norm(rh - lh) < 1e-9:
        raise DegenerateHips("hip markers coincide")
    origin = pts[root] if root is not None else 0.5 * (lh + rh)
    pts -= origin

    up = vertical_axis
    ax_a, ax_b = [i for i in range(3) if i != up]  # horizontal plane axes
    hip_axis = pts[right_hip] - pts[left_hip]
    ha, hb = hip_axis[ax_a], hip_axis[ax_b]
    norm = math.hypot(ha, hb)
    if norm < 1e-9:
        raise DegenerateHips("hip axis has no horizontal component")
    # rotate about the vertical axis so (ha, hb) -> (norm, 0)
    cos_t, sin_t = ha / norm, hb / norm
    a, b = pts[:, ax_a].copy(), pts[:, ax_b].copy()
    pts[:, ax_a] = cos_t * a + sin_t * b
    pts[:, ax_b] = -sin_t * a + cos_t * b

    peak = np.abs(pts).max()
    if peak > 0:
        pts /= peak
    return pts.reshape(-1)


def normalize_sequence(seq: MotionSequence, cfg: PreprocConfig, markers) -> MotionSequence:
    lh, rh = cfg.hip_indices(markers)
    root = cfg.root_index(markers)
    frames = np.stack([
        orient_center_scale(f, lh, rh, vertical_axis=cfg.vertical_axis, root=root)
        for f in seq.frames
    ])
    return MotionSequence(frames=frames, fps=seq.fps, label=seq.label,
                          actor=seq.actor, source=seq.source)


def subsample(seq: MotionSequence, target_fps: float) -> MotionSequence:
    """Nearest-frame decimation: keep every round(fps/target)-th frame."""
    if target_fps > seq.fps:
        raise UpsampleRequested(f"cannot resample {seq.fps} fps up to {target_fps} fps")
    step = max(1, int(round(seq.fps / target_fps)))
    return MotionSequence(frames=seq.frames[::step].copy(), fps=target_fps,
                          label=seq.label, actor=seq.actor, source=seq.source)


def sliding_windows(seq: MotionSequence, window: float, offset: int,
                    parent_id: str | None = None) -> WindowBatch:
    """Windows start at 0, offset, 2*offset, ... while start + w <= T.

    Sequences shorter than the width come back as a single unpadded
    window (the recurrent models accept variable length), as does the
    FULL_SEQUENCE sentinel.
    """
    frames = seq.frames
    total = len(frames)
    pid = parent_id if parent_id is not None else seq.source
    if window is FULL_SEQUENCE or total < window:
        return WindowBatch(windows=[frames.copy()], parent_id=pid, label=seq.label,
                           starts=[0])
    window = int(window)
    starts = list(range(0, total - window + 1, offset))
    return WindowBatch(windows=[frames[s:s + window].copy() for s in starts],
                       parent_id=pid, label=seq.label, starts=starts)


def corrupt(frame: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Additive zero-mean Gaussian noise; identity at sigma == 0."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    frame = np.asarray(frame, dtype=np.float64)
    if sigma == 0:
        return frame.copy()
    return frame + rng.normal(0.0, sigma, size=frame.shape)


# --- binary window cache, keyed by (sequence id, config hash) ---

def preproc_hash(cfg: PreprocConfig) -> str:
    key = "|".join(str(v) for v in (
        cfg.target_fps, cfg.window, cfg.offset, cfg.noise_sigma,
        cfg.left_hip, cfg.right_hip, cfg.root, cfg.vertical_axis))
    return hashlib.sha256(key.encode()).hexdigest()[:12]


def cache_path(cache_dir, seq_id: str, cfg: PreprocConfig) -> Path:
    return Path(cache_dir) / f"{seq_id}_{preproc_hash(cfg)}.npy"


def cached_normalized(seq: MotionSequence, cfg: PreprocConfig, markers,
                      cache_dir=None) -> MotionSequence:
    """Normalize + subsample, backed by the cache directory when given."""
    if cache_dir is not None:
        path = cache_path(cache_dir, Path(seq.source).stem or "seq", cfg)
        if path.exists():
            frames = np.load(path)
            return MotionSequence(frames=frames, fps=cfg.target_fps, label=seq.label,
                                  actor=seq.actor, source=seq.source)
    out = subsample(normalize_sequence(seq, cfg, markers), cfg.target_fps)
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        np.save(path, out.frames)
    return out
