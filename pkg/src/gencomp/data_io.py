"""Datasets and image file I/O.

Images are uint8 arrays shaped (H, W) for grayscale or (H, W, 3) for RGB.
Conversion to the networks' [-1, 1] NCHW float layout happens in
:func:`to_network` / :func:`from_network`.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

SHAPE_CLASSES = ("ellipse", "rectangle", "cross")

# generative parameter ranges, as fractions of the image side
RADIUS_RANGE = (0.15, 0.32)
BACKGROUND_RANGE = (0, 60)
FOREGROUND_RANGE = (140, 255)
_SUPERSAMPLE = 4


class FormatError(ValueError):
    pass


@dataclass
class ShapeSample:
    image: np.ndarray
    label: int
    params: dict = field(default_factory=dict)


@dataclass
class VideoSequence:
    frames: list
    fps: float = 25.0

    def __post_init__(self):
        if not self.frames:
            raise ValueError("video needs at least one frame")
        shape = self.frames[0].shape
        if any(f.shape != shape for f in self.frames):
            raise ValueError("video frames differ in shape")

    def __len__(self):
        return len(self.frames)


# --------------------------------------------------------------------------
# synthetic shapes


def _coverage(label, size, cx, cy, ra, rb, theta):
    """Fraction of each pixel covered by the shape, by supersampling."""
    ss = _SUPERSAMPLE
    t = (np.arange(size * ss) + 0.5) / ss
    yy, xx = np.meshgrid(t, t, indexing="ij")
    dx, dy = xx - cx, yy - cy
    c, s = np.cos(theta), np.sin(theta)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    if label == 0:
        inside = (u / ra) ** 2 + (v / rb) ** 2 <= 1.0
    elif label == 1:
        inside = (np.abs(u) <= ra) & (np.abs(v) <= rb)
    else:
        arm = 0.3 * ra
        inside = ((np.abs(u) <= ra) & (np.abs(v) <= arm)) | ((np.abs(v) <= ra) & (np.abs(u) <= arm))
    return inside.reshape(size, ss, size, ss).mean(axis=(1, 3))


def render_shape(label: int, size: int, cx, cy, ra, rb, theta, background, foreground) -> np.ndarray:
    cov = _coverage(label, size, cx, cy, ra, rb, theta)
    img = background + (foreground - background) * cov
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def _extent(label, ra, rb):
    # radius of a disc containing the shape at any rotation
    if label == 0:
        return max(ra, rb)
    if label == 1:
        return float(np.hypot(ra, rb))
    return float(np.hypot(ra, 0.3 * ra))


def _draw_params(rng, label, size):
    lo, hi = RADIUS_RANGE
    ra = rng.uniform(lo, hi) * size
    rb = rng.uniform(lo, hi) * size if label != 2 else ra
    theta = rng.uniform(0.0, np.pi)
    ext = _extent(label, ra, rb)
    room = size / 2 - 1.5
    if ext > room:
        # small canvases: shrink so some centre position keeps the shape inside
        ra, rb = ra * room / ext, rb * room / ext
        ext = _extent(label, ra, rb)
    margin = ext + 1.0
    cx = rng.uniform(margin, size - margin)
    cy = rng.uniform(margin, size - margin)
    bg = rng.uniform(*BACKGROUND_RANGE)
    fg = rng.uniform(*FOREGROUND_RANGE)
    return dict(cx=cx, cy=cy, ra=ra, rb=rb, theta=theta, background=bg, foreground=fg)


def gen_shapes(count: int, size: int = 32, seed: int = 0) -> list[ShapeSample]:
    """Deterministic labelled grayscale shapes; labels cycle 0, 1, 2."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if size < 16:
        raise ValueError("size must be >= 16")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        label = i % len(SHAPE_CLASSES)
        p = _draw_params(rng, label, size)
        out.append(ShapeSample(render_shape(label, size, **p), label, p))
    return out


def gen_motion_video(frames: int, size: int = 32, seed: int = 0) -> VideoSequence:
    """One shape drifting along a smooth closed path while slowly rotating."""
    if frames < 2:
        raise ValueError("need at least 2 frames")
    rng = np.random.default_rng(seed)
    label = int(rng.integers(len(SHAPE_CLASSES)))
    p = _draw_params(rng, label, size)
    ext = _extent(label, p["ra"], p["rb"])
    lo, hi = ext + 1.0, size - ext - 1.0
    mid, amp = (lo + hi) / 2, (hi - lo) / 2
    period = rng.uniform(80.0, 120.0)
    phase = rng.uniform(0, 2 * np.pi, size=2)
    spin = rng.uniform(-0.01, 0.01)
    out = []
    for t in range(frames):
        w = 2 * np.pi * t / period
        cx = mid + amp * np.sin(w + phase[0])
        cy = mid + amp * np.sin(2 * w + phase[1]) * 0.5
        img = render_shape(
            label, size, cx, cy, p["ra"], p["rb"], p["theta"] + spin * t, p["background"], p["foreground"]
        )
        out.append(img)
    return VideoSequence(out)


# --------------------------------------------------------------------------
# tensor conversion


def to_network(images) -> np.ndarray:
    """uint8 (N, H, W[, C]) -> float64 (N, C, H, W) in [-1, 1]."""
    a = np.asarray(images, dtype=np.float64)
    if a.ndim == 3:
        a = a[:, None]
    else:
        a = a.transpose(0, 3, 1, 2)
    return a / 127.5 - 1.0


def from_network(x: np.ndarray) -> np.ndarray:
    """float (N, C, H, W) in [-1, 1] -> uint8 (N, H, W[, C])."""
    a = np.clip(np.round((np.asarray(x) + 1.0) * 127.5), 0, 255).astype(np.uint8)
    return a[:, 0] if a.shape[1] == 1 else a.transpose(0, 2, 3, 1).copy()


# --------------------------------------------------------------------------
# CIFAR-10

CIFAR_RECORD = 1 + 32 * 32 * 3


def read_cifar10(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a CIFAR-10 binary batch into (N, 32, 32, 3) uint8 images and labels."""
    raw = Path(path).read_bytes()
    if len(raw) == 0 or len(raw) % CIFAR_RECORD:
        raise FormatError(f"{path}: size {len(raw)} is not a multiple of {CIFAR_RECORD}")
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise FormatError(f"{path}: label {labels.max()} out of range")
    images = rec[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1).copy()
    return images, labels


# --------------------------------------------------------------------------
# netpbm

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_pnm(data: bytes, magic: bytes) -> np.ndarray:
    if data[:2] != magic:
        raise FormatError(f"expected {magic.decode()} binary netpbm, got {data[:2]!r}")
    pos = 2
    vals = []
    for _ in range(3):
        m = _TOKEN.match(data, pos)
        if not m:
            raise FormatError("truncated netpbm header")
        if not m.group(1).isdigit():
            raise FormatError(f"bad netpbm header field {m.group(1)!r}")
        vals.append(int(m.group(1)))
        pos = m.end()
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("truncated netpbm header")
    pos += 1
    w, h, maxval = vals
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    ch = 1 if magic == b"P5" else 3
    n = w * h * ch
    if len(data) - pos < n:
        raise FormatError("truncated netpbm pixel data")
    arr = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
    return arr.reshape(h, w) if ch == 1 else arr.reshape(h, w, 3)


def read_pgm(path) -> np.ndarray:
    return _read_pnm(Path(path).read_bytes(), b"P5").copy()


def read_ppm(path) -> np.ndarray:
    return _read_pnm(Path(path).read_bytes(), b"P6").copy()


def read_image(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM file")
    return _read_pnm(data, data[:2]).copy()


def write_pgm(path, image: np.ndarray) -> None:
    a = np.asarray(image)
    if a.ndim != 2 or a.dtype != np.uint8:
        raise ValueError("PGM needs a 2-D uint8 array")
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (a.shape[1], a.shape[0]) + a.tobytes())


def write_ppm(path, image: np.ndarray) -> None:
    a = np.asarray(image)
    if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8:
        raise ValueError("PPM needs an (H, W, 3) uint8 array")
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (a.shape[1], a.shape[0]) + a.tobytes())


def write_image(path, image: np.ndarray) -> None:
    (write_pgm if np.asarray(image).ndim == 2 else write_ppm)(path, image)


# --------------------------------------------------------------------------
# directories

_FRAME = re.compile(r"^frame_(\d+)\.(pgm|ppm)$")


def write_video_dir(directory, video: VideoSequence) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ext = "pgm" if video.frames[0].ndim == 2 else "ppm"
    for i, frame in enumerate(video.frames, start=1):
        write_image(d / f"frame_{i:06d}.{ext}", frame)


def read_video_dir(directory) -> VideoSequence:
    d = Path(directory)
    found = sorted((int(m.group(1)), name) for name in os.listdir(d) if (m := _FRAME.match(name)))
    if not found:
        raise FormatError(f"{d}: no frame_NNNNNN.pgm/ppm files")
    return VideoSequence([read_image(d / name) for _, name in found])


def write_labeled_dir(directory, images: Sequence[np.ndarray], labels: Sequence[int]) -> None:
    """Write ``img_NNNNNN.pgm`` files plus a ``labels.txt`` (one label per line)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(images):
        ext = "pgm" if img.ndim == 2 else "ppm"
        write_image(d / f"img_{i:06d}.{ext}", img)
    (d / "labels.txt").write_text("".join(f"{int(y)}\n" for y in labels))


def read_labeled_dir(directory) -> tuple[np.ndarray, np.ndarray | None]:
    d = Path(directory)
    names = sorted(n for n in os.listdir(d) if re.match(r"^img_\d+\.(pgm|ppm)$", n))
    if not names:
        raise FormatError(f"{d}: no img_NNNNNN.pgm/ppm files")
    images = np.stack([read_image(d / n) for n in names])
    lab = d / "labels.txt"
    labels = None
    if lab.exists():
        labels = np.array([int(t) for t in lab.read_text().split()], dtype=np.int64)
        if len(labels) != len(images):
            raise FormatError(f"{lab}: {len(labels)} labels for {len(images)} images")
    return images, labels


# --------------------------------------------------------------------------
# splits


def split_images(n: int, seed: int = 0, train_fraction: float = 0.9) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle into (train, eval) index arrays."""
    if n < 4:
        raise ValueError("need at least 4 items to split")
    order = np.random.default_rng(seed).permutation(n)
    cut = int(round(train_fraction * n))
    cut = min(max(cut, 1), n - 1)
    return np.sort(order[:cut]), np.sort(order[cut:])


def split_videos(videos: Sequence[VideoSequence]):
    """75% of videos whole for training; the rest split in time.

    Returns ``(train, eval)`` lists of VideoSequence. Of each split video
    the first ``ceil(F/2)`` frames train and the remainder evaluate.
    """
    n = len(videos)
    if n < 4:
        raise ValueError("need at least 4 videos to split")
    n_whole = (3 * n) // 4
    train = list(videos[:n_whole])
    evaluation = []
    for v in videos[n_whole:]:
        if len(v) < 2:
            raise ValueError("split videos need at least 2 frames")
        half = (len(v) + 1) // 2
        train.append(VideoSequence(v.frames[:half], v.fps))
        evaluation.append(VideoSequence(v.frames[half:], v.fps))
    return train, evaluation


def split(data, kind: str = "image", seed: int = 0):
    """Dispatch to :func:`split_images` (returns index arrays) or :func:`split_videos`."""
    if kind == "image":
        return split_images(len(data), seed)
    if kind == "video":
        return split_videos(data)
    raise ValueError(f"unknown split kind {kind!r}")
