"""Image (NCode) and video (MCode) compression pipelines.

Images cross this module's boundary as uint8 arrays, (H, W) or (H, W, C).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import models
from .container import McBitstream, NcBitstream, compressed_size_bits
from .data_io import VideoSequence, from_network, to_network
from .latent_codec import QuantizedLatent, QuantSpec, dequantize, quantize
from .metrics import CIFAR_ORIGINAL_BPP, QualityReport, psnr, rate, ssim


class PipelineError(ValueError):
    pass


class ModelMismatchError(PipelineError):
    pass


@dataclass(frozen=True)
class McodeConfig:
    stride: int = 4
    huffman: bool = True
    bits: int = 5

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


def _image_shape(images: np.ndarray) -> tuple[int, int, int]:
    h, w = images.shape[1:3]
    c = 1 if images.ndim == 3 else images.shape[3]
    return c, h, w


def encode_images(bundle: models.ModelBundle, images) -> np.ndarray:
    """Latents (N, M) for a stack of uint8 images."""
    images = np.asarray(images)
    if images.ndim not in (3, 4):
        raise PipelineError(f"expected a stack of images, got shape {images.shape}")
    if _image_shape(images) != bundle.image_shape:
        raise PipelineError(f"image shape {_image_shape(images)} != model {bundle.image_shape}")
    return models.encode(bundle, to_network(images))


def decode_latents(bundle: models.ModelBundle, z: np.ndarray) -> np.ndarray:
    """uint8 images for latents (N, M)."""
    return from_network(models.decode(bundle, np.atleast_2d(z)))


def reconstruct(bundle, images, bits: int | None = None) -> np.ndarray:
    """Encode and decode a batch, quantizing to ``bits`` when given."""
    z = encode_images(bundle, images)
    if bits is not None:
        spec = QuantSpec(bits, bundle.latent_dim)
        z = np.stack([dequantize(quantize(v, spec)) for v in z])
    return decode_latents(bundle, z)


# --------------------------------------------------------------------------
# NCode


def ncode_encode(bundle: models.ModelBundle, image, bits: int) -> NcBitstream:
    return ncode_encode_batch(bundle, [image], bits)[0]


def ncode_encode_batch(bundle: models.ModelBundle, images, bits: int) -> list[NcBitstream]:
    spec = QuantSpec(bits, bundle.latent_dim)
    c, h, w = bundle.image_shape
    return [
        NcBitstream(quantize(z, spec), h, w, c, bundle.hash_bytes)
        for z in encode_images(bundle, np.asarray(images))
    ]


def _check_model(bundle, stream, force: bool):
    if stream.model_hash != bundle.hash_bytes and not force:
        raise ModelMismatchError(
            f"stream was made with model {stream.model_hash.hex()}, "
            f"this model is {bundle.hash_bytes.hex()}"
        )
    if (stream.channels, stream.height, stream.width) != bundle.image_shape:
        raise PipelineError("stream image dimensions do not match the model")
    if stream.spec.latent_dim != bundle.latent_dim:
        raise PipelineError(f"stream latent length {stream.spec.latent_dim} != M = {bundle.latent_dim}")


def ncode_decode(bundle: models.ModelBundle, stream: NcBitstream, force: bool = False) -> np.ndarray:
    return ncode_decode_batch(bundle, [stream], force)[0]


def ncode_decode_batch(bundle, streams: Sequence[NcBitstream], force: bool = False) -> np.ndarray:
    for s in streams:
        _check_model(bundle, s, force)
    z = np.stack([dequantize(s.latent) for s in streams])
    return decode_latents(bundle, z)


# --------------------------------------------------------------------------
# MCode


def latent_interpolate(z_a, z_b, k: int, n: int) -> np.ndarray:
    """Point ``k`` of ``n`` on the segment from ``z_a`` to ``z_b``."""
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    if z_a.shape != z_b.shape:
        raise ValueError("latents differ in length")
    if not 0 <= k <= n or n < 1:
        raise ValueError(f"need 0 <= k <= N, got k={k}, N={n}")
    if k == 0:
        return z_a.copy()
    if k == n:
        return z_b.copy()
    t = k / n
    return (1.0 - t) * z_a + t * z_b


def keyframe_count(frames: int, stride: int) -> int:
    if frames < 1 or (frames - 1) % stride:
        raise PipelineError(f"{frames} frames do not fit (K-1)*{stride}+1; pad the video")
    return (frames - 1) // stride + 1


def pad_video(video: VideoSequence, stride: int) -> VideoSequence:
    """Repeat the last frame until the length fits (K-1)*N+1."""
    extra = (-(len(video) - 1)) % stride
    return VideoSequence(list(video.frames) + [video.frames[-1]] * extra, video.fps)


def mcode_encode(bundle: models.ModelBundle, video: VideoSequence, cfg: McodeConfig) -> McBitstream:
    keyframe_count(len(video), cfg.stride)
    keys = np.stack(video.frames[:: cfg.stride])
    spec = QuantSpec(cfg.bits, bundle.latent_dim)
    symbols = [quantize(z, spec) for z in encode_images(bundle, keys)]
    c, h, w = bundle.image_shape
    return McBitstream(symbols, cfg.stride, len(video), cfg.huffman, h, w, c, bundle.hash_bytes)


def mcode_latents(stream: McBitstream) -> np.ndarray:
    """Receiver-side latents for all F frames: keyframes plus interpolations."""
    keys = [dequantize(q) for q in stream.keyframes]
    n = stream.stride
    out = [keys[0]]
    for a, b in zip(keys[:-1], keys[1:]):
        out += [latent_interpolate(a, b, k, n) for k in range(1, n + 1)]
    return np.stack(out)


def mcode_decode(bundle: models.ModelBundle, stream: McBitstream, force: bool = False) -> VideoSequence:
    _check_model(bundle, stream, force)
    frames = decode_latents(bundle, mcode_latents(stream))
    return VideoSequence(list(frames))


def keyframe_mask(frames: int, stride: int) -> np.ndarray:
    return np.arange(frames) % stride == 0


# --------------------------------------------------------------------------
# evaluation


def parse_specs(text: str) -> list[tuple[int, int]]:
    """``"100:5,25:4"`` -> ``[(100, 5), (25, 4)]``."""
    out = []
    for part in text.split(","):
        m, _, b = part.strip().partition(":")
        if not b:
            raise ValueError(f"bad spec {part!r}; expected M:B")
        QuantSpec(int(b), int(m))
        out.append((int(m), int(b)))
    return out


def _pick(bundles, m: int) -> models.ModelBundle:
    if isinstance(bundles, models.ModelBundle):
        bundles = {bundles.latent_dim: bundles}
    if m not in bundles:
        raise PipelineError(f"no model with latent length {m}")
    return bundles[m]


def evaluate_spec(bundle, images, bits: int, original_bpp: float = CIFAR_ORIGINAL_BPP) -> QualityReport:
    images = np.asarray(images)
    if len(images) == 0:
        raise PipelineError("empty evaluation set")
    rec = reconstruct(bundle, images, bits)
    _, h, w = bundle.image_shape
    bpp, eta = rate(bundle.latent_dim * bits, h, w, original_bpp)
    return QualityReport(
        psnr_db=float(np.mean([psnr(a, b) for a, b in zip(images, rec)])),
        ssim=float(np.mean([ssim(a, b) for a, b in zip(images, rec)])),
        bpp=bpp,
        eta=eta,
        samples=len(images),
        latent_dim=bundle.latent_dim,
        bits=bits,
    )


def eval_run(bundles: Mapping[int, models.ModelBundle] | models.ModelBundle, images, specs, original_bpp=CIFAR_ORIGINAL_BPP):
    """One QualityReport per (M, b) spec, averaged over ``images``."""
    return [evaluate_spec(_pick(bundles, m), images, b, original_bpp) for m, b in specs]


REPORT_FIELDS = ("latent_dim", "bits", "psnr_db", "ssim", "bpp", "eta", "samples")


def write_reports(path, reports: Sequence[QualityReport]) -> None:
    """CSV at ``path`` plus a JSON twin with the same stem."""
    path = Path(path)
    rows = [{k: r.as_dict()[k] for k in REPORT_FIELDS} for r in reports]
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    path.with_suffix(".json").write_text(json.dumps(rows, indent=2) + "\n")
