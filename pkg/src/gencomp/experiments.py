"""Measurements shared by the experiment scripts and the acceptance tests."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .channel import mc_failure_rate
from .container import compressed_size_bits, encode_mc
from .data_io import VideoSequence
from .metrics import classifier_probe, psnr, ssim
from .pipeline import McodeConfig, keyframe_mask, mcode_decode, mcode_encode, reconstruct


def mean_psnr(a, b) -> float:
    return float(np.mean([psnr(x, y) for x, y in zip(a, b)]))


def mean_image_baseline(train_images, eval_images) -> float:
    """Mean PSNR of predicting every eval image by the rounded train-set mean image."""
    mean = np.clip(np.round(np.mean(train_images, axis=0)), 0, 255).astype(np.uint8)
    return mean_psnr(eval_images, [mean] * len(eval_images))


def reconstruction_psnr(bundle, images, bits: int | None = None) -> float:
    return mean_psnr(images, reconstruct(bundle, images, bits))


@dataclass
class VideoReport:
    frames: int
    stride: int
    bits: int
    huffman_bits: int
    raw_bits: int
    saving: float
    keyframe_ssim: float
    interpolated_ssim: float
    keyframe_psnr: float
    interpolated_psnr: float

    @property
    def ssim_gap(self) -> float:
        return self.keyframe_ssim - self.interpolated_ssim

    def as_dict(self) -> dict:
        return {**asdict(self), "ssim_gap": self.ssim_gap}


def video_report(bundle, video: VideoSequence, stride: int = 4, bits: int = 5) -> VideoReport:
    on = mcode_encode(bundle, video, McodeConfig(stride, True, bits))
    off = mcode_encode(bundle, video, McodeConfig(stride, False, bits))
    decoded = mcode_decode(bundle, on).frames
    s = np.array([ssim(a, b) for a, b in zip(video.frames, decoded)])
    p = np.array([psnr(a, b) for a, b in zip(video.frames, decoded)])
    key = keyframe_mask(len(video), stride)
    hb, rb = compressed_size_bits(on), compressed_size_bits(off)
    return VideoReport(
        frames=len(video),
        stride=stride,
        bits=bits,
        huffman_bits=hb,
        raw_bits=rb,
        saving=1.0 - hb / rb,
        keyframe_ssim=float(s[key].mean()),
        interpolated_ssim=float(s[~key].mean()) if (~key).any() else float("nan"),
        keyframe_psnr=float(p[key].mean()),
        interpolated_psnr=float(p[~key].mean()) if (~key).any() else float("nan"),
    )


def huffman_fragility(bundle, video: VideoSequence, ber: float, trials: int, stride: int = 4, bits: int = 5, seed: int = 0) -> float:
    """Fraction of channel trials in which a Huffman-coded MC01 file fails to parse."""
    data = encode_mc(mcode_encode(bundle, video, McodeConfig(stride, True, bits)))
    return mc_failure_rate(data, ber, trials, seed)


def probe_table(classifier, bundles: dict, images, labels, specs) -> dict:
    """Accuracy for uncompressed images and for each (M, b) pipeline."""
    first = next(iter(bundles.values()))
    out = {"uncompressed": classifier_probe(classifier, first, None, images, labels)}
    for m, b in specs:
        out[f"{m}:{b}"] = classifier_probe(classifier, bundles[m], b, images, labels)
    return out
