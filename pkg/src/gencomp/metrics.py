"""Image quality and rate metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

PSNR_SATURATED = 99.0
CIFAR_ORIGINAL_BPP = 19.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2


@dataclass
class QualityReport:
    psnr_db: float
    ssim: float
    bpp: float
    eta: float
    samples: int
    latent_dim: int = 0
    bits: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def psnr(x, y, peak: float = 255.0) -> float:
    """PSNR in dB for images in [0, peak]; identical images give 99 dB."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    mse = np.mean((x - y) ** 2)
    if mse == 0:
        return PSNR_SATURATED
    return float(10.0 * np.log10(peak * peak / mse))


def _gaussian_window() -> np.ndarray:
    r = np.arange(SSIM_WINDOW) - SSIM_WINDOW // 2
    g = np.exp(-(r**2) / (2 * SSIM_SIGMA**2))
    return g / g.sum()


def _filter(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    # separable 'valid' Gaussian filter over the first two axes
    half = len(w) // 2
    a = correlate1d(a, w, axis=0, mode="constant")[half:-half]
    return correlate1d(a, w, axis=1, mode="constant")[:, half:-half]


def ssim(x, y) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over channels.

    Images are (H, W) or (H, W, C) on the 0..255 scale; only windows fully
    inside the image are used.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    w = _gaussian_window()
    mx, my = _filter(x, w), _filter(y, w)
    sxx = _filter(x * x, w) - mx * mx
    syy = _filter(y * y, w) - my * my
    sxy = _filter(x * y, w) - mx * my
    num = (2 * mx * my + SSIM_C1) * (2 * sxy + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (sxx + syy + SSIM_C2)
    return float(np.mean(num / den))


def rate(payload_bits: int, height: int, width: int, original_bpp: float = CIFAR_ORIGINAL_BPP):
    """``(bpp, eta)``: bits per pixel over H*W pixels and the compression factor."""
    pixels = int(height) * int(width)
    if pixels <= 0:
        raise ValueError("image has zero pixels")
    bpp = payload_bits / pixels
    eta = original_bpp / bpp if bpp > 0 else float("inf")
    return bpp, eta


def tabulated_rate(payload_bits: int, height: int, width: int, original_bpp: float = CIFAR_ORIGINAL_BPP):
    """``(bpp, eta)`` as printed in a results table.

    bpp is rounded to four decimals and eta is computed from that rounded
    bpp, then rounded to an integer. The exact eta can differ by one, e.g.
    25 * 4 bits on 32x32 gives 194.56 exactly but 19 / 0.0977 = 194.47.
    """
    bpp, _ = rate(payload_bits, height, width, original_bpp)
    shown = round(bpp, 4)
    return shown, (round(original_bpp / shown) if shown > 0 else float("inf"))


def stream_rate(stream, original_bpp: float = CIFAR_ORIGINAL_BPP, frames: int = 1):
    """``rate`` of a container stream; for video, bits are averaged over ``frames``."""
    from .container import compressed_size_bits

    bits = compressed_size_bits(stream)
    return rate(bits / frames, stream.height, stream.width, original_bpp)


def accuracy(predicted, labels) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape or labels.size == 0:
        raise ValueError("predictions and labels must be non-empty and aligned")
    return float(np.mean(predicted == labels))


def classifier_probe(classifier, bundle, bits: int | None, images, labels, batch: int = 256) -> float:
    """Accuracy of ``classifier`` on images passed through the compression pipeline.

    ``bits=None`` bypasses the pipeline and scores the original images.
    ``images`` are uint8 (N, H, W) or (N, H, W, C).
    """
    from .data_io import to_network
    from .models import predict
    from .pipeline import reconstruct

    images = np.asarray(images)
    if tuple(classifier.input_shape) != tuple(bundle.image_shape):
        raise ValueError(f"classifier input {classifier.input_shape} != model images {bundle.image_shape}")
    if bits is not None:
        images = np.concatenate([reconstruct(bundle, images[i : i + batch], bits) for i in range(0, len(images), batch)])
    return accuracy(predict(classifier, to_network(images)), labels)
