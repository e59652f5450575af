"""Binary symmetric channel: independent bit flips at rate epsilon.

Randomness comes from SplitMix64 (Steele, Lea & Flood's recurrence):
output i is mix(seed + (i + 1) * 0x9E3779B97F4A7C15). Bit k of the in-scope
region flips when the top 53 bits of output k, as a double in [0, 1), fall
below epsilon. This makes ``corrupt`` reproducible across implementations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import payload_span

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

SCOPES = ("payload", "file")


@dataclass(frozen=True)
class ChannelModel:
    ber: float
    seed: int = 0
    scope: str = "payload"

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"bit error rate must be in [0, 1], got {self.ber}")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}")


def splitmix64(seed: int, n: int, start: int = 0) -> np.ndarray:
    """Outputs ``start .. start+n-1`` of the SplitMix64 stream for ``seed``."""
    with np.errstate(over="ignore"):
        idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * GOLDEN_GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def uniforms(seed: int, n: int) -> np.ndarray:
    return (splitmix64(seed, n) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def flip_bits(data: bytes, ber: float, seed: int) -> bytes:
    """Flip each bit of ``data`` with probability ``ber``; bit k is bit (k % 8), LSB first, of byte k // 8."""
    if not data:
        return bytes(data)
    n = 8 * len(data)
    if ber <= 0.0:
        return bytes(data)
    mask = uniforms(seed, n) < ber
    flips = np.packbits(mask, bitorder="little")
    return (np.frombuffer(bytes(data), dtype=np.uint8) ^ flips).tobytes()


def corrupt(data: bytes, model: ChannelModel) -> bytes:
    """Pass bytes through the channel.

    With ``scope="payload"`` the NC01/MC01 header is left intact and only
    the payload/body is exposed; ``scope="file"`` exposes every byte.
    """
    data = bytes(data)
    if model.scope == "file":
        return flip_bits(data, model.ber, model.seed)
    lo, hi = payload_span(data)
    return data[:lo] + flip_bits(data[lo:hi], model.ber, model.seed) + data[hi:]


def mix_seed(seed: int, *parts: int) -> int:
    """Derive an independent seed from ``seed`` and integer indices."""
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    for p in parts:
        s = int(splitmix64(s ^ (int(p) & 0xFFFFFFFFFFFFFFFF), 1)[0])
    return s


# --------------------------------------------------------------------------
# experiments


@dataclass
class SweepRow:
    ber: float
    psnr_db: float
    ssim: float
    samples: int


def robustness_sweep(bundle, images, bers, trials: int = 1, seed: int = 0, bits: int = 5) -> list[SweepRow]:
    """Mean PSNR/SSIM after sending each image's NC01 file through the channel.

    Every (image, trial) pair gets its own seed derived from ``seed``; the
    same pairs are reused for every error rate.
    """
    from .container import decode_nc, encode_nc
    from .metrics import psnr, ssim
    from .pipeline import ncode_decode_batch, ncode_encode_batch

    images = np.asarray(images)
    if len(images) == 0:
        raise ValueError("need at least one image")
    files = [encode_nc(s) for s in ncode_encode_batch(bundle, images, bits)]
    rows = []
    for ber in bers:
        streams, refs = [], []
        for t in range(trials):
            for i, data in enumerate(files):
                model = ChannelModel(float(ber), mix_seed(seed, i, t))
                streams.append(decode_nc(corrupt(data, model)))
                refs.append(images[i])
        rec = ncode_decode_batch(bundle, streams)
        rows.append(
            SweepRow(
                float(ber),
                float(np.mean([psnr(a, b) for a, b in zip(refs, rec)])),
                float(np.mean([ssim(a, b) for a, b in zip(refs, rec)])),
                len(refs),
            )
        )
    return rows


def mc_failure_rate(data: bytes, ber: float, trials: int, seed: int = 0) -> float:
    """Fraction of trials in which a corrupted MC01 file fails to parse.

    Parsing covers header/body framing, Huffman decoding and the delta
    symbol-range check.
    """
    from .container import ContainerError, decode_mc
    from .entropy import EntropyError

    failures = 0
    for t in range(trials):
        try:
            decode_mc(corrupt(data, ChannelModel(ber, mix_seed(seed, t))))
        except (ContainerError, EntropyError, ValueError):
            failures += 1
    return failures / trials
