"""Uniform latent quantization and LSB-first bit packing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuantSpec:
    bits: int
    latent_dim: int

    def __post_init__(self):
        if not 1 <= int(self.bits) <= 8:
            raise ValueError(f"bits must be in [1, 8], got {self.bits}")
        if int(self.latent_dim) < 1:
            raise ValueError(f"latent_dim must be >= 1, got {self.latent_dim}")

    @property
    def levels(self) -> int:
        return 1 << self.bits

    @property
    def step(self) -> float:
        """Grid spacing on [-1, 1]."""
        return 2.0 / (self.levels - 1)


@dataclass(frozen=True, eq=False)
class QuantizedLatent:
    spec: QuantSpec
    symbols: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols)
        if s.shape != (self.spec.latent_dim,):
            raise ValueError(f"expected {self.spec.latent_dim} symbols, got shape {s.shape}")
        if s.size and (s.min() < 0 or s.max() > self.spec.levels - 1):
            raise ValueError(f"symbol out of range [0, {self.spec.levels - 1}]")
        object.__setattr__(self, "symbols", s.astype(np.int64))

    def __eq__(self, other):
        return (
            isinstance(other, QuantizedLatent)
            and self.spec == other.spec
            and np.array_equal(self.symbols, other.symbols)
        )


def quantize(z, spec: QuantSpec) -> QuantizedLatent:
    """Map z in [-1, 1]^M to b-bit symbols on a grid that includes both endpoints.

    Rounds half away from zero; inputs are clamped to [-1, 1] first.
    """
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("latent contains non-finite values")
    top = spec.levels - 1
    t = (np.clip(z, -1.0, 1.0) + 1.0) / 2.0 * top
    q = np.floor(t + 0.5)  # t >= 0, so this is half-away-from-zero
    return QuantizedLatent(spec, np.clip(q, 0, top).astype(np.int64))


def dequantize(q: QuantizedLatent) -> np.ndarray:
    top = q.spec.levels - 1
    s = q.symbols
    if s.size and (s.min() < 0 or s.max() > top):
        raise ValueError("symbol out of range")
    return 2.0 * s / top - 1.0


def packed_size(spec: QuantSpec) -> int:
    return (spec.latent_dim * spec.bits + 7) // 8


def pack(q: QuantizedLatent) -> bytes:
    """Symbols in index order, ``b`` bits each, least significant bit first."""
    b = q.spec.bits
    bits = ((q.symbols[:, None] >> np.arange(b)) & 1).astype(np.uint8).ravel()
    return np.packbits(bits, bitorder="little").tobytes()


def unpack(data: bytes, spec: QuantSpec) -> QuantizedLatent:
    n = packed_size(spec)
    if len(data) != n:
        raise ValueError(f"expected {n} bytes for {spec}, got {len(data)}")
    bits = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8), bitorder="little")
    bits = bits[: spec.latent_dim * spec.bits].reshape(spec.latent_dim, spec.bits)
    symbols = (bits.astype(np.int64) << np.arange(spec.bits)).sum(axis=1)
    return QuantizedLatent(spec, symbols)
