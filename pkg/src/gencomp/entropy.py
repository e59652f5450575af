"""Integer delta coding of keyframe symbols and canonical Huffman coding.

Huffman payloads are written MSB-first: the first code bit is bit 7 of the
first byte. Canonical codes are assigned in (length, symbol) order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .latent_codec import QuantizedLatent, QuantSpec


class EntropyError(ValueError):
    pass


class CorruptStreamError(EntropyError):
    pass


# --------------------------------------------------------------------------
# delta coding


@dataclass
class DeltaStream:
    spec: QuantSpec
    base: QuantizedLatent
    deltas: list = field(default_factory=list)  # list of int64 arrays, length M


def delta_encode(frames: Sequence[QuantizedLatent]) -> DeltaStream:
    if not frames:
        raise EntropyError("need at least one frame")
    spec = frames[0].spec
    if any(f.spec != spec for f in frames):
        raise EntropyError("frames have mixed quantization specs")
    deltas = [frames[k + 1].symbols - frames[k].symbols for k in range(len(frames) - 1)]
    return DeltaStream(spec, frames[0], deltas)


def delta_decode(stream: DeltaStream) -> list[QuantizedLatent]:
    spec = stream.spec
    top = spec.levels - 1
    cur = stream.base.symbols.copy()
    out = [stream.base]
    for k, d in enumerate(stream.deltas):
        d = np.asarray(d, dtype=np.int64)
        if d.shape != cur.shape:
            raise CorruptStreamError(f"delta {k} has shape {d.shape}, expected {cur.shape}")
        cur = cur + d
        if cur.min() < 0 or cur.max() > top:
            raise CorruptStreamError(f"delta {k} leaves symbol range [0, {top}]")
        out.append(QuantizedLatent(spec, cur.copy()))
    return out


# --------------------------------------------------------------------------
# Huffman


class HuffmanTable:
    """Code lengths per symbol; codes are derived canonically."""

    def __init__(self, lengths: Mapping[int, int]):
        self.lengths = {int(s): int(n) for s, n in lengths.items() if n > 0}
        if any(n > 255 for n in self.lengths.values()):
            raise EntropyError("code length exceeds 255")
        if self.kraft() > 1:
            raise CorruptStreamError("code lengths violate the Kraft inequality")
        order = sorted(self.lengths.items(), key=lambda kv: (kv[1], kv[0]))
        self.codes: dict[int, tuple[int, int]] = {}
        code, prev = 0, 0
        for sym, n in order:
            code <<= n - prev
            self.codes[sym] = (code, n)
            code += 1
            prev = n
        # decoding tables: per length, first code and index into sorted symbols
        self._symbols = [s for s, _ in order]
        self._max_len = order[-1][1] if order else 0
        self._first = {}
        self._count = {}
        self._index = {}
        for i, (sym, n) in enumerate(order):
            if n not in self._first:
                self._first[n] = self.codes[sym][0]
                self._index[n] = i
                self._count[n] = 0
            self._count[n] += 1

    def kraft(self) -> Fraction:
        return sum((Fraction(1, 2**n) for n in self.lengths.values()), Fraction(0))

    def length_list(self, alphabet: int) -> list[int]:
        if self.lengths and max(self.lengths) >= alphabet:
            raise EntropyError("symbol outside alphabet")
        return [self.lengths.get(s, 0) for s in range(alphabet)]

    @classmethod
    def from_length_list(cls, lengths: Sequence[int]) -> "HuffmanTable":
        return cls({s: n for s, n in enumerate(lengths) if n})

    def coded_bits(self, counts: Mapping[int, int]) -> int:
        return sum(self.lengths[s] * c for s, c in counts.items() if c)

    def __eq__(self, other):
        return isinstance(other, HuffmanTable) and self.lengths == other.lengths

    def __repr__(self):
        return f"HuffmanTable({self.lengths})"


def huffman_build(frequencies: Mapping[int, int]) -> HuffmanTable:
    """Optimal code lengths by repeated merging of the two lightest subtrees.

    Ties are broken by (count, smallest symbol in subtree). A lone symbol
    gets length 1.
    """
    items = [(int(c), int(s)) for s, c in frequencies.items() if c > 0]
    if not items:
        raise EntropyError("empty frequency map")
    if len(items) == 1:
        return HuffmanTable({items[0][1]: 1})
    lengths = {s: 0 for _, s in items}
    heap = [(c, s, [s]) for c, s in items]
    heapq.heapify(heap)
    while len(heap) > 1:
        c1, k1, syms1 = heapq.heappop(heap)
        c2, k2, syms2 = heapq.heappop(heap)
        for s in syms1:
            lengths[s] += 1
        for s in syms2:
            lengths[s] += 1
        heapq.heappush(heap, (c1 + c2, min(k1, k2), syms1 + syms2))
    return HuffmanTable(lengths)


def huffman_encode(symbols: Iterable[int], table: HuffmanTable) -> tuple[bytes, int]:
    """Return ``(payload, bit_length)``; the last byte is zero-padded."""
    acc, nbits = 0, 0
    codes = table.codes
    for s in symbols:
        try:
            code, n = codes[int(s)]
        except KeyError:
            raise EntropyError(f"symbol {s} has no code") from None
        acc = (acc << n) | code
        nbits += n
    pad = (-nbits) % 8
    nbytes = (nbits + pad) // 8
    return (acc << pad).to_bytes(nbytes, "big"), nbits


def huffman_decode(payload: bytes, table: HuffmanTable, count: int, bit_length: int | None = None) -> list[int]:
    """Decode exactly ``count`` symbols.

    When ``bit_length`` is given the codes must consume exactly that many
    bits; otherwise they must end within the final byte. Padding bits must
    be zero.
    """
    payload = bytes(payload)
    total = 8 * len(payload)
    if bit_length is None:
        limit = total
    else:
        if (bit_length + 7) // 8 != len(payload):
            raise CorruptStreamError(f"{len(payload)} bytes cannot hold exactly {bit_length} bits")
        limit = bit_length
    value = int.from_bytes(payload, "big")
    pos = 0
    out = []
    first, cnt, index, syms = table._first, table._count, table._index, table._symbols
    for _ in range(count):
        code = 0
        n = 0
        while True:
            if pos >= limit:
                raise CorruptStreamError(f"payload exhausted after {len(out)} of {count} symbols")
            code = (code << 1) | ((value >> (total - 1 - pos)) & 1)
            pos += 1
            n += 1
            if n in first and code - first[n] < cnt[n] and code >= first[n]:
                out.append(syms[index[n] + code - first[n]])
                break
            if n >= table._max_len:
                raise CorruptStreamError(f"invalid code at bit {pos}")
    if bit_length is not None and pos != bit_length:
        raise CorruptStreamError(f"{bit_length - pos} trailing bits after {count} symbols")
    if bit_length is None and total - pos >= 8:
        raise CorruptStreamError("trailing bytes after final symbol")
    if value & ((1 << (total - pos)) - 1):
        raise CorruptStreamError("nonzero padding bits")
    return out
