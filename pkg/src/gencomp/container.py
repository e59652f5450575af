"""Binary container formats.

NC01  one quantized image latent
MC01  a keyframe latent sequence, optionally Huffman-coded deltas
NB01  a model bundle: key=value metadata plus float32 tensors

All multi-byte integers are little-endian.

NC01 layout::

    "NC01" | M u16 | b u8 | height u16 | width u16 | channels u8 | model hash 8B
    | payload ceil(M*b/8) bytes

MC01 layout::

    "MC01" | M u16 | b u8 | stride u8 | keyframes K u32 | frames F u32
    | flags u8 | height u16 | width u16 | channels u8 | model hash 8B
    | body

The body starts with the code-length block when flag bit 0 (Huffman) is set
and K > 1:
one u8 length per delta symbol, 2**(b+1) - 1 entries, ordered from
delta -(2**b - 1) up to +(2**b - 1). Then the base keyframe packed raw
(ceil(M*b/8) bytes), then K-1 records, each ``bitlen u16`` followed by
ceil(bitlen/8) bytes. With Huffman off, a record is the keyframe packed
raw (bitlen = M*b); with Huffman on it is the canonical Huffman code of the
keyframe's symbol deltas against the previous keyframe.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import entropy
from .latent_codec import QuantizedLatent, QuantSpec, pack, packed_size, unpack

NC_MAGIC = b"NC01"
MC_MAGIC = b"MC01"
NB_MAGIC = b"NB01"
NB_VERSION = 1

_NC_HEADER = struct.Struct("<4sHBHHB8s")
_MC_HEADER = struct.Struct("<4sHBBIIBHHB8s")
NC_HEADER_SIZE = _NC_HEADER.size
MC_HEADER_SIZE = _MC_HEADER.size

FLAG_HUFFMAN = 0x01


class ContainerError(ValueError):
    pass


class MagicError(ContainerError):
    pass


class TruncatedError(ContainerError):
    pass


class HashMismatchError(ContainerError):
    pass


# --------------------------------------------------------------------------
# hashing

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


# --------------------------------------------------------------------------
# NC01


@dataclass
class NcBitstream:
    latent: QuantizedLatent
    height: int
    width: int
    channels: int
    model_hash: bytes = b"\x00" * 8

    @property
    def spec(self) -> QuantSpec:
        return self.latent.spec

    def __eq__(self, other):
        return (
            isinstance(other, NcBitstream)
            and self.latent == other.latent
            and (self.height, self.width, self.channels, self.model_hash)
            == (other.height, other.width, other.channels, other.model_hash)
        )


def _check_hash(h: bytes) -> bytes:
    if not isinstance(h, (bytes, bytearray)) or len(h) != 8:
        raise ContainerError("model hash must be 8 bytes")
    return bytes(h)


def encode_nc(stream: NcBitstream) -> bytes:
    spec = stream.spec
    header = _NC_HEADER.pack(
        NC_MAGIC,
        spec.latent_dim,
        spec.bits,
        stream.height,
        stream.width,
        stream.channels,
        _check_hash(stream.model_hash),
    )
    return header + pack(stream.latent)


def decode_nc(data: bytes) -> NcBitstream:
    data = bytes(data)
    if data[:4] != NC_MAGIC:
        raise MagicError(f"bad magic {data[:4]!r}, expected {NC_MAGIC!r}")
    if len(data) < NC_HEADER_SIZE:
        raise TruncatedError("NC01 header truncated")
    _, m, b, h, w, c, mh = _NC_HEADER.unpack_from(data)
    try:
        spec = QuantSpec(b, m)
    except ValueError as exc:
        raise ContainerError(str(exc)) from None
    need = NC_HEADER_SIZE + packed_size(spec)
    if len(data) < need:
        raise TruncatedError(f"NC01 payload truncated: {len(data)} < {need} bytes")
    if len(data) > need:
        raise ContainerError(f"NC01 has {len(data) - need} trailing bytes")
    if h == 0 or w == 0 or c == 0:
        raise ContainerError("NC01 image dimensions must be positive")
    return NcBitstream(unpack(data[NC_HEADER_SIZE:], spec), h, w, c, mh)


def write_nc(path, stream: NcBitstream) -> None:
    Path(path).write_bytes(encode_nc(stream))


def read_nc(path) -> NcBitstream:
    return decode_nc(Path(path).read_bytes())


# --------------------------------------------------------------------------
# MC01


@dataclass
class McBitstream:
    """Keyframe symbols plus the parameters needed to rebuild the video."""

    keyframes: list  # list[QuantizedLatent], all sharing one spec
    stride: int
    frame_count: int
    huffman: bool
    height: int
    width: int
    channels: int
    model_hash: bytes = b"\x00" * 8

    @property
    def spec(self) -> QuantSpec:
        return self.keyframes[0].spec

    def __post_init__(self):
        if not self.keyframes:
            raise ContainerError("MC01 needs at least one keyframe")
        if not 1 <= self.stride <= 255:
            raise ContainerError("stride must be in [1, 255]")
        expected = (len(self.keyframes) - 1) * self.stride + 1
        if self.frame_count != expected:
            raise ContainerError(
                f"frame count {self.frame_count} != (K-1)*N+1 = {expected}"
            )

    def __eq__(self, other):
        return isinstance(other, McBitstream) and (
            self.keyframes,
            self.stride,
            self.frame_count,
            self.huffman,
            self.height,
            self.width,
            self.channels,
            self.model_hash,
        ) == (
            other.keyframes,
            other.stride,
            other.frame_count,
            other.huffman,
            other.height,
            other.width,
            other.channels,
            other.model_hash,
        )


def _delta_alphabet(spec: QuantSpec) -> int:
    return 2 * spec.levels - 1


def _mc_body(stream: McBitstream) -> tuple[bytes, int]:
    """Body bytes and the body bit count (record padding excluded)."""
    spec = stream.spec
    out = bytearray()
    bits = spec.latent_dim * spec.bits
    if stream.huffman and len(stream.keyframes) > 1:
        ds = entropy.delta_encode(stream.keyframes)
        offset = spec.levels - 1
        flat = [int(v) + offset for d in ds.deltas for v in d]
        alphabet = _delta_alphabet(spec)
        if flat:
            freq = np.bincount(flat, minlength=alphabet)
            table = entropy.huffman_build({s: int(c) for s, c in enumerate(freq) if c})
        else:
            table = entropy.HuffmanTable({})
        out += bytes(table.length_list(alphabet))
        bits += 8 * alphabet
        out += pack(ds.base)
        for d in ds.deltas:
            payload, nbits = entropy.huffman_encode([int(v) + offset for v in d], table)
            if nbits > 0xFFFF:
                raise ContainerError("delta record exceeds 65535 bits")
            out += struct.pack("<H", nbits) + payload
            bits += 16 + nbits
    else:
        out += pack(stream.keyframes[0])
        nbits = spec.latent_dim * spec.bits
        if nbits > 0xFFFF:
            raise ContainerError("keyframe record exceeds 65535 bits")
        for q in stream.keyframes[1:]:
            out += struct.pack("<H", nbits) + pack(q)
            bits += 16 + nbits
    return bytes(out), bits


def encode_mc(stream: McBitstream) -> bytes:
    spec = stream.spec
    if any(q.spec != spec for q in stream.keyframes):
        raise ContainerError("keyframes have mixed quantization specs")
    header = _MC_HEADER.pack(
        MC_MAGIC,
        spec.latent_dim,
        spec.bits,
        stream.stride,
        len(stream.keyframes),
        stream.frame_count,
        FLAG_HUFFMAN if stream.huffman else 0,
        stream.height,
        stream.width,
        stream.channels,
        _check_hash(stream.model_hash),
    )
    return header + _mc_body(stream)[0]


class _Reader:
    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(f"MC01 truncated at byte {self.pos} (need {n} more)")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def decode_mc(data: bytes) -> McBitstream:
    data = bytes(data)
    if data[:4] != MC_MAGIC:
        raise MagicError(f"bad magic {data[:4]!r}, expected {MC_MAGIC!r}")
    if len(data) < MC_HEADER_SIZE:
        raise TruncatedError("MC01 header truncated")
    _, m, b, n, k, f, flags, h, w, c, mh = _MC_HEADER.unpack_from(data)
    try:
        spec = QuantSpec(b, m)
    except ValueError as exc:
        raise ContainerError(str(exc)) from None
    if k < 1 or n < 1:
        raise ContainerError("MC01 needs K >= 1 and N >= 1")
    if f != (k - 1) * n + 1:
        raise ContainerError(f"frame count {f} != (K-1)*N+1")
    if flags & ~FLAG_HUFFMAN:
        raise ContainerError(f"unknown MC01 flags {flags:#x}")
    huff = bool(flags & FLAG_HUFFMAN)
    r = _Reader(data, MC_HEADER_SIZE)
    raw = packed_size(spec)
    if huff and k > 1:
        alphabet = _delta_alphabet(spec)
        lengths = list(r.take(alphabet))
        table = entropy.HuffmanTable.from_length_list(lengths)
        base = unpack(r.take(raw), spec)
        offset = spec.levels - 1
        deltas = []
        for _ in range(k - 1):
            (nbits,) = struct.unpack("<H", r.take(2))
            payload = r.take((nbits + 7) // 8)
            syms = entropy.huffman_decode(payload, table, m, nbits)
            deltas.append(np.asarray(syms, dtype=np.int64) - offset)
        keyframes = entropy.delta_decode(entropy.DeltaStream(spec, base, deltas))
    else:
        keyframes = [unpack(r.take(raw), spec)]
        for _ in range(k - 1):
            (nbits,) = struct.unpack("<H", r.take(2))
            if nbits != m * b:
                raise ContainerError(f"raw keyframe record has {nbits} bits, expected {m * b}")
            keyframes.append(unpack(r.take(raw), spec))
    if r.pos != len(data):
        raise ContainerError(f"MC01 has {len(data) - r.pos} trailing bytes")
    return McBitstream(keyframes, n, f, huff, h, w, c, mh)


def write_mc(path, stream: McBitstream) -> None:
    Path(path).write_bytes(encode_mc(stream))


def read_mc(path) -> McBitstream:
    return decode_mc(Path(path).read_bytes())


# --------------------------------------------------------------------------
# size accounting


def compressed_size_bits(stream) -> int:
    """Payload bits excluding the fixed header.

    NC01: M*b. MC01: the base keyframe's M*b, plus 16 + record bits per
    record, plus the code-length block when present. Byte padding is
    excluded in both.
    """
    if isinstance(stream, NcBitstream):
        return stream.spec.latent_dim * stream.spec.bits
    if isinstance(stream, McBitstream):
        return _mc_body(stream)[1]
    raise TypeError(f"unsupported stream type {type(stream).__name__}")


def payload_span(data: bytes) -> tuple[int, int]:
    """Byte range of the payload/body of an NC01 or MC01 file."""
    magic = bytes(data[:4])
    if magic == NC_MAGIC:
        return NC_HEADER_SIZE, len(data)
    if magic == MC_MAGIC:
        return MC_HEADER_SIZE, len(data)
    raise MagicError(f"bad magic {magic!r}")


# --------------------------------------------------------------------------
# NB01


@dataclass
class NbDocument:
    """Decoded NB01 contents: ordered metadata and ordered named tensors."""

    metadata: dict = field(default_factory=dict)
    tensors: list = field(default_factory=list)  # list[(name, np.ndarray)]
    hash: int = 0


def encode_nb(metadata: dict, tensors) -> bytes:
    """Serialize metadata and ``(name, array)`` pairs, appending an FNV-1a 64 hash."""
    lines = []
    for key, value in metadata.items():
        key, value = str(key), str(value)
        if "=" in key or "\n" in key or "\n" in value:
            raise ContainerError(f"metadata entry {key!r} contains '=' or newline")
        lines.append(f"{key}={value}\n")
    meta = "".join(lines).encode("utf-8")
    out = bytearray(NB_MAGIC)
    out += struct.pack("<HI", NB_VERSION, len(meta)) + meta
    tensors = list(tensors)
    out += struct.pack("<I", len(tensors))
    for name, arr in tensors:
        arr = np.asarray(arr)
        nb = name.encode("utf-8")
        out += struct.pack("<H", len(nb)) + nb
        out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.astype("<f4").tobytes()
    out += struct.pack("<Q", fnv1a64(bytes(out)))
    return bytes(out)


def decode_nb(data: bytes) -> NbDocument:
    data = bytes(data)
    if data[:4] != NB_MAGIC:
        raise MagicError(f"bad magic {data[:4]!r}, expected {NB_MAGIC!r}")
    if len(data) < 4 + 6 + 4 + 8:
        raise TruncatedError("NB01 truncated")
    (stored,) = struct.unpack_from("<Q", data, len(data) - 8)
    actual = fnv1a64(data[:-8])
    if stored != actual:
        raise HashMismatchError(f"NB01 hash {stored:016x} != computed {actual:016x}")
    r = _Reader(data[:-8], 4)
    version, meta_len = struct.unpack("<HI", r.take(6))
    if version != NB_VERSION:
        raise ContainerError(f"unsupported NB01 version {version}")
    metadata = {}
    for line in r.take(meta_len).decode("utf-8").splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise ContainerError(f"bad metadata line {line!r}")
        metadata[key] = value
    (count,) = struct.unpack("<I", r.take(4))
    tensors = []
    for _ in range(count):
        (nlen,) = struct.unpack("<H", r.take(2))
        name = r.take(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<B", r.take(1))
        shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        size = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(shape)
        tensors.append((name, arr.astype(np.float32)))
    if r.pos != len(r.data):
        raise ContainerError("NB01 has trailing bytes before hash")
    return NbDocument(metadata, tensors, stored)


def write_bundle(path, bundle) -> None:
    Path(path).write_bytes(bundle.to_bytes())


def read_bundle(path):
    from .models import ModelBundle

    return ModelBundle.from_bytes(Path(path).read_bytes())


def read_any(data: bytes):
    """Parse any of the three formats by magic."""
    magic = bytes(data[:4])
    if magic == NC_MAGIC:
        return decode_nc(data)
    if magic == MC_MAGIC:
        return decode_mc(data)
    if magic == NB_MAGIC:
        return decode_nb(data)
    raise MagicError(f"unknown magic {magic!r}")
