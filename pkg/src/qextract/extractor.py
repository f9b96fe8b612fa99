"""Block and stream evaluation of the parity extractors.

Two kernels are provided:

* ``ip_extract`` -- the inner product mod 2 of two n-bit blocks, one
  output bit per block pair.
* ``deor_extract`` -- the multi-bit variant: output bit i is
  ``x^T K_i y`` for the matrices of a :class:`~qextract.gf2.MatrixFamily`.

Stream processing works on raw bit files: bytes are interpreted
LSB-first (bit j of the stream is bit ``j mod 8`` of byte ``j div 8``),
blocks are packed back to back with no header or padding between them.
Each processed block emits m output bits, or m + n bits in strong mode
where the y block is appended verbatim after the extractor output.

The stream path is numpy-vectorized and chunked; chunk boundaries are
aligned to multiples of 8 blocks so that worker threads write disjoint,
byte-aligned slices of the output buffer.  Output is therefore
bit-identical regardless of the number of workers.
"""

from __future__ import annotations

import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .gf2 import BitVector, MatrixFamily, matvec_gf2

IP = "IP"
DEOR = "DEOR"


class TruncatedStreamError(ValueError):
    """An input stream ended before the declared block count was read."""

    def __init__(self, which: str, block_index: int, needed_bits: int, have_bits: int):
        self.which = which
        self.block_index = block_index
        super().__init__(
            f"{which} stream truncated in block {block_index}: "
            f"need {needed_bits} bits, have {have_bits}")


@dataclass(frozen=True)
class ExtractorSpec:
    """Extractor selection: kind, block size n and output width m."""

    kind: str
    n: int
    m: int = 1
    family: MatrixFamily | None = None

    def __post_init__(self) -> None:
        if self.kind == IP:
            if self.m != 1:
                raise ValueError("inner product extractor emits exactly one bit")
            if self.family is not None:
                raise ValueError("inner product extractor takes no matrix family")
        elif self.kind == DEOR:
            if self.family is None:
                raise ValueError("matrix family required")
            if self.family.n != self.n or self.family.m != self.m:
                raise ValueError(
                    f"family is {self.family.m} matrices of size {self.family.n}, "
                    f"spec wants n={self.n}, m={self.m}")
        else:
            raise ValueError(f"unknown extractor kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("block size must be positive")

    def apply_ints(self, x: int, y: int) -> int:
        """Evaluate on blocks given as little-endian integers."""
        if self.kind == IP:
            return (x & y).bit_count() & 1
        z = deor_extract(self, BitVector(self.n, x), BitVector(self.n, y))
        return z.bits


@dataclass(frozen=True)
class ExtractionJob:
    spec: ExtractorSpec
    blocks: int
    strong: bool = False

    def __post_init__(self) -> None:
        if self.blocks < 0:
            raise ValueError("block count must be non-negative")

    @property
    def out_bits_per_block(self) -> int:
        return self.spec.m + (self.spec.n if self.strong else 0)


def ip_extract(x: BitVector, y: BitVector) -> int:
    """Inner product of two bit vectors mod 2."""
    if x.n != y.n:
        raise ValueError(f"length mismatch: {x.n} != {y.n}")
    return (x.bits & y.bits).bit_count() & 1


def deor_extract(spec: ExtractorSpec, x: BitVector, y: BitVector) -> BitVector:
    """Multi-bit extraction: bit i of the output is x . (K_i y)."""
    if spec.kind != DEOR:
        raise ValueError("spec does not describe a multi-bit extractor")
    if x.n != spec.n or y.n != spec.n:
        raise ValueError(f"blocks must be {spec.n} bits, got {x.n} and {y.n}")
    bits = 0
    for i, k in enumerate(spec.family.matrices):
        bits |= ip_extract(x, matvec_gf2(k, y)) << i
    return BitVector(spec.m, bits)


def deor_extract_circulant(spec: ExtractorSpec, x: BitVector, y: BitVector) -> BitVector:
    """Shift-family fast path: the output is a prefix of the cyclic
    cross-correlation of x and y, reduced mod 2.

    With K_i the (i-1)-th power of the cyclic shift, output bit i equals
    sum_k x_k y_(k+i mod n), so all m bits come out of one FFT-sized
    correlation.  Counts stay below 2^53, so rounding the float
    transform is exact and this agrees bit for bit with the
    matrix-product path (which remains the oracle).
    """
    if spec.kind != DEOR or spec.family.construction != "circulant":
        raise ValueError("fast path requires a circulant family")
    if x.n != spec.n or y.n != spec.n:
        raise ValueError(f"blocks must be {spec.n} bits, got {x.n} and {y.n}")
    xa = np.array(x.to_list(), dtype=float)
    ya = np.array(y.to_list(), dtype=float)
    corr = np.fft.irfft(np.conj(np.fft.rfft(xa)) * np.fft.rfft(ya), n=spec.n)
    counts = np.rint(corr).astype(np.int64) & 1
    bits = 0
    for i in range(spec.m):
        bits |= int(counts[i]) << i
    return BitVector(spec.m, bits)


# ---------------------------------------------------------------------------
# Stream kernels

_PARITY8 = np.array([bin(v).count("1") & 1 for v in range(256)], dtype=np.uint8)


def _unpack_block_bits(data: bytes, start_block: int, count: int, n: int) -> np.ndarray:
    """Bits of blocks [start, start+count) as a (count, n) uint8 array."""
    bit_lo = start_block * n
    bit_hi = bit_lo + count * n
    byte_lo, byte_hi = bit_lo // 8, (bit_hi + 7) // 8
    raw = np.frombuffer(data, dtype=np.uint8, count=byte_hi - byte_lo, offset=byte_lo)
    bits = np.unpackbits(raw, bitorder="little")
    lo = bit_lo - 8 * byte_lo
    return bits[lo:lo + count * n].reshape(count, n)


def _ip_chunk_bytewise(x: bytes, y: bytes, start: int, count: int, n: int) -> np.ndarray:
    """Output bits for an IP chunk with byte-aligned blocks (n % 8 == 0)."""
    nbytes = n // 8
    off = start * nbytes
    xa = np.frombuffer(x, dtype=np.uint8, count=count * nbytes, offset=off)
    ya = np.frombuffer(y, dtype=np.uint8, count=count * nbytes, offset=off)
    folded = np.bitwise_xor.reduce((xa & ya).reshape(count, nbytes), axis=1)
    return _PARITY8[folded]


def _extract_chunk(job: ExtractionJob, x: bytes, y: bytes, start: int, count: int) -> bytes:
    spec = job.spec
    n, m = spec.n, spec.m
    if spec.kind == IP and n % 8 == 0 and not job.strong:
        out_bits = _ip_chunk_bytewise(x, y, start, count, n)
        return np.packbits(out_bits, bitorder="little").tobytes()

    xb = _unpack_block_bits(x, start, count, n)
    yb = _unpack_block_bits(y, start, count, n)
    if spec.kind == IP:
        z = np.bitwise_xor.reduce(xb & yb, axis=1)[:, None]
    else:
        cols = []
        for k in spec.family.matrices:
            kd = np.array(k.to_lists(), dtype=np.uint8)
            v = (yb @ kd.T) & 1  # v[b] = K_i y_b
            cols.append(np.bitwise_xor.reduce(xb & v, axis=1))
        z = np.stack(cols, axis=1)
    out = np.concatenate([z, yb], axis=1) if job.strong else z
    return np.packbits(out.reshape(-1), bitorder="little").tobytes()


def _check_stream(which: str, data: bytes, blocks: int, n: int) -> None:
    have_bits = 8 * len(data)
    need_bits = blocks * n
    if have_bits < need_bits:
        raise TruncatedStreamError(which, have_bits // n, need_bits, have_bits)


def extract_blocks(job: ExtractionJob, x: bytes, y: bytes, workers: int = 1) -> bytes:
    """Run the extractor over all blocks of two bit streams.

    Deterministic: the result is bit-identical for any worker count.
    """
    _check_stream("x", x, job.blocks, job.spec.n)
    _check_stream("y", y, job.blocks, job.spec.n)
    if job.blocks == 0:
        return b""
    out_bits = job.out_bits_per_block

    # chunks of whole multiples of 8 blocks keep input/output byte-aligned
    chunk = max(8, 8 * ((job.blocks // max(1, 8 * workers)) or 1))
    starts = list(range(0, job.blocks, chunk))
    pieces: list[bytes | None] = [None] * len(starts)

    def run(i: int) -> None:
        start = starts[i]
        count = min(chunk, job.blocks - start)
        pieces[i] = _extract_chunk(job, x, y, start, count)

    if workers <= 1 or len(starts) == 1:
        for i in range(len(starts)):
            run(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(len(starts))))

    if len(pieces) == 1:
        return pieces[0]
    # all chunks except the last cover a multiple of 8 blocks, so each piece
    # except the last is a whole number of bytes of output with no slack
    total_bits = job.blocks * out_bits
    buf = bytearray()
    for piece in pieces:
        buf.extend(piece)
    return bytes(buf[: (total_bits + 7) // 8])


def extract_file(job: ExtractionJob, x_path: str, y_path: str, out_path: str,
                 workers: int = 1) -> int:
    """File-to-file extraction with an atomic output write.

    Returns the number of output bytes written.
    """
    with open(x_path, "rb") as f:
        x = f.read()
    with open(y_path, "rb") as f:
        y = f.read()
    out = extract_blocks(job, x, y, workers=workers)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(out_path)) or ".",
                               prefix=".qextract-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(out)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return len(out)
