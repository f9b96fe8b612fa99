import numpy as np
import pytest

from qextract.extractor import (
    DEOR,
    IP,
    ExtractionJob,
    ExtractorSpec,
    TruncatedStreamError,
    deor_extract,
    extract_blocks,
    extract_file,
    ip_extract,
)
from qextract.gf2 import (
    BitMatrix,
    BitVector,
    MatrixFamily,
    build_circulant_family,
    build_field_family,
)


def naive_deor_bit(k_lists, x_bits, y_bits):
    """Triple-loop oracle for one output bit x^T K y over GF(2)."""
    acc = 0
    for i, row in enumerate(k_lists):
        for j, kij in enumerate(row):
            acc ^= x_bits[i] & kij & y_bits[j]
    return acc


def identity_family(n):
    return MatrixFamily(n, 1, 0, "explicit", (BitMatrix.identity(n),))


class TestIpExtract:
    def test_zero_vector(self):
        assert ip_extract(BitVector.from_bits([0, 0, 0, 0]),
                          BitVector.from_bits([1, 1, 1, 1])) == 0

    def test_single_overlap(self):
        assert ip_extract(BitVector.from_bits([1, 1, 0, 0]),
                          BitVector.from_bits([0, 1, 1, 0])) == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            ip_extract(BitVector(3, 0), BitVector(4, 0))

    def test_disjoint_halves_always_zero(self):
        # x supported on the low half, y on the high half
        n = 4
        for xl in range(4):
            for yh in range(4):
                x = BitVector(n, xl)
                y = BitVector(n, yh << 2)
                assert ip_extract(x, y) == 0

    def test_linearity(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            a, b, y = (BitVector(n, int(rng.integers(0, 1 << n))) for _ in range(3))
            assert ip_extract(a ^ b, y) == ip_extract(a, y) ^ ip_extract(b, y)


class TestDeorExtract:
    def test_identity_family_reduces_to_ip(self):
        spec = ExtractorSpec(DEOR, 3, 1, identity_family(3))
        for x in range(8):
            for y in range(8):
                xv, yv = BitVector(3, x), BitVector(3, y)
                assert deor_extract(spec, xv, yv).bits == ip_extract(xv, yv)

    def test_against_triple_loop_oracle(self):
        fam = build_circulant_family(3, 2)
        spec = ExtractorSpec(DEOR, 3, 2, fam)
        k_lists = [k.to_lists() for k in fam.matrices]
        for x in range(8):
            for y in range(8):
                xv, yv = BitVector(3, x), BitVector(3, y)
                out = deor_extract(spec, xv, yv)
                for i, kl in enumerate(k_lists):
                    assert out[i] == naive_deor_bit(kl, xv.to_list(), yv.to_list())

    def test_specific_block(self):
        fam = build_circulant_family(3, 2)
        spec = ExtractorSpec(DEOR, 3, 2, fam)
        x = BitVector.from_bits([1, 0, 1])
        y = BitVector.from_bits([1, 1, 0])
        k_lists = [k.to_lists() for k in fam.matrices]
        expected = [naive_deor_bit(kl, x.to_list(), y.to_list()) for kl in k_lists]
        assert deor_extract(spec, x, y).to_list() == expected

    @pytest.mark.parametrize("fam", [build_field_family(4, 3),
                                     build_field_family(8, 8),
                                     build_circulant_family(5, 4)])
    def test_parity_consistency_with_span(self, fam):
        # s . DEOR(x, y) must equal IP(K_s^T x, y) for every nonzero s
        from qextract.gf2 import matvec_gf2

        spec = ExtractorSpec(DEOR, fam.n, fam.m, fam)
        rng = np.random.default_rng(1)
        for _ in range(25):
            x = BitVector(fam.n, int(rng.integers(0, 1 << fam.n)))
            y = BitVector(fam.n, int(rng.integers(0, 1 << fam.n)))
            z = deor_extract(spec, x, y)
            for s in range(1, 1 << fam.m):
                parity = (s & z.bits).bit_count() & 1
                ks_t = fam.span(s).transpose()
                assert parity == ip_extract(matvec_gf2(ks_t, x), y)

    @pytest.mark.parametrize("n,m", [(3, 2), (5, 4), (11, 8), (13, 12)])
    def test_circulant_correlation_path_bit_exact(self, n, m):
        from qextract.extractor import deor_extract_circulant

        spec = ExtractorSpec(DEOR, n, m, build_circulant_family(n, m))
        rng = np.random.default_rng(n * 100 + m)
        for _ in range(200):
            x = BitVector(n, int(rng.integers(0, 1 << n)))
            y = BitVector(n, int(rng.integers(0, 1 << n)))
            assert deor_extract_circulant(spec, x, y) == deor_extract(spec, x, y)

    def test_circulant_path_rejects_other_families(self):
        from qextract.extractor import deor_extract_circulant

        spec = ExtractorSpec(DEOR, 3, 2, build_field_family(3, 2))
        with pytest.raises(ValueError, match="circulant"):
            deor_extract_circulant(spec, BitVector(3, 0), BitVector(3, 0))

    def test_spec_validation(self):
        with pytest.raises(ValueError, match="family required"):
            ExtractorSpec(DEOR, 3, 2)
        with pytest.raises(ValueError, match="exactly one bit"):
            ExtractorSpec(IP, 3, 2)
        with pytest.raises(ValueError, match="spec wants"):
            ExtractorSpec(DEOR, 4, 2, build_circulant_family(3, 2))
        with pytest.raises(ValueError, match="unknown extractor kind"):
            ExtractorSpec("XOR", 3)


def pack_bits(bits):
    return np.packbits(np.array(bits, dtype=np.uint8), bitorder="little").tobytes()


def unpack_bits(data, count):
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8),
                         bitorder="little")[:count].tolist()


class TestExtractStream:
    def test_zero_blocks(self):
        job = ExtractionJob(ExtractorSpec(IP, 8), 0)
        assert extract_blocks(job, b"", b"") == b""

    def test_single_bit_block(self):
        job = ExtractionJob(ExtractorSpec(IP, 1), 1)
        assert extract_blocks(job, b"\x01", b"\x01") == b"\x01"

    def test_truncated_reports_block_index(self):
        job = ExtractionJob(ExtractorSpec(IP, 8), 9)
        with pytest.raises(TruncatedStreamError) as exc:
            extract_blocks(job, b"\x00" * 3, b"\x00" * 9)
        assert exc.value.which == "x"
        assert exc.value.block_index == 3

    @pytest.mark.parametrize("n", [1, 3, 8, 13, 64, 1024])
    def test_matches_scalar_oracle(self, n):
        rng = np.random.default_rng(n)
        blocks = 40
        nbytes = (blocks * n + 7) // 8
        x = rng.bytes(nbytes)
        y = rng.bytes(nbytes)
        job = ExtractionJob(ExtractorSpec(IP, n), blocks)
        out = unpack_bits(extract_blocks(job, x, y), blocks)
        xb = unpack_bits(x, blocks * n)
        yb = unpack_bits(y, blocks * n)
        for b in range(blocks):
            xv = BitVector.from_bits(xb[b * n:(b + 1) * n])
            yv = BitVector.from_bits(yb[b * n:(b + 1) * n])
            assert out[b] == ip_extract(xv, yv)

    def test_deor_stream_matches_blockwise(self):
        fam = build_circulant_family(5, 3)
        spec = ExtractorSpec(DEOR, 5, 3, fam)
        rng = np.random.default_rng(9)
        blocks = 60
        nbytes = (blocks * 5 + 7) // 8
        x, y = rng.bytes(nbytes), rng.bytes(nbytes)
        job = ExtractionJob(spec, blocks)
        out = unpack_bits(extract_blocks(job, x, y), blocks * 3)
        xb, yb = unpack_bits(x, blocks * 5), unpack_bits(y, blocks * 5)
        for b in range(blocks):
            xv = BitVector.from_bits(xb[b * 5:(b + 1) * 5])
            yv = BitVector.from_bits(yb[b * 5:(b + 1) * 5])
            assert out[b * 3:(b + 1) * 3] == deor_extract(spec, xv, yv).to_list()

    def test_strong_mode_layout(self):
        # each output block is the extractor bits followed by y verbatim
        n = 5
        job = ExtractionJob(ExtractorSpec(IP, n), 7, strong=True)
        assert job.out_bits_per_block == n + 1
        rng = np.random.default_rng(4)
        nbytes = (7 * n + 7) // 8
        x, y = rng.bytes(nbytes), rng.bytes(nbytes)
        out = unpack_bits(extract_blocks(job, x, y), 7 * (n + 1))
        xb, yb = unpack_bits(x, 7 * n), unpack_bits(y, 7 * n)
        for b in range(7):
            block = out[b * (n + 1):(b + 1) * (n + 1)]
            yblk = yb[b * n:(b + 1) * n]
            assert block[0] == ip_extract(BitVector.from_bits(xb[b * n:(b + 1) * n]),
                                          BitVector.from_bits(yblk))
            assert block[1:] == yblk

    def test_worker_determinism(self):
        rng = np.random.default_rng(2)
        blocks = 10_000
        x, y = rng.bytes(blocks * 4), rng.bytes(blocks * 4)
        job = ExtractionJob(ExtractorSpec(IP, 32), blocks)
        single = extract_blocks(job, x, y, workers=1)
        assert extract_blocks(job, x, y, workers=4) == single
        assert extract_blocks(job, x, y, workers=7) == single

    def test_golden_three_blocks(self):
        x = bytes([0b10110001, 0xFF, 0x00])
        y = bytes([0b10010001, 0x0F, 0xAA])
        job = ExtractionJob(ExtractorSpec(IP, 8), 3)
        # parities of 0x91&0xb1=0x91 (3 ones), 0x0f (4), 0x00 (0)
        assert extract_blocks(job, x, y) == bytes([0b001])

    def test_file_round_trip(self, tmp_path):
        xp, yp, op = tmp_path / "x", tmp_path / "y", tmp_path / "z"
        xp.write_bytes(b"\xff\x00\x12")
        yp.write_bytes(b"\x0f\xf0\x34")
        job = ExtractionJob(ExtractorSpec(IP, 8), 3)
        written = extract_file(job, str(xp), str(yp), str(op))
        assert written == 1
        assert op.read_bytes() == extract_blocks(job, b"\xff\x00\x12", b"\x0f\xf0\x34")

    def test_file_error_leaves_no_output(self, tmp_path):
        xp, yp, op = tmp_path / "x", tmp_path / "y", tmp_path / "z"
        xp.write_bytes(b"\xff")
        yp.write_bytes(b"\x0f")
        job = ExtractionJob(ExtractorSpec(IP, 8), 5)
        with pytest.raises(TruncatedStreamError):
            extract_file(job, str(xp), str(yp), str(op))
        assert not op.exists()
        assert not list(tmp_path.glob(".qextract-*"))
