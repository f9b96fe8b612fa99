"""GF(2) linear algebra on packed bit vectors.

Vectors and matrix rows are stored as Python integers interpreted as
little-endian bit masks: bit j of a vector is ``(bits >> j) & 1``.  All
public contracts are expressed in bits; the word-level packing is an
implementation detail of the integer type.

Besides plain vector/matrix arithmetic, this module builds the matrix
families used by the multi-bit parity extractor: collections
``K_1, ..., K_m`` of n x n matrices such that every nonzero GF(2)
combination ``sum_i s_i K_i`` has rank at least ``n - r``.  Two
constructions are provided:

* ``build_field_family`` -- multiplication operators by powers of a
  generator of GF(2^n), giving a certified rank deficiency r = 0.
* ``build_circulant_family`` -- powers of the cyclic shift, giving r = 1
  whenever n is a prime with 2 as a primitive root.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class FamilyConstructionError(ValueError):
    """Raised when a matrix family cannot be built for the given (n, m)."""


def _check_bits(n: int, bits: int) -> None:
    if n < 0:
        raise ValueError(f"bit length must be non-negative, got {n}")
    if bits < 0 or bits >> n:
        raise ValueError(f"bit pattern 0x{bits:x} does not fit in {n} bits")


@dataclass(frozen=True)
class BitVector:
    """Bit vector of fixed length with little-endian integer storage."""

    n: int
    bits: int = 0

    def __post_init__(self) -> None:
        _check_bits(self.n, self.bits)

    @classmethod
    def from_bits(cls, seq) -> "BitVector":
        bits = 0
        seq = list(seq)
        for j, b in enumerate(seq):
            if b:
                bits |= 1 << j
        return cls(len(seq), bits)

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self.n:
            raise IndexError(j)
        return (self.bits >> j) & 1

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} != {other.n}")
        return BitVector(self.n, self.bits ^ other.bits)

    def parity(self) -> int:
        return self.bits.bit_count() & 1

    def to_list(self) -> list[int]:
        return [(self.bits >> j) & 1 for j in range(self.n)]

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.to_list())


@dataclass(frozen=True)
class BitMatrix:
    """Dense matrix over GF(2); rows stored as little-endian bit masks."""

    rows: int
    cols: int
    row_bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.row_bits) != self.rows:
            raise ValueError("row count does not match storage")
        for r in self.row_bits:
            _check_bits(self.cols, r)

    @classmethod
    def zero(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, (0,) * rows)

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(n, n, tuple(1 << j for j in range(n)))

    @classmethod
    def from_rows(cls, rows) -> "BitMatrix":
        vecs = [r if isinstance(r, BitVector) else BitVector.from_bits(r) for r in rows]
        if not vecs:
            raise ValueError("matrix needs at least one row")
        cols = vecs[0].n
        if any(v.n != cols for v in vecs):
            raise ValueError("all rows must have identical length")
        return cls(len(vecs), cols, tuple(v.bits for v in vecs))

    def __getitem__(self, idx: tuple[int, int]) -> int:
        i, j = idx
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(idx)
        return (self.row_bits[i] >> j) & 1

    def __xor__(self, other: "BitMatrix") -> "BitMatrix":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")
        return BitMatrix(self.rows, self.cols,
                         tuple(a ^ b for a, b in zip(self.row_bits, other.row_bits)))

    def transpose(self) -> "BitMatrix":
        cols = []
        for j in range(self.cols):
            bits = 0
            for i in range(self.rows):
                bits |= ((self.row_bits[i] >> j) & 1) << i
            cols.append(bits)
        return BitMatrix(self.cols, self.rows, tuple(cols))

    def row(self, i: int) -> BitVector:
        return BitVector(self.cols, self.row_bits[i])

    def to_lists(self) -> list[list[int]]:
        return [[(r >> j) & 1 for j in range(self.cols)] for r in self.row_bits]


def rank_gf2(m: BitMatrix) -> int:
    """GF(2) rank via Gaussian elimination on a copy; input is not modified."""
    work = list(m.row_bits)
    rank = 0
    for col in range(m.cols):
        pivot = None
        for r in range(rank, len(work)):
            if (work[r] >> col) & 1:
                pivot = r
                break
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        for r in range(len(work)):
            if r != rank and ((work[r] >> col) & 1):
                work[r] ^= work[rank]
        rank += 1
        if rank == len(work):
            break
    return rank


def matvec_gf2(m: BitMatrix, v: BitVector) -> BitVector:
    """Matrix-vector product over GF(2): word-AND plus parity per row."""
    if m.cols != v.n:
        raise ValueError(f"dimension mismatch: matrix has {m.cols} columns, vector {v.n} bits")
    bits = 0
    for i, row in enumerate(m.row_bits):
        bits |= ((row & v.bits).bit_count() & 1) << i
    return BitVector(m.rows, bits)


# ---------------------------------------------------------------------------
# Polynomials over GF(2)


@dataclass(frozen=True)
class Gf2Poly:
    """Polynomial over GF(2), coefficients as a little-endian bit mask.

    The leading coefficient of a nonzero polynomial is automatically 1.
    """

    bits: int

    def __post_init__(self) -> None:
        if self.bits < 0:
            raise ValueError("negative coefficient mask")

    @property
    def degree(self) -> int:
        """Degree of the polynomial; -1 for the zero polynomial."""
        return self.bits.bit_length() - 1

    def is_zero(self) -> bool:
        return self.bits == 0

    def __add__(self, other: "Gf2Poly") -> "Gf2Poly":
        return Gf2Poly(self.bits ^ other.bits)

    __sub__ = __add__

    def __mul__(self, other: "Gf2Poly") -> "Gf2Poly":
        a, b, r = self.bits, other.bits, 0
        while b:
            if b & 1:
                r ^= a
            a <<= 1
            b >>= 1
        return Gf2Poly(r)

    def __mod__(self, other: "Gf2Poly") -> "Gf2Poly":
        if other.bits == 0:
            raise ZeroDivisionError("polynomial modulo zero")
        a, m = self.bits, other.bits
        dm = m.bit_length()
        while a.bit_length() >= dm:
            a ^= m << (a.bit_length() - dm)
        return Gf2Poly(a)

    def __str__(self) -> str:
        if self.bits == 0:
            return "0"
        terms = []
        for e in range(self.degree, -1, -1):
            if (self.bits >> e) & 1:
                terms.append("1" if e == 0 else ("x" if e == 1 else f"x^{e}"))
        return " + ".join(terms)


def gf2poly_gcd(a: Gf2Poly, b: Gf2Poly) -> Gf2Poly:
    """Euclidean gcd of two GF(2) polynomials."""
    while not b.is_zero():
        a, b = b, a % b
    return a


def _poly_mulmod(a: int, b: int, mod: int, n: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if (a >> n) & 1:
            a ^= mod
    return r


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def irreducible(p: Gf2Poly) -> bool:
    """Rabin irreducibility test over GF(2)."""
    n = p.degree
    if n <= 0:
        return False
    if n == 1:
        return True
    if not p.bits & 1:
        return False  # divisible by x

    def x_pow_pow2(k: int) -> int:
        r = 0b10
        for _ in range(k):
            r = _poly_mulmod(r, r, p.bits, n)
        return r

    if x_pow_pow2(n) != 0b10:
        return False
    for q in _prime_factors(n):
        h = Gf2Poly(x_pow_pow2(n // q) ^ 0b10)
        if gf2poly_gcd(p, h).degree != 0:
            return False
    return True


# Lowest-weight irreducible polynomial of each degree (smallest trinomial,
# else smallest pentanomial), little-endian coefficient masks.
IRREDUCIBLE_POLY: dict[int, int] = {
    1: 0x3, 2: 0x7, 3: 0xb, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x83,
    8: 0x11b, 9: 0x203, 10: 0x409, 11: 0x805, 12: 0x1009, 13: 0x201b,
    14: 0x4021, 15: 0x8003, 16: 0x1002b, 17: 0x20009, 18: 0x40009,
    19: 0x80027, 20: 0x100009, 21: 0x200005, 22: 0x400003, 23: 0x800021,
    24: 0x100001b, 25: 0x2000009, 26: 0x400001b, 27: 0x8000027,
    28: 0x10000003, 29: 0x20000005, 30: 0x40000003, 31: 0x80000009,
    32: 0x10000008d, 33: 0x200000401, 34: 0x400000081, 35: 0x800000005,
    36: 0x1000000201, 37: 0x2000000053, 38: 0x4000000063, 39: 0x8000000011,
    40: 0x10000000039, 41: 0x20000000009, 42: 0x40000000081,
    43: 0x80000000059, 44: 0x100000000021, 45: 0x20000000001b,
    46: 0x400000000003, 47: 0x800000000021, 48: 0x100000000002d,
    49: 0x2000000000201, 50: 0x400000000001d, 51: 0x800000000004b,
    52: 0x10000000000009, 53: 0x20000000000047, 54: 0x40000000000201,
    55: 0x80000000000081, 56: 0x100000000000095, 57: 0x200000000000011,
    58: 0x400000000080001, 59: 0x800000000000095, 60: 0x1000000000000003,
    61: 0x2000000000000027, 62: 0x4000000020000001, 63: 0x8000000000000003,
    64: 0x1000000000000001b,
}


# ---------------------------------------------------------------------------
# Matrix families


@dataclass(frozen=True)
class MatrixFamily:
    """Family of m n x n matrices with certified rank deficiency r.

    Invariant: for every nonzero s in {0,1}^m the GF(2) span
    ``sum_i s_i K_i`` has rank >= n - r.
    """

    n: int
    m: int
    r: int
    construction: str
    matrices: tuple[BitMatrix, ...] = field(repr=False)

    def __post_init__(self) -> None:
        if self.m != len(self.matrices):
            raise ValueError("family size does not match matrix count")
        for k in self.matrices:
            if (k.rows, k.cols) != (self.n, self.n):
                raise ValueError(f"family matrices must be {self.n}x{self.n}")

    def span(self, s: int) -> BitMatrix:
        """The combination sum over set bits of s of the family matrices."""
        if s <= 0 or s >> self.m:
            raise ValueError(f"selector must be a nonzero {self.m}-bit pattern")
        acc = BitMatrix.zero(self.n, self.n)
        for i in range(self.m):
            if (s >> i) & 1:
                acc = acc ^ self.matrices[i]
        return acc

    def certify(self, max_exhaustive_m: int = 16, samples: int = 200, seed: int = 0) -> bool:
        """Check the rank invariant, exhaustively for m <= max_exhaustive_m.

        Larger families are checked on pseudo-random nonzero selectors.
        """
        if self.m <= max_exhaustive_m:
            selectors = range(1, 1 << self.m)
        else:
            import random

            rng = random.Random(seed)
            selectors = (rng.randrange(1, 1 << self.m) for _ in range(samples))
        return all(rank_gf2(self.span(s)) >= self.n - self.r for s in selectors)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "r": self.r,
            "construction": self.construction,
            "matrices": [["".join(str((row >> j) & 1) for j in range(k.cols))
                          for row in k.row_bits] for k in self.matrices],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MatrixFamily":
        mats = []
        for rows in d["matrices"]:
            bits = tuple(int(row[::-1], 2) for row in rows)
            mats.append(BitMatrix(len(rows), len(rows[0]), bits))
        return cls(d["n"], d["m"], d["r"], d["construction"], tuple(mats))


def build_field_family(n: int, m: int) -> MatrixFamily:
    """Family with r = 0: K_i is multiplication by alpha^(i-1) in GF(2^n).

    alpha is a root of the shipped irreducible polynomial of degree n and
    the matrices act on coordinates in the polynomial basis 1, alpha, ...,
    alpha^(n-1).  Any nonzero combination is multiplication by a nonzero
    field element and hence invertible.
    """
    if not 1 <= m <= n:
        raise FamilyConstructionError(f"need 1 <= m <= n, got m={m}, n={n}")
    if n not in IRREDUCIBLE_POLY:
        raise FamilyConstructionError(f"no irreducible polynomial shipped for degree {n}")
    mod = IRREDUCIBLE_POLY[n]
    # alpha^t for t = 0 .. n+m-2, as coefficient masks in the basis
    powers = [1]
    for _ in range(n + m - 2):
        a = powers[-1] << 1
        if (a >> n) & 1:
            a ^= mod
        powers.append(a)
    mats = []
    for i in range(m):
        # column j of K_i holds the coordinates of alpha^(i+j)
        rows = [0] * n
        for j in range(n):
            col = powers[i + j]
            for k in range(n):
                rows[k] |= ((col >> k) & 1) << j
        mats.append(BitMatrix(n, n, tuple(rows)))
    return MatrixFamily(n, m, 0, "field-mult", tuple(mats))


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def is_primitive_root_2(n: int) -> bool:
    """True iff n is prime and 2 generates the multiplicative group mod n."""
    if n < 2:
        raise ValueError("need n >= 2")
    if not is_prime(n) or n == 2:
        return False
    order, v = 1, 2 % n
    while v != 1:
        v = (v * 2) % n
        order += 1
    return order == n - 1


def build_circulant_family(n: int, m: int) -> MatrixFamily:
    """Family with r = 1: K_i is the (i-1)-th power of the cyclic shift.

    Requires n prime with 2 as a primitive root mod n, so that
    x^n - 1 = (x + 1) * Phi with Phi irreducible over GF(2).  Any nonzero
    combination is a circulant whose polynomial s(x) has degree < n - 1,
    hence gcd(s, x^n - 1) divides x + 1 and the rank is at least n - 1.
    The degree bound forces m <= n - 1: for m = n the all-ones selector
    would give the rank-1 all-ones matrix.
    """
    if not is_prime(n):
        raise FamilyConstructionError(f"n={n} is not prime")
    if not is_primitive_root_2(n):
        raise FamilyConstructionError(f"2 is not a primitive root mod {n}")
    if not 1 <= m <= n - 1:
        raise FamilyConstructionError(
            f"need 1 <= m <= n-1 for the rank certificate, got m={m}, n={n}")
    mats = []
    for i in range(m):
        # row k of C^i has its single 1 at column (k + i) mod n
        rows = tuple(1 << ((k + i) % n) for k in range(n))
        mats.append(BitMatrix(n, n, rows))
    return MatrixFamily(n, m, 1, "circulant", tuple(mats))


def build_family(n: int, m: int, r: int) -> MatrixFamily:
    """Dispatch on the requested rank deficiency r in {0, 1}."""
    if r == 0:
        return build_field_family(n, m)
    if r == 1:
        return build_circulant_family(n, m)
    raise FamilyConstructionError(f"unsupported rank deficiency r={r}")
