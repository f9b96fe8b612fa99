"""Desk-scale linear algebra for sub-normalized states and instruments.

States are dense complex matrices over an ordered list of labelled
tensor factors.  Traces in (0, 1] are allowed throughout; a "state" here
is any PSD operator with positive trace at most one (up to tolerance).
Classical systems are flagged as such and must be diagonal in the
computational basis; the basis index of a classical n-bit register is
the little-endian integer value of the bitstring.

Deliberate scale limits: the product of quantum (non-classical)
dimensions is capped at 64 and the total dimension at 1024.  Everything
uses explicit Hermitian eigendecompositions with symmetrization first,
and fractional or negative matrix powers act on the numerical support
only (eigenvalues below 1e-12 of the largest are treated as zero).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

HERM_TOL = 1e-10
PSD_TOL = 1e-10
CLASSICAL_TOL = 1e-12
SUPPORT_RTOL = 1e-12
QUANTUM_DIM_CAP = 64
TOTAL_DIM_CAP = 1024


class DimensionCapError(ValueError):
    """Requested operator exceeds the desk-scale dimension caps."""


@dataclass(frozen=True)
class System:
    """A labelled tensor factor."""

    name: str
    dim: int
    classical: bool = False

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"system {self.name!r} needs dimension >= 1")


def herm_eig(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition after explicit symmetrization."""
    sym = 0.5 * (mat + mat.conj().T)
    return np.linalg.eigh(sym)


def frac_power(mat: np.ndarray, power: float) -> np.ndarray:
    """Fractional (possibly negative) power on the support of a PSD matrix."""
    vals, vecs = herm_eig(mat)
    cut = SUPPORT_RTOL * max(vals.max(initial=0.0), 0.0)
    keep = vals > cut
    powered = np.zeros_like(vals)
    powered[keep] = vals[keep] ** power
    return (vecs * powered) @ vecs.conj().T


def support_projector(mat: np.ndarray) -> np.ndarray:
    vals, vecs = herm_eig(mat)
    cut = SUPPORT_RTOL * max(vals.max(initial=0.0), 0.0)
    keep = vals > cut
    return (vecs[:, keep]) @ vecs[:, keep].conj().T


def trace_norm(mat: np.ndarray) -> float:
    """Schatten 1-norm of a Hermitian matrix."""
    vals, _ = herm_eig(mat)
    return float(np.abs(vals).sum())


def trace_norm_plus(mat: np.ndarray) -> float:
    """max over 0 <= L <= 1 of |tr[L S]|, i.e. max(tr S+, tr S-).

    The optimizer is a spectral projector, so the value follows from the
    eigenvalues directly.
    """
    if not np.allclose(mat, mat.conj().T, atol=HERM_TOL):
        raise ValueError("operator is not Hermitian")
    vals, _ = herm_eig(mat)
    return float(max(vals[vals > 0].sum(initial=0.0), -vals[vals < 0].sum(initial=0.0)))


def hermitian_split(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spectral positive/negative parts (S+, S-) with S = S+ - S- and S+ _|_ S-."""
    if not np.allclose(mat, mat.conj().T, atol=HERM_TOL):
        raise ValueError("operator is not Hermitian")
    vals, vecs = herm_eig(mat)
    pos = (vecs * np.maximum(vals, 0.0)) @ vecs.conj().T
    neg = (vecs * np.maximum(-vals, 0.0)) @ vecs.conj().T
    return pos, neg


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """PSD operator with trace in (0, 1] over labelled tensor factors."""

    systems: tuple[System, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        systems = tuple(self.systems)
        object.__setattr__(self, "systems", systems)
        names = [s.name for s in systems]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate system names in {names}")
        dim = int(np.prod([s.dim for s in systems], dtype=np.int64))
        qdim = int(np.prod([s.dim for s in systems if not s.classical], dtype=np.int64))
        if qdim > QUANTUM_DIM_CAP:
            raise DimensionCapError(
                f"quantum dimension {qdim} exceeds the cap of {QUANTUM_DIM_CAP}")
        if dim > TOTAL_DIM_CAP:
            raise DimensionCapError(
                f"total dimension {dim} exceeds the cap of {TOTAL_DIM_CAP}")
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {mat.shape} does not match dimension {dim}")
        if not np.allclose(mat, mat.conj().T, atol=HERM_TOL):
            raise ValueError("state is not Hermitian within 1e-10")
        vals = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
        if vals.min(initial=0.0) < -PSD_TOL:
            raise ValueError(f"state has eigenvalue {vals.min():.3e} below -1e-10")
        tr = float(mat.trace().real)
        if not 0.0 < tr <= 1.0 + PSD_TOL:
            raise ValueError(f"state trace {tr:.6g} outside (0, 1]")
        self._check_classical_diagonal(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def _check_classical_diagonal(self, mat: np.ndarray) -> None:
        dims = self.dims
        t = mat.reshape(dims + dims)
        k = len(dims)
        for p, s in enumerate(self.systems):
            if not s.classical or s.dim == 1:
                continue
            moved = np.moveaxis(t, (p, k + p), (0, 1))
            off = moved.copy()
            idx = np.arange(s.dim)
            off[idx, idx] = 0
            if np.abs(off).max(initial=0.0) > CLASSICAL_TOL:
                raise ValueError(
                    f"classical system {s.name!r} has off-diagonal weight "
                    f"{np.abs(off).max():.3e}")

    # -- structure helpers ---------------------------------------------------

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.systems)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    @property
    def trace(self) -> float:
        return float(self.matrix.trace().real)

    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.systems)

    def system(self, name: str) -> System:
        for s in self.systems:
            if s.name == name:
                return s
        raise KeyError(f"no system named {name!r} in {self.names()}")

    def positions(self, names) -> list[int]:
        have = self.names()
        return [have.index(n) for n in names]

    def is_pure(self, tol: float = 1e-10) -> bool:
        vals = np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))
        return bool(vals[:-1].max(initial=0.0) <= tol)


def tensor(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    overlap = set(a.names()) & set(b.names())
    if overlap:
        raise ValueError(f"system labels {sorted(overlap)} appear on both sides")
    return DensityOperator(a.systems + b.systems, np.kron(a.matrix, b.matrix))


def permute_systems(rho: DensityOperator, order) -> DensityOperator:
    """Reorder tensor factors to the named order."""
    order = list(order)
    if sorted(order) != sorted(rho.names()):
        raise ValueError(f"order {order} is not a permutation of {rho.names()}")
    perm = rho.positions(order)
    k = len(rho.systems)
    t = rho.matrix.reshape(rho.dims + rho.dims)
    t = np.transpose(t, perm + [k + p for p in perm])
    dim = rho.dim
    systems = tuple(rho.systems[p] for p in perm)
    return DensityOperator(systems, t.reshape(dim, dim))


def partial_trace(rho: DensityOperator, drop) -> DensityOperator:
    """Trace out the named systems."""
    drop = list(drop)
    keep = [n for n in rho.names() if n not in drop]
    if set(drop) - set(rho.names()):
        raise KeyError(f"cannot trace out {sorted(set(drop) - set(rho.names()))}")
    if not keep:
        raise ValueError("cannot trace out every system")
    rho = permute_systems(rho, keep + drop)
    dk = int(np.prod([rho.system(n).dim for n in keep], dtype=np.int64))
    dd = rho.dim // dk
    t = rho.matrix.reshape(dk, dd, dk, dd)
    out = np.einsum("iaja->ij", t)
    return DensityOperator(tuple(rho.systems[:len(keep)]), out)


def purify(rho: DensityOperator, ref_name: str | None = None) -> DensityOperator:
    """Canonical purification via the square root of the state.

    Appends one reference system of the full dimension; tracing it out
    reproduces the input.  A sub-normalized input yields a sub-normalized
    rank-one output of the same trace.  Classical flags are dropped from
    the output labels: a purification is genuinely quantum even when the
    input register was diagonal.
    """
    if ref_name is None:
        ref_name = "ref"
        while ref_name in rho.names():
            ref_name += "'"
    root = frac_power(rho.matrix, 0.5)
    vec = root.reshape(-1)  # row-major vec: |psi> = sum_ij root[i,j] |i>|j>
    mat = np.outer(vec, vec.conj())
    systems = tuple(System(s.name, s.dim) for s in rho.systems) + (System(ref_name, rho.dim),)
    return DensityOperator(systems, mat)


def fidelity_star(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Generalized fidelity of two sub-normalized states."""
    root = frac_power(rho.matrix, 0.5)
    inner = root @ sigma.matrix @ root
    vals, _ = herm_eig(inner)
    f = float(np.sqrt(np.maximum(vals, 0.0)).sum())
    f += float(np.sqrt(max(0.0, 1.0 - rho.trace) * max(0.0, 1.0 - sigma.trace)))
    return min(f, 1.0)


def purified_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    if rho.names() != sigma.names():
        raise ValueError("states must share the same systems")
    f = fidelity_star(rho, sigma)
    return float(np.sqrt(max(0.0, 1.0 - f * f)))


# ---------------------------------------------------------------------------
# Instruments


@dataclass(frozen=True, eq=False)
class Instrument:
    """Finite collection of Kraus-op lists, one list per classical outcome.

    The whole map must be trace non-increasing:
    sum over outcomes and Kraus terms of K* K <= identity (tolerance
    1e-10); it is flagged trace-preserving when equality holds.
    """

    input_systems: tuple[System, ...]
    outcome_name: str
    output_systems: tuple[System, ...]
    kraus: tuple[tuple[np.ndarray, ...], ...]
    labels: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_systems", tuple(self.input_systems))
        object.__setattr__(self, "output_systems", tuple(self.output_systems))
        d_in = self.input_dim
        d_out = self.output_dim
        if not self.kraus:
            raise ValueError("instrument needs at least one outcome")
        frozen = []
        acc = np.zeros((d_in, d_in), dtype=complex)
        for ops in self.kraus:
            ops = tuple(np.array(k, dtype=complex) for k in ops)
            for k in ops:
                if k.shape != (d_out, d_in):
                    raise ValueError(
                        f"Kraus operator shape {k.shape} != ({d_out}, {d_in})")
                k.setflags(write=False)
                acc += k.conj().T @ k
            frozen.append(ops)
        object.__setattr__(self, "kraus", tuple(frozen))
        top = np.linalg.eigvalsh(0.5 * (acc + acc.conj().T)).max()
        if top > 1.0 + PSD_TOL:
            raise ValueError(f"instrument is not trace non-increasing: sum K*K has "
                             f"eigenvalue {top:.6f}")
        tp = bool(np.allclose(acc, np.eye(d_in), atol=PSD_TOL))
        object.__setattr__(self, "_tp", tp)
        if self.labels is not None and len(self.labels) != len(self.kraus):
            raise ValueError("label count does not match outcome count")

    @property
    def input_dim(self) -> int:
        return int(np.prod([s.dim for s in self.input_systems], dtype=np.int64))

    @property
    def output_dim(self) -> int:
        return int(np.prod([s.dim for s in self.output_systems], dtype=np.int64) or 1)

    @property
    def num_outcomes(self) -> int:
        return len(self.kraus)

    @property
    def trace_preserving(self) -> bool:
        return self._tp

    @property
    def outcome_system(self) -> System:
        return System(self.outcome_name, self.num_outcomes, classical=True)

    def outcome_map(self, x: int, mat: np.ndarray) -> np.ndarray:
        """Apply the (sub-normalized) branch for outcome x to a bare matrix."""
        return sum(k @ mat @ k.conj().T for k in self.kraus[x])


def adjoint_apply(inst: Instrument, outcome: int, op: np.ndarray) -> np.ndarray:
    """Adjoint of one outcome branch: sum_k K* T K.

    This is the unique map satisfying tr[T* N[S]] = tr[(N*[T])* S] for the
    Hilbert-Schmidt inner product.
    """
    d_out = inst.output_dim
    op = np.asarray(op, dtype=complex)
    if op.shape != (d_out, d_out):
        raise ValueError(f"operator shape {op.shape} != ({d_out}, {d_out})")
    acc = np.zeros((inst.input_dim, inst.input_dim), dtype=complex)
    for k in inst.kraus[outcome]:
        acc += k.conj().T @ op @ k
    return acc


class CqState(DensityOperator):
    """State whose first system is classical; exposes conditional blocks."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.systems[0].classical:
            raise ValueError("first system of a cq state must be classical")

    @property
    def num_classical(self) -> int:
        return self.systems[0].dim

    @property
    def block_dim(self) -> int:
        return self.dim // self.num_classical

    def conditional_block(self, x: int) -> np.ndarray:
        """Sub-normalized conditional operator on the remaining systems."""
        d = self.block_dim
        return np.array(self.matrix[x * d:(x + 1) * d, x * d:(x + 1) * d])

    def blocks(self) -> list[np.ndarray]:
        return [self.conditional_block(x) for x in range(self.num_classical)]

    def probs(self) -> np.ndarray:
        return np.array([b.trace().real for b in self.blocks()])

    @classmethod
    def from_blocks(cls, outcome: System, rest: tuple[System, ...],
                    blocks) -> "CqState":
        blocks = [np.asarray(b, dtype=complex) for b in blocks]
        if len(blocks) != outcome.dim:
            raise ValueError("block count does not match outcome dimension")
        d = blocks[0].shape[0]
        mat = np.zeros((outcome.dim * d, outcome.dim * d), dtype=complex)
        for x, b in enumerate(blocks):
            mat[x * d:(x + 1) * d, x * d:(x + 1) * d] = b
        return cls((outcome,) + tuple(rest), mat)


def apply_instrument(inst: Instrument, rho: DensityOperator) -> CqState:
    """Apply an instrument to the named subsystems of a state.

    Acts as the identity on every untouched system.  The result is a cq
    state ordered as (outcome register, instrument outputs, untouched
    systems in their original order).
    """
    names = rho.names()
    for s in inst.input_systems:
        if s.name not in names:
            raise KeyError(f"state has no system {s.name!r}")
        if rho.system(s.name).dim != s.dim:
            raise ValueError(f"system {s.name!r} dimension mismatch")
    acted = [s.name for s in inst.input_systems]
    rest = [n for n in names if n not in acted]
    out_names = {inst.outcome_name} | {s.name for s in inst.output_systems}
    if out_names & set(rest):
        raise ValueError(f"output labels {sorted(out_names & set(rest))} collide "
                         "with untouched systems")
    rho = permute_systems(rho, acted + rest)
    d_in = inst.input_dim
    d_rest = rho.dim // d_in
    t = rho.matrix.reshape(d_in, d_rest, d_in, d_rest)
    rest_systems = tuple(rho.systems[len(acted):])
    blocks = []
    d_out = inst.output_dim
    for ops in inst.kraus:
        b = np.zeros((d_out * d_rest, d_out * d_rest), dtype=complex)
        for k in ops:
            kt = np.einsum("ai,irjs,bj->arbs", k, t, k.conj())
            b += kt.reshape(d_out * d_rest, d_out * d_rest)
        blocks.append(b)
    return CqState.from_blocks(inst.outcome_system,
                               inst.output_systems + rest_systems, blocks)


# ---------------------------------------------------------------------------
# Serialization: states and instruments as JSON


def _matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(mat, dtype=complex)]


def _matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def state_to_json(rho: DensityOperator) -> dict:
    return {
        "systems": [{"name": s.name, "dim": s.dim, "classical": s.classical}
                    for s in rho.systems],
        "matrix": _matrix_to_json(rho.matrix),
    }


def state_from_json(d: dict) -> DensityOperator:
    systems = tuple(System(s["name"], int(s["dim"]), bool(s.get("classical", False)))
                    for s in d["systems"])
    rho = DensityOperator(systems, _matrix_from_json(d["matrix"]))
    if systems and systems[0].classical:
        return CqState(systems, rho.matrix)
    return rho


def instrument_to_json(inst: Instrument) -> dict:
    labels = inst.labels or tuple(range(inst.num_outcomes))
    return {
        "input_systems": [{"name": s.name, "dim": s.dim, "classical": s.classical}
                          for s in inst.input_systems],
        "outcomes": [{"label": int(lbl), "kraus": [_matrix_to_json(k) for k in ops]}
                     for lbl, ops in zip(labels, inst.kraus)],
        "output_systems": [{"name": s.name, "dim": s.dim, "classical": s.classical}
                           for s in inst.output_systems],
    }


def instrument_from_json(d: dict, outcome_name: str = "X") -> Instrument:
    ins = tuple(System(s["name"], int(s["dim"]), bool(s.get("classical", False)))
                for s in d["input_systems"])
    outs = tuple(System(s["name"], int(s["dim"]), bool(s.get("classical", False)))
                 for s in d["output_systems"])
    kraus = tuple(tuple(_matrix_from_json(k) for k in o["kraus"]) for o in d["outcomes"])
    labels = tuple(int(o["label"]) for o in d["outcomes"])
    return Instrument(ins, outcome_name, outs, kraus, labels)


def save_state(rho: DensityOperator, path: str) -> None:
    with open(path, "w") as f:
        json.dump(state_to_json(rho), f)


def load_state(path: str) -> DensityOperator:
    with open(path) as f:
        return state_from_json(json.load(f))


def maximally_mixed(system: System) -> DensityOperator:
    return DensityOperator((system,), np.eye(system.dim) / system.dim)


def basis_state(system: System, index: int) -> DensityOperator:
    mat = np.zeros((system.dim, system.dim), dtype=complex)
    mat[index, index] = 1.0
    return DensityOperator((system,), mat)
