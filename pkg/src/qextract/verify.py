"""Brute-force oracles for the extraction bounds on small instances.

A scenario consists of a pure input state shared between two parties, a
pair of instruments producing n-bit outcomes X and Y plus quantum side
information S and T, and an extractor.  Everything here is exact:
output states are assembled blockwise over the classical outcome values
and trace distances come from full eigendecompositions, so a reported
epsilon carries no sampling noise.

The bound checks compare the measured epsilon against the security
formulas evaluated at the *certified lower bounds* of the entropy
inputs, which keeps the comparison sound regardless of solver gap:

* one-bit inner product: epsilon <= 1/2 sqrt(2^(n - k1 - k2))
* m-bit matrix family:   epsilon <= 1/2 sqrt(2^(2m + n + r - k1 - k2))

with k1 the min-entropy of X given S and the far input, and k2 the
min-entropy of Y given the near input (strong mode) or given T and the
near input (weak mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entropy import DEFAULT_GAP, EntropyResult, h_min_blocks
from .extractor import DEOR, IP, ExtractorSpec
from .quantum import (
    CqState,
    DensityOperator,
    Instrument,
    System,
    frac_power,
    permute_systems,
    purify,
    trace_norm,
)

PASS_SLACK = 1e-9


@dataclass(frozen=True)
class ScenarioInstance:
    """Pure shared state, two local instruments, and an extractor."""

    rho_ab: DensityOperator
    m_inst: Instrument
    n_inst: Instrument
    ext: ExtractorSpec
    strong: bool = True
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.rho_ab.is_pure():
            raise ValueError("scenario input state must be pure; purify mixed "
                             "inputs and route the reference system to one side")
        for inst, nbits in ((self.m_inst, self.ext.n), (self.n_inst, self.ext.n)):
            if inst.num_outcomes != 2 ** nbits:
                raise ValueError(
                    f"instrument emits {inst.num_outcomes} outcomes, extractor "
                    f"wants {2 ** nbits}")
        named = set(self.rho_ab.names())
        m_names = {s.name for s in self.m_inst.input_systems}
        n_names = {s.name for s in self.n_inst.input_systems}
        if m_names | n_names != named or m_names & n_names:
            raise ValueError("instrument inputs must partition the state's systems")


@dataclass(frozen=True)
class BoundReport:
    """Measured epsilon against a security formula, with entropy certificates."""

    kind: str
    n: int
    m: int
    r: int
    strong: bool
    measured: float
    bound: float
    k1: EntropyResult
    k2: EntropyResult
    seed: int | None = None

    @property
    def margin(self) -> float:
        return self.bound - self.measured

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound + PASS_SLACK

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind, "n": self.n, "m": self.m, "r": self.r,
            "strong": self.strong, "measured": self.measured, "bound": self.bound,
            "margin": self.margin, "passed": self.passed, "seed": self.seed,
            "k1": {"value": self.k1.value, "lower": self.k1.lower,
                   "upper": self.k1.upper, "gap": self.k1.gap},
            "k2": {"value": self.k2.value, "lower": self.k2.lower,
                   "upper": self.k2.upper, "gap": self.k2.gap},
        }


def _branch_blocks(inst: Instrument, rho: DensityOperator):
    """Per-outcome sub-normalized operators on (instrument outputs (x) rest)."""
    acted = [s.name for s in inst.input_systems]
    rest = [nm for nm in rho.names() if nm not in acted]
    rp = permute_systems(rho, acted + rest)
    d_in = inst.input_dim
    d_rest = rp.dim // d_in
    t = rp.matrix.reshape(d_in, d_rest, d_in, d_rest)
    d_out = inst.output_dim
    out = []
    for ops in inst.kraus:
        b = np.zeros((d_out * d_rest, d_out * d_rest), dtype=complex)
        for k in ops:
            kt = np.einsum("ai,irjs,bj->arbs", k, t, k.conj())
            b += kt.reshape(d_out * d_rest, d_out * d_rest)
        out.append(b)
    return out


def _scenario_blocks(inst: ScenarioInstance):
    """Exact output blocks rho_{ST and X=x, Y=y} of the scenario."""
    tau = _branch_blocks(inst.m_inst, inst.rho_ab)  # on (S, B)
    d_s = inst.m_inst.output_dim
    d_b = inst.n_inst.input_dim
    d_t = inst.n_inst.output_dim
    blocks = {}
    for x, tx in enumerate(tau):
        t4 = tx.reshape(d_s, d_b, d_s, d_b)
        for y, ops in enumerate(inst.n_inst.kraus):
            b = np.zeros((d_s * d_t, d_s * d_t), dtype=complex)
            for k in ops:
                kt = np.einsum("ai,risj,bj->rasb", k, t4, k.conj())
                b += kt.reshape(d_s * d_t, d_s * d_t)
            blocks[x, y] = b
    return blocks


def measured_epsilon(inst: ScenarioInstance) -> float:
    """Exact half trace distance of the extracted output from uniform.

    Strong mode keeps the Y register next to the side information; weak
    mode marginalizes it.
    """
    blocks = _scenario_blocks(inst)
    n_vals = 2 ** inst.ext.n
    m_vals = 2 ** inst.ext.m
    d = inst.m_inst.output_dim * inst.n_inst.output_dim
    total = 0.0
    if inst.strong:
        for y in range(n_vals):
            az = np.zeros((m_vals, d, d), dtype=complex)
            for x in range(n_vals):
                az[inst.ext.apply_ints(x, y)] += blocks[x, y]
            marg = az.sum(axis=0)
            for z in range(m_vals):
                total += trace_norm(az[z] - marg / m_vals)
    else:
        az = np.zeros((m_vals, d, d), dtype=complex)
        for (x, y), b in blocks.items():
            az[inst.ext.apply_ints(x, y)] += b
        marg = az.sum(axis=0)
        for z in range(m_vals):
            total += trace_norm(az[z] - marg / m_vals)
    return 0.5 * total


def scenario_entropies(inst: ScenarioInstance, gap: float = DEFAULT_GAP):
    """Certified (k1, k2) of the scenario.

    k1 conditions X on S and the untouched far input; k2 conditions Y
    on the near input alone in strong mode, adding T in weak mode.
    """
    k1 = h_min_blocks(_branch_blocks(inst.m_inst, inst.rho_ab), gap=gap)
    omega = _branch_blocks(inst.n_inst, inst.rho_ab)  # on (T, A)
    if inst.strong:
        d_t = inst.n_inst.output_dim
        d_a = omega[0].shape[0] // d_t
        omega = [np.einsum("iaib->ab", w.reshape(d_t, d_a, d_t, d_a)) for w in omega]
    k2 = h_min_blocks(omega, gap=gap)
    return k1, k2


def _formula_bound(inst: ScenarioInstance, k1: float, k2: float) -> float:
    if inst.ext.kind == IP:
        exponent = inst.ext.n - k1 - k2
    else:
        exponent = 2 * inst.ext.m + inst.ext.n + inst.ext.family.r - k1 - k2
    return 0.5 * math.sqrt(2.0 ** exponent)


def check_ip_bound(inst: ScenarioInstance, gap: float = DEFAULT_GAP) -> BoundReport:
    if inst.ext.kind != IP:
        raise ValueError("instance does not use the inner product extractor")
    k1, k2 = scenario_entropies(inst, gap)
    return BoundReport(IP, inst.ext.n, 1, 0, inst.strong,
                       measured_epsilon(inst), _formula_bound(inst, k1.lower, k2.lower),
                       k1, k2, inst.seed)


def check_deor_bound(inst: ScenarioInstance, gap: float = DEFAULT_GAP) -> BoundReport:
    if inst.ext.kind != DEOR:
        raise ValueError("instance does not use the matrix family extractor")
    k1, k2 = scenario_entropies(inst, gap)
    return BoundReport(DEOR, inst.ext.n, inst.ext.m, inst.ext.family.r, inst.strong,
                       measured_epsilon(inst), _formula_bound(inst, k1.lower, k2.lower),
                       k1, k2, inst.seed)


# ---------------------------------------------------------------------------
# XOR lemma


@dataclass(frozen=True)
class XorReport:
    lhs_sq: float
    rhs_sq: float

    @property
    def holds(self) -> bool:
        return self.lhs_sq <= self.rhs_sq + PASS_SLACK

    def to_json_dict(self) -> dict:
        return {"lhs_sq": self.lhs_sq, "rhs_sq": self.rhs_sq, "holds": self.holds}


def check_xor_lemma(rho_ze: CqState, m: int) -> XorReport:
    """Exact check that the full distance from uniform is controlled by
    the distances of all nonzero parity bits of the output register."""
    if rho_ze.num_classical != 2 ** m:
        raise ValueError(f"first register must hold {2 ** m} values")
    blocks = rho_ze.blocks()
    rho_e = sum(blocks)
    lhs = sum(trace_norm(b - rho_e / 2 ** m) for b in blocks) ** 2
    rhs = 0.0
    for s in range(1, 2 ** m):
        signed = sum(b if (s & z).bit_count() % 2 == 0 else -b
                     for z, b in enumerate(blocks))
        rhs += trace_norm(signed) ** 2
    return XorReport(float(lhs), float(2 ** m * rhs))


# ---------------------------------------------------------------------------
# Instance generators


def measurement_instrument(system: System, outcome_name: str = "X") -> Instrument:
    """Computational basis measurement with no quantum output."""
    kraus = []
    for x in range(system.dim):
        k = np.zeros((1, system.dim), dtype=complex)
        k[0, x] = 1.0
        kraus.append((k,))
    return Instrument((system,), outcome_name, (), tuple(kraus))


def preparation_instrument(system: System, probs, outcome_name: str) -> Instrument:
    """Instrument on a trivial input that emits a classical value with
    the given distribution (and no quantum side output).

    Dyadic probabilities are realized exactly: p = 2^-k with odd k uses
    two identical Kraus entries so the branch weight is p to the last
    bit, which is what lets the tightness check hit its bound exactly.
    """
    kraus = []
    for p in probs:
        p = float(p)
        if p == 0.0:
            kraus.append((np.zeros((1, 1), dtype=complex),))
            continue
        mant, exp = math.frexp(p)
        if mant == 0.5:  # p = 2^(exp-1)
            k = exp - 1
            if k % 2 == 0:
                kraus.append((np.array([[2.0 ** (k // 2)]], dtype=complex),))
            else:
                half = np.array([[2.0 ** ((k - 1) // 2)]], dtype=complex)
                kraus.append((half, half.copy()))
        else:
            kraus.append((np.array([[math.sqrt(p)]], dtype=complex),))
    return Instrument((system,), outcome_name, (), tuple(kraus))


def distribution_instance(p: np.ndarray, ext: ExtractorSpec,
                          strong: bool = True) -> ScenarioInstance:
    """Scenario realizing a joint distribution via the canonical pure state
    sqrt(p) and computational measurements on both halves."""
    p = np.asarray(p, dtype=float)
    n_vals = 2 ** ext.n
    if p.shape != (n_vals, n_vals) or abs(p.sum() - 1.0) > 1e-12 or p.min() < 0:
        raise ValueError(f"need a {n_vals}x{n_vals} probability table")
    a = System("A", n_vals)
    b = System("B", n_vals)
    vec = np.sqrt(p).reshape(-1)
    rho = DensityOperator((a, b), np.outer(vec, vec))
    return ScenarioInstance(rho, measurement_instrument(a, "X"),
                            measurement_instrument(b, "Y"), ext, strong)


def gen_tightness(n: int) -> ScenarioInstance:
    """The half/half instance: X uniform on its first n/2 bits and zero
    after, Y zero on its first n/2 bits and uniform after, so the inner
    product vanishes identically while both entropies equal n/2."""
    if n % 2 or n < 2:
        raise ValueError("need even n >= 2")
    half = 2 ** (n // 2)
    px = np.zeros(2 ** n)
    px[:half] = 1.0 / half          # low bits free, high bits zero
    py = np.zeros(2 ** n)
    py[::half] = 1.0 / half         # low bits zero, high bits free
    a = System("A", 1)
    b = System("B", 1)
    rho = DensityOperator((a, b), np.array([[1.0]]))
    return ScenarioInstance(rho, preparation_instrument(a, px, "X"),
                            preparation_instrument(b, py, "Y"),
                            ExtractorSpec(IP, n), strong=True)


def gen_sn_distribution(n: int) -> np.ndarray:
    """Uniform distribution on the zero set of the inner product."""
    size = 2 ** n
    p = np.array([[1.0 if (x & y).bit_count() % 2 == 0 else 0.0
                   for y in range(size)] for x in range(size)])
    return p / p.sum()


MARKOV_COUNTEREXAMPLE_HMIN = 0.45689
MARKOV_EXTENSION_HMIN = -math.log2(3.0 / 4.0)  # about 0.41504


def gen_markov_counterexample():
    """The two-bit distribution whose induced side-information states have
    min-entropy about 0.45689 while every classical Markov extension is
    capped at -log2(3/4) about 0.41504.

    Returns (p, eta, nu, instance): the joint table, both conditional
    pure-state constructions, and the measurement scenario.
    """
    p = np.zeros((4, 4))
    for x, y in [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 3), (3, 0), (3, 3)]:
        p[x, y] = 1.0 / 8.0
    eta, nu = build_eta_nu(p)
    inst = distribution_instance(p, ExtractorSpec(IP, 2), strong=True)
    return p, eta, nu, inst


def build_eta_nu(p: np.ndarray) -> tuple[CqState, CqState]:
    """Conditional pure-state encodings of a joint distribution.

    For each value of one register the other register's conditional
    distribution is embedded as an amplitude vector, which is the
    side-information structure induced by measuring the canonical pure
    state on one side only.
    """
    p = np.asarray(p, dtype=float)
    if p.min() < 0 or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("not a probability table")
    nx, ny = p.shape

    def cq(table: np.ndarray, cl_name: str, q_name: str) -> CqState:
        rows, cols = table.shape
        blocks = []
        for v in range(rows):
            mass = table[v].sum()
            if mass <= 0:
                blocks.append(np.zeros((cols, cols), dtype=complex))
                continue
            amp = np.sqrt(table[v] / mass)
            blocks.append(mass * np.outer(amp, amp))
        return CqState.from_blocks(System(cl_name, rows, classical=True),
                                   (System(q_name, cols),), blocks)

    return cq(p, "X", "B"), cq(p.T, "Y", "A")


def alt_model_channel(rho_xb: CqState, outcome_name: str = "X") -> Instrument:
    """Measurement that recreates a cq state from the purification of its
    quantum marginal.

    The POVM elements are the transposed, marginal-whitened conditional
    operators; applied to the reference half of the canonical
    purification of the marginal they reproduce the cq state exactly.
    """
    blocks = rho_xb.blocks()
    rho_b = sum(blocks)
    white = frac_power(rho_b, -0.5)
    kraus = []
    for blk in blocks:
        f = (white @ blk @ white).T
        root = frac_power(0.5 * (f + f.conj().T), 0.5)
        kraus.append(tuple(root[j:j + 1, :] for j in range(root.shape[0])))
    d = rho_b.shape[0]
    ref = System("ref", d)
    return Instrument((ref,), outcome_name, (), tuple(kraus))


def alt_model_roundtrip_error(rho_xb: CqState) -> float:
    """Max deviation of the reconstructed cq state from the original."""
    from .quantum import apply_instrument

    rho_b = sum(rho_xb.blocks())
    b_sys = rho_xb.systems[1:]
    marginal = DensityOperator(b_sys, rho_b)
    pure = purify(marginal)  # systems (B..., ref)
    rebuilt = apply_instrument(alt_model_channel(rho_xb), pure)
    # rebuilt is (X, B...); compare blockwise against the original
    err = 0.0
    for x in range(rho_xb.num_classical):
        err = max(err, float(np.abs(rebuilt.conditional_block(x)
                                    - rho_xb.conditional_block(x)).max()))
    return err


# ---------------------------------------------------------------------------
# Random scenario generation


def haar_state(rng: np.random.Generator, systems: tuple[System, ...]) -> DensityOperator:
    dim = int(np.prod([s.dim for s in systems]))
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    return DensityOperator(systems, np.outer(v, v.conj()))


def random_instrument(rng: np.random.Generator, system: System, n_bits: int,
                      d_side: int, outcome_name: str, side_name: str,
                      scale: float = 1.0) -> Instrument:
    """Haar random instrument with 2^n_bits outcomes and a d_side output.

    Built from the QR factorization of a Gaussian complex matrix, so the
    total map is an isometry (trace preserving) when scale is 1.
    """
    n_out = 2 ** n_bits
    if n_out * d_side < system.dim:
        raise ValueError("output space too small for an isometry")
    g = rng.normal(size=(n_out * d_side, system.dim)) \
        + 1j * rng.normal(size=(n_out * d_side, system.dim))
    q, _ = np.linalg.qr(g)
    q = scale * q
    kraus = tuple((q[x * d_side:(x + 1) * d_side, :],) for x in range(n_out))
    outputs = (System(side_name, d_side),) if d_side > 1 else ()
    return Instrument((system,), outcome_name, outputs, kraus)


def gen_random_instance(seed: int, n_bits: int | None = None, max_dim: int = 4,
                        ext: ExtractorSpec | None = None, strong: bool = True,
                        tni_fraction: float = 0.2) -> ScenarioInstance:
    """Seeded scenario: Haar pure input, Haar instruments on both sides."""
    rng = np.random.default_rng(seed)
    if ext is None:
        if n_bits is None:
            n_bits = int(rng.integers(1, 5))
        ext = ExtractorSpec(IP, n_bits)
    n_bits = ext.n
    d_a = int(rng.integers(2, max_dim + 1))
    d_b = int(rng.integers(2, max_dim + 1))
    lo_s = max(1, math.ceil(d_a / 2 ** n_bits))
    lo_t = max(1, math.ceil(d_b / 2 ** n_bits))
    d_s = int(rng.integers(lo_s, max_dim + 1))
    d_t = int(rng.integers(lo_t, max_dim + 1))
    a, b = System("A", d_a), System("B", d_b)
    rho = haar_state(rng, (a, b))
    scale_m = float(rng.uniform(0.6, 1.0)) if rng.uniform() < tni_fraction else 1.0
    scale_n = float(rng.uniform(0.6, 1.0)) if rng.uniform() < tni_fraction else 1.0
    m_inst = random_instrument(rng, a, n_bits, d_s, "X", "S", scale_m)
    n_inst = random_instrument(rng, b, n_bits, d_t, "Y", "T", scale_n)
    return ScenarioInstance(rho, m_inst, n_inst, ext, strong, seed=seed)


def random_cq_state(rng: np.random.Generator, n_classical: int, d_q: int,
                    cl_name: str = "Z", q_name: str = "E",
                    trace: float = 1.0) -> CqState:
    blocks = []
    weights = rng.dirichlet(np.ones(n_classical)) * trace
    for w in weights:
        g = rng.normal(size=(d_q, d_q)) + 1j * rng.normal(size=(d_q, d_q))
        m = g @ g.conj().T
        blocks.append(w * m / m.trace().real)
    return CqState.from_blocks(System(cl_name, n_classical, classical=True),
                               (System(q_name, d_q),), blocks)


# ---------------------------------------------------------------------------
# Suites


def run_ip_suite(count: int = 200, seed: int = 0, gap: float = 1e-6) -> list[BoundReport]:
    reports = []
    for i in range(count):
        inst = gen_random_instance(seed + i, strong=bool((seed + i) % 2 == 0))
        reports.append(check_ip_bound(inst, gap=gap))
    return reports


def run_deor_suite(count: int = 100, seed: int = 0, gap: float = 1e-6) -> list[BoundReport]:
    from .gf2 import build_circulant_family, build_field_family

    choices = [build_field_family(2, 1), build_field_family(2, 2),
               build_field_family(3, 1), build_field_family(3, 2),
               build_circulant_family(3, 1), build_circulant_family(3, 2)]
    reports = []
    for i in range(count):
        fam = choices[i % len(choices)]
        ext = ExtractorSpec(DEOR, fam.n, fam.m, fam)
        inst = gen_random_instance(seed + i, ext=ext, strong=True)
        reports.append(check_deor_bound(inst, gap=gap))
    return reports


def run_xor_suite(count: int = 200, seed: int = 0) -> list[XorReport]:
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(count):
        m = int(rng.integers(1, 4))
        d_e = int(rng.integers(1, 9))
        trace = float(rng.uniform(0.5, 1.0)) if rng.uniform() < 0.3 else 1.0
        rho = random_cq_state(rng, 2 ** m, d_e, trace=trace)
        reports.append(check_xor_lemma(rho, m))
    return reports


def run_tightness(n: int = 2) -> BoundReport:
    return check_ip_bound(gen_tightness(n))


def run_counterexample(gap: float = 1e-8) -> dict:
    """Reproduce both numeric endpoints of the Markov separation."""
    _, eta, nu, _ = gen_markov_counterexample()
    hx = h_min_blocks(eta.blocks(), gap=gap)
    hy = h_min_blocks(nu.blocks(), gap=gap)
    sep = min(hx.lower, hy.lower) > MARKOV_EXTENSION_HMIN
    return {
        "h_min_x_given_b": hx, "h_min_y_given_a": hy,
        "expected": MARKOV_COUNTEREXAMPLE_HMIN,
        "markov_cap": MARKOV_EXTENSION_HMIN,
        "separation_strict": bool(sep),
        "passed": bool(sep
                       and abs(hx.value - MARKOV_COUNTEREXAMPLE_HMIN) < 1e-3
                       and abs(hy.value - MARKOV_COUNTEREXAMPLE_HMIN) < 1e-3),
    }


def run_alt_model_suite(count: int = 50, seed: int = 0, tol: float = 1e-9) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        nx = int(rng.integers(2, 5))
        dq = int(rng.integers(2, 5))
        rho = random_cq_state(rng, nx, dq, cl_name="X", q_name="B")
        err = alt_model_roundtrip_error(rho)
        out.append({"error": err, "passed": bool(err <= tol)})
    return out
