"""Weakly random bit sources and the amplification output-length calculator.

A source is a chain of per-step kernels, each consuming a small memory
register and emitting one bit plus the updated register.  The bias
condition is enforced at the operator level: for every step, outcome
and memory value, the probability of the outcome is at most 1/2 + mu.
This is the form of the condition that holds for *all* input states,
including inputs entangled with an adversary through the initial memory,
so the entropy chaining bound

    H_min(bits | E)  >=  -n log2(1/2 + mu)

is guaranteed for every spec that validates.  ``check_chaining``
verifies it numerically on the exact output state.

The output-length calculator inverts the security bound of the strong
multi-bit extractor for a source of certified per-round rate h: it
returns the number of extractable bits m and, given m, the achieved
security parameter.  The square-root second-order coefficient is an
input; no value is fabricated for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entropy import DEFAULT_GAP, EntropyResult, h_min_blocks
from .quantum import CqState, System

BIAS_TOL = 1e-9


@dataclass(frozen=True)
class SvStep:
    """One source step: kernel[x, r_out, r_in] = P(bit x, new memory | memory)."""

    kernel: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.kernel, dtype=float)
        if k.ndim != 3 or k.shape[0] != 2:
            raise ValueError("kernel must have shape (2, d_out, d_in)")
        if k.min() < 0:
            raise ValueError("kernel has negative entries")
        col = k.sum(axis=(0, 1))
        if np.abs(col - 1.0).max() > 1e-12:
            raise ValueError("kernel columns must sum to one (trace preserving)")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)

    @property
    def d_in(self) -> int:
        return self.kernel.shape[2]

    @property
    def d_out(self) -> int:
        return self.kernel.shape[1]

    def bit_probs(self) -> np.ndarray:
        """P(x | r_in), shape (2, d_in)."""
        return self.kernel.sum(axis=1)

    @classmethod
    def memoryless(cls, p_one: float) -> "SvStep":
        return cls(np.array([[[1.0 - p_one]], [[p_one]]]))


@dataclass(frozen=True)
class SvSourceSpec:
    """Bias-mu source: chained steps plus the initial (memory, adversary) state.

    ``rho_init`` is a cq state over (classical memory, quantum side
    information); when omitted the memory starts uniform with trivial
    side information.
    """

    mu: float
    steps: tuple[SvStep, ...]
    rho_init: CqState | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.mu < 0.5:
            raise ValueError("bias must lie in [0, 1/2)")
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("need at least one step")
        d = self.steps[0].d_in
        for i, s in enumerate(self.steps):
            if s.d_in != d:
                raise ValueError(f"step {i} expects memory {s.d_in}, previous emits {d}")
            d = s.d_out
            worst = float(s.bit_probs().max())
            if worst > 0.5 + self.mu + BIAS_TOL:
                raise ValueError(
                    f"step {i} leaks outcome probability {worst:.6f} "
                    f"> 1/2 + mu = {0.5 + self.mu:.6f}")
        if self.rho_init is not None and self.rho_init.num_classical != self.steps[0].d_in:
            raise ValueError("initial memory dimension does not match first step")

    @property
    def n(self) -> int:
        return len(self.steps)

    def initial_blocks(self) -> list[np.ndarray]:
        if self.rho_init is not None:
            return self.rho_init.blocks()
        d = self.steps[0].d_in
        return [np.array([[1.0 / d]], dtype=complex) for _ in range(d)]


def simulate_sv_exact(spec: SvSourceSpec, max_bits: int = 8) -> CqState:
    """Exact joint state of all emitted bits and the adversary system.

    The memory register is traced out at the end.  Block bookkeeping
    keeps this linear in 2^n, so n is capped.
    """
    if spec.n > max_bits:
        raise ValueError(f"exact mode supports at most {max_bits} steps")
    init = spec.initial_blocks()
    d_e = init[0].shape[0]
    # state[prefix] has shape (d_r, d_e, d_e)
    state = {0: np.stack(init)}
    for i, step in enumerate(spec.steps):
        nxt = {}
        for prefix, arr in state.items():
            # arr[r, :, :] -> kernel[x, r', r] arr[r]
            moved = np.einsum("xsr,rab->xsab", step.kernel, arr)
            for x in (0, 1):
                nxt[(prefix << 1) | x] = moved[x]
        state = nxt
    n = spec.n
    # the accumulator key holds bit i at position n-1-i; the register index
    # packs bit i of the string at position i, so look up the bit-reverse
    blocks = [state[int(f"{v:0{n}b}"[::-1], 2) if n > 1 else v].sum(axis=0)
              for v in range(2 ** n)]
    return CqState.from_blocks(System("Xn", 2 ** n, classical=True),
                               (System("E", d_e),), blocks)


def exact_bit_marginal(spec: SvSourceSpec) -> np.ndarray:
    """P(x^n) of the exact output, little-endian bit packing."""
    rho = simulate_sv_exact(spec)
    return rho.probs()


def simulate_sv_sample(spec: SvSourceSpec, count: int, seed: int) -> np.ndarray:
    """Monte Carlo trajectories, (count, n) bit array; side information ignored."""
    rng = np.random.default_rng(seed)
    init = spec.initial_blocks()
    p0 = np.array([b.trace().real for b in init])
    p0 = p0 / p0.sum()
    out = np.zeros((count, spec.n), dtype=np.uint8)
    r = rng.choice(len(p0), size=count, p=p0)
    for i, step in enumerate(spec.steps):
        flat = step.kernel.reshape(2 * step.d_out, step.d_in)  # joint (x, r') given r
        cum = np.cumsum(flat.T, axis=1)  # per r_in
        u = rng.uniform(size=count)
        joint = (u[:, None] < cum[r]).argmax(axis=1)
        out[:, i] = joint // step.d_out
        r = joint % step.d_out
    return out


@dataclass(frozen=True)
class ChainingReport:
    entropy: EntropyResult
    bound: float

    @property
    def slack(self) -> float:
        return self.entropy.lower - self.bound

    @property
    def holds(self) -> bool:
        # the certified upper bound must not undercut the guaranteed rate
        return self.entropy.upper >= self.bound - 1e-9

    def to_json_dict(self) -> dict:
        return {"h_min": self.entropy.value, "lower": self.entropy.lower,
                "upper": self.entropy.upper, "bound": self.bound,
                "slack": self.slack, "holds": self.holds}


def check_chaining(spec: SvSourceSpec, gap: float = DEFAULT_GAP) -> ChainingReport:
    """Verify the exact output satisfies the per-step entropy accumulation."""
    rho = simulate_sv_exact(spec)
    h = h_min_blocks(rho.blocks(), gap=gap)
    bound = -spec.n * math.log2(0.5 + spec.mu)
    return ChainingReport(h, bound)


def gen_random_sv_spec(seed: int, n: int | None = None,
                       mu: float | None = None) -> SvSourceSpec:
    """Seeded adversarial source: memory-correlated steps with outcome
    probabilities pushed to the bias boundary, and an initial memory
    entangled (classically) with a quantum adversary system."""
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(2, 5))
    if mu is None:
        mu = float(rng.choice([0.0, 0.1, 0.25, 0.4]))
    d_r = int(rng.integers(1, 5))
    steps = []
    d_in = d_r
    for i in range(n):
        d_out = int(rng.integers(1, 5))
        kernel = np.zeros((2, d_out, d_in))
        for r in range(d_in):
            if rng.uniform() < 0.5:
                p_one = 0.5 + mu if rng.uniform() < 0.5 else 0.5 - mu
            else:
                p_one = float(rng.uniform(0.5 - mu, 0.5 + mu))
            for x, px in enumerate((1.0 - p_one, p_one)):
                split = rng.dirichlet(np.ones(d_out))
                kernel[x, :, r] = px * split
        steps.append(SvStep(kernel))
        d_in = d_out
    blocks = []
    d_e = int(rng.integers(1, 5))
    weights = rng.dirichlet(np.ones(d_r))
    for w in weights:
        g = rng.normal(size=(d_e, d_e)) + 1j * rng.normal(size=(d_e, d_e))
        m = g @ g.conj().T
        blocks.append(w * m / m.trace().real)
    rho_init = CqState.from_blocks(System("R0", d_r, classical=True),
                                   (System("E", d_e),), blocks)
    return SvSourceSpec(mu, tuple(steps), rho_init)


# ---------------------------------------------------------------------------
# Output length and security calculators


@dataclass(frozen=True)
class DiraParams:
    """Inputs of the output-length calculation.

    n rounds with certified per-round rate h bits, source bias mu,
    target security eps, smoothing share eps_s, and the coefficient c of
    the sqrt(n) second-order term (exogenous; no default is fabricated).

    ``privatized`` documents that the extraction is strong in the second
    source, so its bits may be published afterwards.  It changes no
    numbers; the bound already conditions on them.
    """

    n: int
    h: float
    mu: float
    eps: float
    eps_s: float
    c: float = 0.0
    privatized: bool = False

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need at least one round")
        if self.h < 0:
            raise ValueError("per-round rate must be non-negative")
        if not 0.0 <= self.mu < 0.5:
            raise ValueError("bias must lie in [0, 1/2)")
        if not 0.0 < self.eps_s < self.eps:
            raise ValueError("need 0 < eps_s < eps")
        if self.c < 0:
            raise ValueError("second-order coefficient must be non-negative")

    @property
    def k2(self) -> float:
        return -math.log2(0.5 + self.mu)


@dataclass(frozen=True)
class RateResult:
    m: int
    flag: bool
    raw: float
    privatized: bool = False

    def to_json_dict(self) -> dict:
        return {"m": self.m, "rate_condition_violated": self.flag,
                "raw": self.raw, "privatized": self.privatized}


def dira_rate(p: DiraParams) -> RateResult:
    """Extractable bits: floor of n/2 (2 k2 + h - 2) - log2(1/(2(eps-eps_s))) - c sqrt(n).

    Returns zero with the violation flag when 2 k2 + h <= 2 or the
    expression is non-positive.  Flooring only shrinks the output, which
    is always safe for security.
    """
    raw = (0.5 * p.n * (2.0 * p.k2 + p.h - 2.0)
           - math.log2(1.0 / (2.0 * (p.eps - p.eps_s)))
           - p.c * math.sqrt(p.n))
    if 2.0 * p.k2 + p.h <= 2.0 or raw <= 0.0:
        return RateResult(0, True, raw, p.privatized)
    return RateResult(int(math.floor(raw)), False, raw, p.privatized)


def dira_epsilon(p: DiraParams, m: int) -> float:
    """Security parameter achieved when extracting m bits.

    Evaluates eps_s + 1/2 sqrt(2^(2m + 2n - n h + c sqrt(n) - 2 n k2)) with
    the exponent handled in the log domain.
    """
    if m < 0:
        raise ValueError("output length must be non-negative")
    exponent = 2.0 * m + 2.0 * p.n - p.n * p.h + p.c * math.sqrt(p.n) - 2.0 * p.n * p.k2
    half_exp = 0.5 * exponent
    if half_exp > 1000.0:
        return math.inf
    if half_exp < -1060.0:
        return p.eps_s
    return p.eps_s + 0.5 * 2.0 ** half_exp
