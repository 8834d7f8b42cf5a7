"""Branch-sequence engine: perturbed rational-power iterations.

The driving rule multiplies by p/q whenever the state's scaled integer part
sits in a privileged residue class mod q^2, and divides by q otherwise.  Two
equivalent formulations are implemented: the two-arm map (`step_v1`) and the
valuation form (`step_v2`/`iterate_v2`) that jumps directly between states
satisfying the multiply condition, recording how many divisions were
swallowed (g), their running sum (e), and the accumulated scaled
perturbation (Sigma).

Every quantity is an ExactRational; every recorded trajectory carries enough
history (r, g, e, Sigma per step) for the downstream checkers to re-derive
everything independently.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .numkernel import (
    ExactRational,
    InternalCheckError,
    floor_scale,
    format_rational,
    frac_scale,
)


class ParameterError(ValueError):
    """A parameter-block invariant is violated; named in the message."""


class AdmissibilityError(ValueError):
    """A perturbation leaves the admissible interval [-{S}, 1-{S})."""


class PreconditionError(ValueError):
    """An operation's stated precondition does not hold for the input."""


@dataclass(frozen=True)
class BranchParams:
    """Validated (p, q, alpha, beta, xi) block with p = alpha*q + beta."""

    p: int
    q: int
    alpha: int
    beta: int
    xi: Fraction


def validate_params(p: int, q: int, xi: ExactRational) -> BranchParams:
    """Euclidean-divide p by q and check every parameter invariant by name."""
    xi = Fraction(xi)
    if not (isinstance(q, int) and q > 1):
        raise ParameterError(f"q-range: need integer q > 1, got {q}")
    if not (isinstance(p, int) and p > q):
        raise ParameterError(f"p-range: need integer p > q = {q}, got {p}")
    if math.gcd(p, q) != 1:
        raise ParameterError(f"coprimality: gcd({p}, {q}) = {math.gcd(p, q)} != 1")
    alpha, beta = divmod(p, q)
    if not 1 <= beta <= q - 1:
        raise ParameterError(f"beta-range: remainder {beta} outside [1, {q - 1}]")
    if alpha < 1:
        raise ParameterError(f"alpha-range: quotient {alpha} < 1")
    if alpha + beta > q:
        raise ParameterError(f"alpha+beta: {alpha} + {beta} = {alpha + beta} > q = {q}")
    if xi <= 1:
        raise ParameterError(f"xi-range: need xi > 1, got {format_rational(xi)}")
    if _is_power_of(xi, q):
        raise ParameterError(f"xi-power-of-q: {format_rational(xi)} is an integer power of {q}")
    return BranchParams(p=p, q=q, alpha=alpha, beta=beta, xi=xi)


def _is_power_of(x: Fraction, q: int) -> bool:
    if x.denominator != 1:
        return False
    m = x.numerator
    if m < 1:
        return False
    while m % q == 0:
        m //= q
    return m == 1


@dataclass(frozen=True)
class PerturbationSpec:
    """Policy producing the per-step perturbation r_n.

    kinds:
      zero         r_n = 0
      syracuse     r_n = c / q**g_n, with g_n the valuation recorded when
                   S_n was produced (g_0 as recorded on the first step)
      explicit     r_n = values[n] (cycling when cycle=True)
      grid_probe   r_n = -{S_n} + t_n/resolution with t_n drawn by a keyed
                   hash of (seed, n); always admissible, covers negative r
    """

    kind: str
    c: Optional[Fraction] = None
    values: Optional[tuple[Fraction, ...]] = None
    cycle: bool = False
    resolution: Optional[int] = None
    seed: int = 0

    @classmethod
    def zero(cls) -> "PerturbationSpec":
        return cls(kind="zero")

    @classmethod
    def syracuse(cls, c: ExactRational) -> "PerturbationSpec":
        c = Fraction(c)
        if c <= 0:
            raise ParameterError(f"syracuse perturbation needs c > 0, got {format_rational(c)}")
        return cls(kind="syracuse", c=c)

    @classmethod
    def explicit(cls, values, cycle: bool = False) -> "PerturbationSpec":
        vals = tuple(Fraction(v) for v in values)
        if not vals:
            raise ParameterError("explicit perturbation needs at least one value")
        return cls(kind="explicit", values=vals, cycle=cycle)

    @classmethod
    def grid_probe(cls, resolution: int, seed: int = 0) -> "PerturbationSpec":
        if resolution < 1:
            raise ParameterError(f"grid_probe resolution must be >= 1, got {resolution}")
        return cls(kind="grid_probe", resolution=resolution, seed=seed)

    @property
    def deterministic(self) -> bool:
        """Whether equal states are guaranteed equal successors."""
        return self.kind in ("zero", "syracuse") or (self.kind == "explicit" and self.cycle)

    def value_for(self, params: BranchParams, S: Fraction, n: int, g: int) -> Fraction:
        if self.kind == "zero":
            return Fraction(0)
        if self.kind == "syracuse":
            return self.c / Fraction(params.q) ** g
        if self.kind == "explicit":
            if self.cycle:
                return self.values[n % len(self.values)]
            if n >= len(self.values):
                raise AdmissibilityError(f"explicit perturbation values exhausted at step {n}")
            return self.values[n]
        if self.kind == "grid_probe":
            digest = hashlib.sha256(f"{self.seed}:{n}".encode()).digest()
            t = int.from_bytes(digest[:8], "big") % self.resolution
            return -frac_scale(S, params.q, 0) + Fraction(t, self.resolution)
        raise ParameterError(f"unknown perturbation kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "syracuse":
            return f"syracuse(c={format_rational(self.c)})"
        if self.kind == "explicit":
            vals = ",".join(format_rational(v) for v in self.values)
            return f"explicit([{vals}]{', cycle' if self.cycle else ''})"
        return f"grid_probe(resolution={self.resolution}, seed={self.seed})"


@dataclass(frozen=True)
class BranchStep:
    """One recorded state: S_n plus the bookkeeping that produced it.

    r is the perturbation applied *at* this step (absent on the final step),
    g the number of divisions swallowed producing S_n (g_0 as normalized),
    e the running sum of g, Sigma the accumulated scaled perturbation.
    """

    n: int
    S: Fraction
    r: Optional[Fraction]
    g: int
    e: int
    Sigma: Fraction

    def __post_init__(self):
        if self.S < 1:
            raise ValueError(f"corrupted state: S_{self.n} = {format_rational(self.S)} < 1")
        if self.g < 0 or self.e < 0:
            raise ValueError(f"negative valuation bookkeeping at step {self.n}")
        if self.r is not None:
            _check_admissible(self.S, self.r, self.n)


def _check_admissible(S: Fraction, r: Fraction, n: int) -> None:
    frac = S - (S.numerator // S.denominator)
    if not (-frac <= r < 1 - frac):
        raise AdmissibilityError(
            f"r_{n} = {format_rational(r)} outside admissible interval "
            f"[{format_rational(-frac)}, {format_rational(1 - frac)}) at "
            f"S_{n} = {format_rational(S)}"
        )


@dataclass(frozen=True)
class BranchTrajectory:
    """Immutable record of an iteration run; steps[0].S == xi / q**g0."""

    params: BranchParams
    xi: Fraction
    steps: tuple[BranchStep, ...]
    spec_desc: str

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, n: int) -> BranchStep:
        return self.steps[n]

    @property
    def S0(self) -> Fraction:
        return self.steps[0].S


@dataclass(frozen=True)
class DerivedStep:
    """Split of S_n into rational-power core and perturbation remainder."""

    C: Fraction
    Delta: Fraction
    omega: Fraction
    Omega: Fraction
    Z: Fraction


def rational_power(params: BranchParams, n: int) -> Fraction:
    """xi * (p/q)**n, exactly."""
    if n < 0:
        raise ValueError(f"negative index {n}")
    return params.xi * Fraction(params.p**n, params.q**n)


def branch_condition(x: ExactRational, q: int) -> bool:
    """True iff floor(x/q) mod q^2 is 0 or q^2 - 1 (the multiply condition)."""
    x = Fraction(x)
    if x < 1:
        raise PreconditionError(f"branch condition needs x >= 1, got {format_rational(x)}")
    residue = floor_scale(x, q, 1) % (q * q)
    return residue == 0 or residue == q * q - 1


def theta_valuation(x: ExactRational, q: int) -> int:
    """Smallest g >= 0 with the multiply condition holding for x / q**g.

    Termination is guaranteed (the scaled floor eventually reaches 0); the
    scan still carries a hard cap so a bookkeeping bug cannot loop.
    """
    x = Fraction(x)
    if x < 1:
        raise PreconditionError(f"theta valuation needs x >= 1, got {format_rational(x)}")
    m = x.numerator // x.denominator
    cap = 2
    while m:
        m //= q
        cap += 1
    scaled = x
    for g in range(cap + 1):
        if scaled >= 1 and branch_condition(scaled, q):
            return g
        scaled = scaled / q
    raise InternalCheckError(f"theta valuation scan exceeded cap {cap} at x = {format_rational(x)}")


def step_v2(
    params: BranchParams,
    step: BranchStep,
    spec: Optional[PerturbationSpec] = None,
    r: Optional[ExactRational] = None,
) -> BranchStep:
    """Advance one valuation-form step; r overrides the spec when given."""
    S = step.S
    if S < 1:
        raise ValueError(f"corrupted state: S_{step.n} = {format_rational(S)} < 1")
    if r is None:
        if spec is None:
            raise ValueError("step_v2 needs a perturbation spec or an explicit r")
        r = spec.value_for(params, S, step.n, step.g)
    r = Fraction(r)
    _check_admissible(S, r, step.n)
    q = params.q
    S_prime = params.p * (S + r) / q
    g_next = theta_valuation(S_prime, q)
    S_next = S_prime / Fraction(q) ** g_next
    e_next = step.e + g_next
    sigma_next = step.Sigma + r * Fraction(q ** (step.n + step.e), params.p**step.n)
    return BranchStep(n=step.n + 1, S=S_next, r=None, g=g_next, e=e_next, Sigma=sigma_next)


def iterate_v2(
    params: BranchParams,
    S0: ExactRational,
    spec: PerturbationSpec,
    steps: int,
    g0: int = 0,
) -> BranchTrajectory:
    """Run `steps` applications of step_v2 from S0, recording everything.

    S0 must satisfy the multiply condition (the start-state normalization).
    g0 > 0 expresses a start state already divided down from xi = S0 * q**g0;
    it feeds e_0 and any valuation-indexed perturbation policy.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    S0 = Fraction(S0)
    if not branch_condition(S0, params.q):
        raise PreconditionError(
            f"start state {format_rational(S0)} fails the multiply condition for q = {params.q}"
        )
    xi = S0 * Fraction(params.q) ** g0
    current = BranchStep(n=0, S=S0, r=None, g=g0, e=g0, Sigma=Fraction(0))
    recorded = []
    below_q_seen = False
    for _ in range(steps):
        r = spec.value_for(params, current.S, current.n, current.g)
        nxt = step_v2(params, current, r=r)
        recorded.append(replace(current, r=r))
        current = nxt
        # once the state drops below q it must stay in [1, q) with g in {0, 1}
        if below_q_seen and (current.S >= params.q or current.g > 1):
            raise InternalCheckError(
                f"confinement violated at step {current.n}: "
                f"S = {format_rational(current.S)}, g = {current.g}"
            )
        if current.S < params.q:
            below_q_seen = True
    recorded.append(current)
    return BranchTrajectory(params=params, xi=xi, steps=tuple(recorded), spec_desc=spec.describe())


def step_v1(
    params: BranchParams,
    T: ExactRational,
    spec: PerturbationSpec,
    n: int = 0,
    g: int = 0,
) -> tuple[Fraction, bool]:
    """Two-arm map: multiply arm when the condition holds, else divide by q.

    n and g give the perturbation policy its context (step index and the
    valuation of the current state); the divide arm consumes no perturbation.
    """
    T = Fraction(T)
    if T < 1:
        raise ValueError(f"corrupted state: T = {format_rational(T)} < 1")
    if branch_condition(T, params.q):
        r = spec.value_for(params, T, n, g)
        _check_admissible(T, r, n)
        return params.p * (T + r) / params.q, True
    return T / params.q, False


def iterate_v1(
    params: BranchParams,
    S0: ExactRational,
    spec: PerturbationSpec,
    branch_steps: int,
    g0: int = 0,
) -> list[tuple[Fraction, int]]:
    """Run the two-arm map, collecting the multiply-condition states.

    Returns [(S, g)] where g counts the divide-arm steps since the previous
    collected state; this is the subsequence the valuation form jumps along.
    """
    T = Fraction(S0)
    if not branch_condition(T, params.q):
        raise PreconditionError(f"start state {format_rational(S0)} fails the multiply condition")
    collected = [(T, g0)]
    n = 0
    cur_g = g0
    while len(collected) <= branch_steps:
        T, took_branch = step_v1(params, T, spec, n=n, g=cur_g)
        if not took_branch:
            raise InternalCheckError("collected state stopped satisfying the multiply condition")
        n += 1
        divides = 0
        while not branch_condition(T, params.q):
            T, took_branch = step_v1(params, T, spec, n=n, g=divides)
            if took_branch:
                raise InternalCheckError("divide arm fired on a multiply-condition state")
            divides += 1
        cur_g = divides
        collected.append((T, cur_g))
    return collected


def closed_form(params: BranchParams, trajectory: BranchTrajectory, n: int) -> Fraction:
    """(p**n / q**(n+e_n)) * (xi + Sigma_n), from recorded history only."""
    step = trajectory.steps[n]
    scale = Fraction(params.p**n, params.q ** (n + step.e))
    return scale * (trajectory.xi + step.Sigma)


def derived(params: BranchParams, trajectory: BranchTrajectory, n: int) -> DerivedStep:
    """Split S_n = C_n + Delta_n and the largest-perturbation quantities."""
    return derived_steps(params, trajectory, n + 1)[n]


def derived_steps(
    params: BranchParams, trajectory: BranchTrajectory, upto: Optional[int] = None
) -> list[DerivedStep]:
    """DerivedStep for every n < upto (default: whole trajectory), in O(n)."""
    if upto is None:
        upto = len(trajectory.steps)
    out = []
    omega = Fraction(0)
    pn = 1
    for n in range(upto):
        step = trajectory.steps[n]
        scale = Fraction(pn, params.q ** (n + step.e))
        C = trajectory.xi * scale
        Delta = step.S - C
        Omega = scale * omega
        Z = C + Omega
        if Delta != scale * step.Sigma:
            raise InternalCheckError(
                f"decomposition mismatch at step {n}: S - C != scaled Sigma"
            )
        out.append(DerivedStep(C=C, Delta=Delta, omega=omega, Omega=Omega, Z=Z))
        if step.r is not None:
            if step.r < 0:
                raise PreconditionError(
                    f"largest-perturbation split needs nonnegative r, got r_{n} = "
                    f"{format_rational(step.r)}"
                )
            omega = max(omega, step.r * Fraction(params.q ** (n + step.e), pn))
        pn *= params.p
    return out
