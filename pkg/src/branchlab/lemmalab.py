"""Empirical claim checkers with machine-checkable certificates.

Every checker either certifies its claim on the tested instances or emits a
minimal counterexample certificate that re-validates by direct recomputation
through the arithmetic primitives.  A checker's contract is always "pass on
the tested range or produce a valid certificate", never "the claim is true".

Claim registry ids (used in reports, certificates and the CLI):

  Lemma2.1        scaled floors of p*(S+r) are r-independent past position 2
  Corollary2.1    the same transfer applied to the perturbation remainder
  Lemma2.2        floor-addition implication, two interpretations
  Lemma2.3        one-step recurrence of the largest-perturbation floors
  Theorem2.1      largest-perturbation domination of the remainder floors
  Corollary2.2a/b/c   the derived bound chains (with the n=1 equality Eq2.8.e)
  Definition1.4   determinism: equal integer parts force equal successors
  Lemma3.3        min bound over a recorded prefix
  Lemma4.1        odd-trajectory closed form
  Lemma4.2        embedding consistency (h-derived vs valuation-derived)
  Eq1.3.b         perturbation admissibility
  Eq4.4 / Eq4.4.e / Eq4.5.a   binary structure of embedded states
  Eq4.5.a-literal the single-formula reading, kept as a divergence monitor
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Optional

from .numkernel import ExactRational, floor_scale, format_rational, rational
from .branch import (
    BranchParams,
    BranchStep,
    BranchTrajectory,
    DerivedStep,
    PerturbationSpec,
    PreconditionError,
    branch_condition,
    derived_steps,
    step_v2,
)

PASS = "pass"
VIOLATED = "violated"
PRECONDITION_FAILED = "precondition_failed"


@dataclass(frozen=True)
class Counterexample:
    """Self-contained witness of one violated relation.

    witness holds every value needed to replay the violation (rationals as
    'a/b' strings); lhs/rhs are the two sides as recomputed at emission time.
    """

    claim_id: str
    witness: dict
    lhs: str
    rhs: str

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "witness": dict(self.witness),
            "lhs": self.lhs,
            "rhs": self.rhs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Counterexample":
        return cls(claim_id=d["claim_id"], witness=dict(d["witness"]), lhs=d["lhs"], rhs=d["rhs"])


@dataclass(frozen=True)
class ClaimReport:
    """Outcome of one checker run over one instance family."""

    claim_id: str
    instance: str
    verdict: str
    certificate: Optional[Counterexample]
    tested_count: int
    extra_certificates: tuple[Counterexample, ...] = ()

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def all_certificates(self) -> tuple[Counterexample, ...]:
        primary = (self.certificate,) if self.certificate else ()
        return primary + self.extra_certificates


@dataclass(frozen=True)
class AsymptoticRow:
    n: int
    e: int
    ratio: Optional[Fraction]
    Sigma: Fraction
    omega: Optional[Fraction]
    growth: Fraction
    floor_S: int
    above_threshold: Optional[bool]
    approx_above: Optional[bool]


@dataclass(frozen=True)
class AsymptoticReport:
    """Prefix diagnostics: never a statement about limits."""

    instance: str
    rows: tuple[AsymptoticRow, ...]
    threshold_log: float
    threshold_precision: float
    classification: str
    period: Optional[int] = None
    preperiod: Optional[int] = None
    theorem31_case: str = "undetermined"
    determinism_validated: Optional[bool] = None
    note: str = "prefix diagnostic, not a limit statement"


def _w(**kwargs) -> dict:
    """Stringify witness values ('a/b' for rationals, str otherwise)."""
    out = {}
    for key, value in kwargs.items():
        if isinstance(value, Fraction):
            out[key] = format_rational(value)
        else:
            out[key] = str(value)
    return out


# ---------------------------------------------------------------------------
# independence of scaled floors under admissible perturbation


def _sweep_points(S: Fraction, q: int, grid: int) -> list[Fraction]:
    """Admissible r grid: -{S} + t/grid for t < grid, plus the near-sup point."""
    frac_S = S - (S.numerator // S.denominator)
    points = [-frac_S + Fraction(t, grid) for t in range(grid)]
    sup_approach = 1 - frac_S - Fraction(1, q**8)
    if -frac_S <= sup_approach < 1 - frac_S and sup_approach not in points[-1:]:
        points.append(sup_approach)
    return [r for r in points if -frac_S <= r < 1 - frac_S]


def independence_probe(
    params: BranchParams,
    step: BranchStep,
    k_max: int = 6,
    grid: int = 256,
    derived: Optional[DerivedStep] = None,
) -> ClaimReport:
    """Sweep admissible r; floors of p*(S+r)/q^(1+k) must not move for k >= 2.

    With a DerivedStep supplied, also checks the transfer to the remainder:
    floor(Delta + r) and floor(p*(Delta+r)/q^(1+k)) for positive r.
    States failing the multiply condition get a precondition_failed report
    demonstrating (when the sweep moves a floor) why the hypothesis matters.
    """
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2, got {k_max}")
    p, q = params.p, params.q
    S = step.S
    instance = f"p={p} q={q} S={format_rational(S)} n={step.n} kmax={k_max} grid={grid}"
    ks = range(2, k_max + 1)
    precondition_ok = branch_condition(S, q)

    # integer fast path: S + r_t = floor(S) + t/grid
    F = S.numerator // S.denominator
    base = [floor_scale(p * S, q, 1 + k) for k in ks]
    tested = 0
    sweep = [(p * (F * grid + t), grid) for t in range(grid)]
    sup_num = (F + 1) * q**8 - 1
    sweep.append((p * sup_num, q**8))

    def first_moving_floor() -> Optional[tuple[Fraction, int, int]]:
        nonlocal tested
        for num, den in sweep:
            for i, k in enumerate(ks):
                tested += 1
                got = num // (den * q ** (1 + k))
                if got != base[i]:
                    r = Fraction(num, p * den) - S
                    return r, k, got
        return None

    moved = first_moving_floor()

    if not precondition_ok:
        cert = None
        if moved is not None:
            r, k, got = moved
            cert = Counterexample(
                claim_id="Lemma2.1-hypothesis",
                witness=_w(p=p, q=q, S=S, r1=Fraction(0) - (S - F), r2=r, k=k),
                lhs=str(sweep[0][0] // (sweep[0][1] * q ** (1 + k))),
                rhs=str(got),
            )
        return ClaimReport(
            claim_id="Lemma2.1",
            instance=instance + " [multiply condition fails at S]",
            verdict=PRECONDITION_FAILED,
            certificate=cert,
            tested_count=tested,
        )

    if moved is not None:
        r, k, got = moved
        return ClaimReport(
            claim_id="Lemma2.1",
            instance=instance,
            verdict=VIOLATED,
            certificate=Counterexample(
                claim_id="Lemma2.1",
                witness=_w(p=p, q=q, S=S, r=r, k=k),
                lhs=str(got),
                rhs=str(base[k - 2]),
            ),
            tested_count=tested,
        )

    if derived is not None:
        delta = derived.Delta
        frac_S = S - F
        base_int = floor_scale(delta, q, 0)
        base_delta = [floor_scale(p * delta, q, 1 + k) for k in ks]
        K = delta - frac_S  # Delta + r_t = K + t/grid
        L = (K.denominator * grid) // math.gcd(K.denominator, grid)
        lk, lg = L // K.denominator, L // grid
        t_min = (frac_S.numerator * grid) // frac_S.denominator + 1 if frac_S > 0 else 1
        dsweep = [(K.numerator * lk + t * lg, L) for t in range(t_min, grid)]
        sup_r = 1 - frac_S - Fraction(1, q**8)
        if sup_r > 0:
            ds = delta + sup_r
            dsweep.append((ds.numerator, ds.denominator))
        for num, den in dsweep:
            tested += 1
            got_int = num // den
            r = Fraction(num, den) - delta
            if got_int != base_int:
                return ClaimReport(
                    claim_id="Corollary2.1",
                    instance=instance,
                    verdict=VIOLATED,
                    certificate=Counterexample(
                        claim_id="Corollary2.1",
                        witness=_w(p=p, q=q, Delta=delta, r=r, relation="integer_part"),
                        lhs=str(got_int),
                        rhs=str(base_int),
                    ),
                    tested_count=tested,
                )
            for i, k in enumerate(ks):
                tested += 1
                got = (p * num) // (den * q ** (1 + k))
                if got != base_delta[i]:
                    return ClaimReport(
                        claim_id="Corollary2.1",
                        instance=instance,
                        verdict=VIOLATED,
                        certificate=Counterexample(
                            claim_id="Corollary2.1",
                            witness=_w(p=p, q=q, Delta=delta, r=r, k=k, relation="scaled_floor"),
                            lhs=str(got),
                            rhs=str(base_delta[i]),
                        ),
                        tested_count=tested,
                    )

    return ClaimReport(
        claim_id="Lemma2.1" if derived is None else "Lemma2.1+Corollary2.1",
        instance=instance,
        verdict=PASS,
        certificate=None,
        tested_count=tested,
    )


# ---------------------------------------------------------------------------
# floor-addition implication search


def _enumeration(max_den: int, max_val: int) -> tuple[list[Fraction], list[Fraction]]:
    values = set()
    for den in range(1, max_den + 1):
        for num in range(0, den * max_val + 1):
            values.add(Fraction(num, den))
    by_value = sorted(values)
    a_order = sorted(values, key=lambda v: (v.denominator, v))
    return a_order, by_value


def floor_addition_search(max_den: int, max_val: int, interpretation: str) -> ClaimReport:
    """Exhaustive search for (A, B, B') with B < B' violating the implication
    "equal floors of the sums => equal floors of B and B'".

    interpretation 'integer_part' takes the hypothesis at face value
    (floor(A+B) == floor(A+B')); 'all_scales' strengthens it to every scale
    floor((A+B)/2^k) == floor((A+B')/2^k), k >= 0.  First counterexample in
    lexicographic (denominator of A, A, B, B') order, so results are
    reproducible.
    """
    if interpretation not in ("integer_part", "all_scales"):
        raise ValueError(f"unknown interpretation {interpretation!r}")
    q = 2
    k_top = max(1, math.ceil(math.log(2 * max_val + 1, q))) + 1
    a_order, by_value = _enumeration(max_den, max_val)
    instance = f"max_den={max_den} max_val={max_val} interpretation={interpretation} q={q}"
    tested = 0

    for A in a_order:
        for i, B in enumerate(by_value):
            floor_B = B.numerator // B.denominator
            sum_B = A + B
            hypothesis_floors = [floor_scale(sum_B, q, k) for k in range(k_top + 1)]
            for B_prime in by_value[i + 1 :]:
                sum_Bp = A + B_prime
                # every scaled floor is nondecreasing in B', so the first
                # B' breaking the hypothesis kills it for all later ones
                if floor_scale(sum_Bp, q, 0) != hypothesis_floors[0]:
                    break
                if interpretation == "all_scales" and any(
                    floor_scale(sum_Bp, q, k) != hypothesis_floors[k] for k in range(1, k_top + 1)
                ):
                    break
                tested += 1
                if B_prime.numerator // B_prime.denominator != floor_B:
                    cert = Counterexample(
                        claim_id="Lemma2.2",
                        witness=_w(
                            q=q, interpretation=interpretation, A=A, B=B, Bp=B_prime, k_top=k_top
                        ),
                        lhs=str(floor_B),
                        rhs=str(B_prime.numerator // B_prime.denominator),
                    )
                    return ClaimReport(
                        claim_id="Lemma2.2",
                        instance=instance,
                        verdict=VIOLATED,
                        certificate=cert,
                        tested_count=tested,
                    )
    return ClaimReport(
        claim_id="Lemma2.2", instance=instance, verdict=PASS, certificate=None, tested_count=tested
    )


# ---------------------------------------------------------------------------
# largest-perturbation domination and its bound chains

_DOMINATION_CLAIMS = ("Eq2.8.e", "Theorem2.1", "Lemma2.3", "Corollary2.2a", "Corollary2.2b", "Corollary2.2c")


def domination_check(
    params: BranchParams,
    trajectory: BranchTrajectory,
    k_max: int = 6,
    claims: Optional[set] = None,
) -> ClaimReport:
    """Check the domination floors, their recurrence, and the bound chains.

    Requires strictly positive recorded perturbations.  The n=1 equality
    Delta_1 == Omega_1 is asserted exactly; lower bounds are non-strict at
    n=1 (where equality is forced) and strict from n=2 on.  Scans the whole
    trajectory, recording the first violation per claim; the primary
    certificate is the first violation overall.
    """
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2, got {k_max}")
    active = set(_DOMINATION_CLAIMS) if claims is None else set(claims)
    for step in trajectory.steps[:-1]:
        if step.r is None or step.r <= 0:
            raise PreconditionError("domination needs strictly positive perturbations")
    p, q = params.p, params.q
    q2 = q * q
    rows = derived_steps(params, trajectory)
    steps = trajectory.steps
    N = len(steps) - 1
    instance = f"p={p} q={q} S0={format_rational(trajectory.S0)} steps={N} kmax={k_max}"
    tested = 0
    firsts: dict[str, Counterexample] = {}
    order: list[str] = []

    def record(claim: str, cert: Counterexample) -> None:
        if claim not in firsts:
            firsts[claim] = cert
            order.append(claim)

    for n in range(1, N + 1):
        d, s = rows[n], steps[n]
        if "Eq2.8.e" in active and n == 1:
            tested += 1
            if d.Delta != d.Omega:
                record(
                    "Eq2.8.e",
                    Counterexample(
                        claim_id="Eq2.8.e",
                        witness=_w(Delta=d.Delta, Omega=d.Omega, n=n),
                        lhs=format_rational(d.Delta),
                        rhs=format_rational(d.Omega),
                    ),
                )
        if "Theorem2.1" in active and "Theorem2.1" not in firsts:
            for k in range(2, k_max + 1):
                tested += 1
                lhs = floor_scale(d.Delta, q, k)
                rhs = floor_scale(d.Omega, q, k)
                if lhs != rhs:
                    record(
                        "Theorem2.1",
                        Counterexample(
                            claim_id="Theorem2.1",
                            witness=_w(q=q, Delta=d.Delta, Omega=d.Omega, k=k, n=n),
                            lhs=str(lhs),
                            rhs=str(rhs),
                        ),
                    )
                    break
        if "Corollary2.2a" in active and "Corollary2.2a" not in firsts:
            tested += 1
            lower_ok = d.Omega <= d.Delta if n == 1 else d.Omega < d.Delta
            upper_ok = d.Delta < d.Omega + q2
            if not (lower_ok and upper_ok):
                relation = "upper" if lower_ok else ("lower" if n == 1 else "lower-strict")
                record(
                    "Corollary2.2a",
                    Counterexample(
                        claim_id="Corollary2.2a",
                        witness=_w(q=q, Delta=d.Delta, Omega=d.Omega, n=n, relation=relation),
                        lhs=format_rational(d.Delta),
                        rhs=format_rational(d.Omega),
                    ),
                )
        if "Corollary2.2b" in active and "Corollary2.2b" not in firsts:
            tested += 1
            lower_ok = d.Z <= s.S if n == 1 else d.Z < s.S
            upper_ok = s.S < d.Z + q2
            if not (lower_ok and upper_ok):
                relation = "upper" if lower_ok else ("lower" if n == 1 else "lower-strict")
                record(
                    "Corollary2.2b",
                    Counterexample(
                        claim_id="Corollary2.2b",
                        witness=_w(q=q, S=s.S, Z=d.Z, n=n, relation=relation),
                        lhs=format_rational(s.S),
                        rhs=format_rational(d.Z),
                    ),
                )
        if "Corollary2.2c" in active and "Corollary2.2c" not in firsts:
            tested += 1
            scale = Fraction(q ** (n + s.e), p**n)
            lower_ok = d.omega <= s.Sigma if n == 1 else d.omega < s.Sigma
            upper_ok = s.Sigma < d.omega + scale * q2
            if not (lower_ok and upper_ok):
                relation = "upper" if lower_ok else ("lower" if n == 1 else "lower-strict")
                record(
                    "Corollary2.2c",
                    Counterexample(
                        claim_id="Corollary2.2c",
                        witness=_w(
                            q=q, Sigma=s.Sigma, omega=d.omega, scale=scale, n=n, relation=relation
                        ),
                        lhs=format_rational(s.Sigma),
                        rhs=format_rational(d.omega),
                    ),
                )
    if "Lemma2.3" in active:
        for n in range(0, N):
            if "Lemma2.3" in firsts:
                break
            for k in range(2, k_max + 1):
                tested += 1
                lhs = floor_scale(rows[n + 1].Omega, q, k)
                rhs = floor_scale(p * rows[n].Omega, q, 1 + steps[n + 1].g + k)
                if lhs != rhs:
                    record(
                        "Lemma2.3",
                        Counterexample(
                            claim_id="Lemma2.3",
                            witness=_w(
                                p=p,
                                q=q,
                                Omega=rows[n].Omega,
                                Omega_next=rows[n + 1].Omega,
                                g_next=steps[n + 1].g,
                                k=k,
                                n=n,
                            ),
                            lhs=str(lhs),
                            rhs=str(rhs),
                        ),
                    )
                    break

    certs = [firsts[c] for c in order]
    return ClaimReport(
        claim_id="Theorem2.1" if claims is None else "+".join(sorted(active)),
        instance=instance,
        verdict=VIOLATED if certs else PASS,
        certificate=certs[0] if certs else None,
        tested_count=tested,
        extra_certificates=tuple(certs[1:]),
    )


# ---------------------------------------------------------------------------
# periodicity, asymptotics, min bound, determinism


def cycle_detect(
    params: BranchParams,
    S0: ExactRational,
    spec: PerturbationSpec,
    max_steps: int,
    g0: int = 0,
) -> AsymptoticReport:
    """Iterate up to max_steps looking for an exact state repeat.

    Deterministic perturbation policies only; on a repeat the prefix is also
    swept for the determinism implication (equal integer parts must have led
    to equal successors).
    """
    if not spec.deterministic:
        raise PreconditionError(f"cycle detection needs a deterministic policy, got {spec.describe()}")
    S0 = Fraction(S0)
    seen: dict[Fraction, int] = {S0: 0}
    current = BranchStep(n=0, S=S0, r=None, g=g0, e=g0, Sigma=Fraction(0))
    if not branch_condition(S0, params.q):
        raise PreconditionError(f"start state {format_rational(S0)} fails the multiply condition")
    recorded = []
    repeat: Optional[tuple[int, int]] = None
    for _ in range(max_steps):
        r = spec.value_for(params, current.S, current.n, current.g)
        nxt = step_v2(params, current, r=r)
        recorded.append(replace(current, r=r))
        current = nxt
        if current.S in seen:
            repeat = (seen[current.S], current.n)
            break
        seen[current.S] = current.n
    recorded.append(current)
    trajectory = BranchTrajectory(
        params=params,
        xi=S0 * Fraction(params.q) ** g0,
        steps=tuple(recorded),
        spec_desc=spec.describe(),
    )

    determinism_ok = None
    period = preperiod = None
    if repeat is not None:
        preperiod, at = repeat
        period = at - preperiod
        determinism_ok = determinism_check(trajectory).passed

    base = (
        asymptotic_report(trajectory)
        if len(trajectory.steps) >= 2
        else AsymptoticReport(
            instance="", rows=(), threshold_log=0.0, threshold_precision=1e-12, classification="inconclusive"
        )
    )
    if repeat is not None:
        classification = "periodic"
        instance = f"{base.instance} repeat S_{preperiod + period} = S_{preperiod}"
    else:
        classification = base.classification
        instance = f"{base.instance} no cycle in {max_steps}"
    return AsymptoticReport(
        instance=instance,
        rows=base.rows,
        threshold_log=base.threshold_log,
        threshold_precision=base.threshold_precision,
        classification=classification,
        period=period,
        preperiod=preperiod,
        theorem31_case=base.theorem31_case,
        determinism_validated=determinism_ok,
    )


def asymptotic_report(trajectory: BranchTrajectory) -> AsymptoticReport:
    """Tabulate e_n/n, Sigma, omega and the growth factor; classify the prefix.

    The trichotomy decision is the exact integer comparison q^(n+e_n) vs p^n;
    the logarithmic threshold is display only (precision 1e-12).
    """
    if len(trajectory.steps) < 2:
        raise PreconditionError("asymptotics need a trajectory of length >= 2")
    params = trajectory.params
    p, q = params.p, params.q
    threshold = math.log(p / q) / math.log(q)
    precision = 1e-12

    all_nonneg = all(s.r is None or s.r >= 0 for s in trajectory.steps)
    omegas: list[Optional[Fraction]] = []
    if all_nonneg:
        omega = Fraction(0)
        pn = 1
        for n, s in enumerate(trajectory.steps):
            omegas.append(omega)
            if s.r is not None:
                omega = max(omega, s.r * Fraction(q ** (n + s.e), pn))
            pn *= p
    else:
        omegas = [None] * len(trajectory.steps)

    rows = []
    pn = 1
    for n, s in enumerate(trajectory.steps):
        growth = Fraction(q ** (n + s.e), pn)
        if n == 0:
            ratio = above = approx = None
        else:
            ratio = Fraction(s.e, n)
            above = q ** (n + s.e) > pn
            ratio_f = s.e / n
            approx = None if abs(ratio_f - threshold) <= precision else ratio_f > threshold
        rows.append(
            AsymptoticRow(
                n=n,
                e=s.e,
                ratio=ratio,
                Sigma=s.Sigma,
                omega=omegas[n],
                growth=growth,
                floor_S=s.S.numerator // s.S.denominator,
                above_threshold=above,
                approx_above=approx,
            )
        )
        pn *= p

    seen: dict[Fraction, int] = {}
    period = preperiod = None
    for n, s in enumerate(trajectory.steps):
        if s.S in seen:
            preperiod = seen[s.S]
            period = n - preperiod
            break
        seen[s.S] = n

    N = len(rows) - 1
    if period is not None:
        classification = "periodic"
    else:
        final = rows[N].above_threshold
        mid = rows[max(1, N // 2)].above_threshold
        classification = (
            "inconclusive"
            if final != mid
            else ("ratio-above-threshold" if final else "ratio-below-threshold")
        )

    theorem31_case = "undetermined"
    if all_nonneg and N >= 4:
        changed = [n for n in range(1, N + 1) if omegas[n] != omegas[n - 1]]
        last_change = changed[-1] if changed else 0
        growths = [rows[n].growth for n in range(1, N + 1)]
        if last_change > 3 * N // 4:
            theorem31_case = "case1"
        elif rows[N].growth == min(growths) and rows[N].growth < rows[max(1, N // 2)].growth:
            theorem31_case = "case2"
        elif min(growths[N // 2 :]) >= min(growths[: max(1, N // 2)]):
            theorem31_case = "case3"

    instance = (
        f"p={p} q={q} S0={format_rational(trajectory.S0)} "
        f"spec={trajectory.spec_desc} steps={N}"
    )
    return AsymptoticReport(
        instance=instance,
        rows=tuple(rows),
        threshold_log=threshold,
        threshold_precision=precision,
        classification=classification,
        period=period,
        preperiod=preperiod,
        theorem31_case=theorem31_case,
    )


def min_bound_check(trajectory: BranchTrajectory) -> ClaimReport:
    """min S_n <= q^2 over the recorded prefix (a prefix statement only)."""
    q2 = trajectory.params.q ** 2
    argmin = min(range(len(trajectory.steps)), key=lambda n: trajectory.steps[n].S)
    smallest = trajectory.steps[argmin].S
    instance = (
        f"q^2={q2} argmin=n{argmin} prefix_len={len(trajectory.steps)} "
        "[prefix statement, not a refutation]"
    )
    if smallest <= q2:
        return ClaimReport(
            claim_id="Lemma3.3",
            instance=instance,
            verdict=PASS,
            certificate=None,
            tested_count=len(trajectory.steps),
        )
    return ClaimReport(
        claim_id="Lemma3.3",
        instance=instance,
        verdict=VIOLATED,
        certificate=Counterexample(
            claim_id="Lemma3.3",
            witness=_w(q=trajectory.params.q, min_S=smallest, argmin=argmin),
            lhs=format_rational(smallest),
            rhs=str(q2),
        ),
        tested_count=len(trajectory.steps),
    )


def determinism_check(trajectory: BranchTrajectory) -> ClaimReport:
    """Equal integer parts must force equal successors and next perturbations."""
    if len(trajectory.steps) < 2:
        raise PreconditionError("determinism check needs a trajectory of length >= 2")
    steps = trajectory.steps
    buckets: dict[int, list[int]] = {}
    for n in range(len(steps) - 1):  # states with a recorded successor
        floor_S = steps[n].S.numerator // steps[n].S.denominator
        buckets.setdefault(floor_S, []).append(n)
    tested = 0
    instance = f"S0={format_rational(trajectory.S0)} spec={trajectory.spec_desc} len={len(steps)}"
    for indices in buckets.values():
        for i, m in enumerate(indices):
            for n in indices[i + 1 :]:
                tested += 1
                same_S = steps[m + 1].S == steps[n + 1].S
                r_m, r_n = steps[m + 1].r, steps[n + 1].r
                same_r = r_m == r_n or r_m is None or r_n is None
                if not (same_S and same_r):
                    return ClaimReport(
                        claim_id="Definition1.4",
                        instance=instance,
                        verdict=VIOLATED,
                        certificate=Counterexample(
                            claim_id="Definition1.4",
                            witness=_w(
                                S_m=steps[m].S,
                                S_n=steps[n].S,
                                S_m_next=steps[m + 1].S,
                                S_n_next=steps[n + 1].S,
                                r_m_next=r_m if r_m is not None else "absent",
                                r_n_next=r_n if r_n is not None else "absent",
                                m=m,
                                n=n,
                            ),
                            lhs=format_rational(steps[m + 1].S),
                            rhs=format_rational(steps[n + 1].S),
                        ),
                        tested_count=tested,
                    )
    return ClaimReport(
        claim_id="Definition1.4",
        instance=instance,
        verdict=PASS,
        certificate=None,
        tested_count=tested,
    )


# ---------------------------------------------------------------------------
# certificate replay: independent recomputation per claim family


def _parse(witness: dict, key: str) -> Fraction:
    return rational(witness[key])


def _parse_int(witness: dict, key: str) -> int:
    return int(witness[key])


def _replay_lemma21(w: dict) -> tuple[str, str]:
    p, q, k = _parse_int(w, "p"), _parse_int(w, "q"), _parse_int(w, "k")
    S, r = _parse(w, "S"), _parse(w, "r")
    return str(floor_scale(p * (S + r), q, 1 + k)), str(floor_scale(p * S, q, 1 + k))


def _replay_lemma21_hyp(w: dict) -> tuple[str, str]:
    p, q, k = _parse_int(w, "p"), _parse_int(w, "q"), _parse_int(w, "k")
    S = _parse(w, "S")
    lhs = floor_scale(p * (S + _parse(w, "r1")), q, 1 + k)
    rhs = floor_scale(p * (S + _parse(w, "r2")), q, 1 + k)
    return str(lhs), str(rhs)


def _replay_corollary21(w: dict) -> tuple[str, str]:
    p, q = _parse_int(w, "p"), _parse_int(w, "q")
    delta, r = _parse(w, "Delta"), _parse(w, "r")
    if w["relation"] == "integer_part":
        return str(floor_scale(delta + r, q, 0)), str(floor_scale(delta, q, 0))
    k = _parse_int(w, "k")
    return str(floor_scale(p * (delta + r), q, 1 + k)), str(floor_scale(p * delta, q, 1 + k))


def _replay_lemma22(w: dict) -> tuple[str, str]:
    q = _parse_int(w, "q")
    A, B, Bp = _parse(w, "A"), _parse(w, "B"), _parse(w, "Bp")
    k_top = _parse_int(w, "k_top")
    if w["interpretation"] == "integer_part":
        hypothesis = floor_scale(A + B, q, 0) == floor_scale(A + Bp, q, 0)
    else:
        hypothesis = all(
            floor_scale(A + B, q, k) == floor_scale(A + Bp, q, k) for k in range(k_top + 1)
        )
    if not hypothesis:
        return "hypothesis-holds", "hypothesis-fails"
    return str(floor_scale(B, q, 0)), str(floor_scale(Bp, q, 0))


def _replay_eq28e(w: dict) -> tuple[str, str]:
    return format_rational(_parse(w, "Delta")), format_rational(_parse(w, "Omega"))


def _replay_theorem21(w: dict) -> tuple[str, str]:
    q, k = _parse_int(w, "q"), _parse_int(w, "k")
    return (
        str(floor_scale(_parse(w, "Delta"), q, k)),
        str(floor_scale(_parse(w, "Omega"), q, k)),
    )


def _replay_lemma23(w: dict) -> tuple[str, str]:
    p, q, k, g = (_parse_int(w, key) for key in ("p", "q", "k", "g_next"))
    lhs = floor_scale(_parse(w, "Omega_next"), q, k)
    rhs = floor_scale(p * _parse(w, "Omega"), q, 1 + g + k)
    return str(lhs), str(rhs)


def _bound_violates(relation: str, low: Fraction, mid: Fraction, high: Fraction) -> bool:
    if relation == "lower":
        return not (low <= mid)
    if relation == "lower-strict":
        return not (low < mid)
    return not (mid < high)


def _replay_corollary22a(w: dict) -> tuple[str, str]:
    q = _parse_int(w, "q")
    delta, omega_up = _parse(w, "Delta"), _parse(w, "Omega")
    ok = not _bound_violates(w["relation"], omega_up, delta, omega_up + q * q)
    return ("bound-holds" if ok else "bound-fails"), "bound-holds"


def _replay_corollary22b(w: dict) -> tuple[str, str]:
    q = _parse_int(w, "q")
    S, Z = _parse(w, "S"), _parse(w, "Z")
    ok = not _bound_violates(w["relation"], Z, S, Z + q * q)
    return ("bound-holds" if ok else "bound-fails"), "bound-holds"


def _replay_corollary22c(w: dict) -> tuple[str, str]:
    q = _parse_int(w, "q")
    sigma, omega, scale = _parse(w, "Sigma"), _parse(w, "omega"), _parse(w, "scale")
    ok = not _bound_violates(w["relation"], omega, sigma, omega + scale * q * q)
    return ("bound-holds" if ok else "bound-fails"), "bound-holds"


def _replay_determinism(w: dict) -> tuple[str, str]:
    S_m, S_n = _parse(w, "S_m"), _parse(w, "S_n")
    if S_m.numerator // S_m.denominator != S_n.numerator // S_n.denominator:
        return "hypothesis-holds", "hypothesis-fails"
    S_m_next, S_n_next = _parse(w, "S_m_next"), _parse(w, "S_n_next")
    if S_m_next != S_n_next:
        return format_rational(S_m_next), format_rational(S_n_next)
    if w.get("r_m_next") not in (None, "absent") and w.get("r_n_next") not in (None, "absent"):
        return w["r_m_next"], w["r_n_next"]
    return format_rational(S_m_next), format_rational(S_n_next)


def _replay_min_bound(w: dict) -> tuple[str, str]:
    q = _parse_int(w, "q")
    return format_rational(_parse(w, "min_S")), str(q * q)


def _replay_lemma41(w: dict) -> tuple[str, str]:
    p, q, n, e = (_parse_int(w, key) for key in ("p", "q", "n", "e"))
    xi, sigma = _parse(w, "xi"), _parse(w, "Sigma")
    value = Fraction(p**n, q ** (n + e)) * (xi + sigma)
    return format_rational(value), w["S"]


def _replay_lemma42(w: dict) -> tuple[str, str]:
    from .branch import theta_valuation  # local: keep module import graph acyclic

    relation = w["relation"]
    q = _parse_int(w, "q")
    if relation == "start-condition":
        ok = branch_condition(_parse(w, "S0"), q)
        return ("condition-holds" if ok else "condition-fails"), "condition-holds"
    if relation == "valuation":
        return str(theta_valuation(_parse(w, "x"), q)), w["expected_g"]
    if relation == "state":
        return w["S_iter"], w["S_embed"]
    raise ValueError(f"unknown Lemma4.2 relation {relation!r}")


def _replay_admissibility(w: dict) -> tuple[str, str]:
    S, r = _parse(w, "S"), _parse(w, "r")
    shifted = S + r
    return str(shifted.numerator // shifted.denominator), str(S.numerator // S.denominator)


def _replay_structure(w: dict) -> tuple[str, str]:
    relation = w["relation"]
    W, h = _parse_int(w, "W"), _parse_int(w, "h")
    a, b = _parse_int(w, "a"), _parse_int(w, "b")
    case_a = w["case"] == "4.4.a"
    if relation == "decomposition":
        lhs = 2 * W
        rhs = 2 * (4**a - 1) // 3 + 4**a * (2 * b if case_a else b)
        return str(lhs), str(rhs)
    if relation == "congruence":
        return str(b % 8), str(1 if case_a else 6)
    if relation == "pattern":
        from .numkernel import digit_at

        j = _parse_int(w, "position")
        return str(digit_at(Fraction(2 * W), 2, j)), w["expected_bit"]
    raise ValueError(f"unknown Eq4.4 relation {relation!r}")


def _replay_frac_formula(w: dict) -> tuple[str, str]:
    S, h = _parse(w, "S"), _parse_int(w, "h")
    frac = S - (S.numerator // S.denominator)
    case_a = w["case"] == "4.4.a"
    formula = (Fraction(1, 3) if case_a else Fraction(2, 3)) - Fraction(2, 3 * 2**h)
    return format_rational(frac), format_rational(formula)


def _replay_eq45a(w: dict) -> tuple[str, str]:
    S, W_next = _parse(w, "S"), _parse_int(w, "W_next")
    b = S.numerator // S.denominator
    case_a = w["case"] == "4.4.a"
    rhs = Fraction(3 * b + (1 if case_a else 2), 2)
    return str(2 * W_next), format_rational(rhs)


def _replay_eq45a_literal(w: dict) -> tuple[str, str]:
    S, W_next = _parse(w, "S"), _parse_int(w, "W_next")
    b = S.numerator // S.denominator
    return format_rational(Fraction(2 * W_next)), format_rational(Fraction(3 * b + 1, 2))


_REPLAYERS: dict[str, Callable[[dict], tuple[str, str]]] = {
    "Lemma2.1": _replay_lemma21,
    "Lemma2.1-hypothesis": _replay_lemma21_hyp,
    "Corollary2.1": _replay_corollary21,
    "Lemma2.2": _replay_lemma22,
    "Eq2.8.e": _replay_eq28e,
    "Theorem2.1": _replay_theorem21,
    "Lemma2.3": _replay_lemma23,
    "Corollary2.2a": _replay_corollary22a,
    "Corollary2.2b": _replay_corollary22b,
    "Corollary2.2c": _replay_corollary22c,
    "Definition1.4": _replay_determinism,
    "Lemma3.3": _replay_min_bound,
    "Lemma4.1": _replay_lemma41,
    "Lemma4.2": _replay_lemma42,
    "Eq1.3.b": _replay_admissibility,
    "Eq4.4": _replay_structure,
    "Eq4.4.e": _replay_frac_formula,
    "Eq4.5.a": _replay_eq45a,
    "Eq4.5.a-literal": _replay_eq45a_literal,
}


def replay_certificate(cert: Counterexample) -> bool:
    """Recompute both sides from the witness; True iff the violation
    reproduces exactly and matches the recorded lhs/rhs."""
    replayer = _REPLAYERS.get(cert.claim_id)
    if replayer is None:
        raise ValueError(f"no replayer registered for claim {cert.claim_id!r}")
    lhs, rhs = replayer(dict(cert.witness))
    return lhs != rhs and lhs == cert.lhs and rhs == cert.rhs
