"""Odd-form 3x+1 trajectories, their exact embedding into the perturbed
rational-power engine, binary-structure checks, and range scans.

The embedding sends each odd state W_n to S_n = 2*W_n / 2^(h_{n+1}) with
h_{n+1} the dyadic valuation of (3*W_n+1)/2, records g_n = h_{n+1} for every
n >= 0 (so the start state carries g_0 = h_1 and xi = 2*W_0), and perturbs by
r_n = (2/3)/2^(g_n).  Every embedded trajectory is cross-checked step by step
against the engine's own valuation recurrence; a mismatch is emitted as a
refutation certificate, never assumed away.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .numkernel import InternalCheckError, digit_at, format_rational, int_valuation
from .branch import (
    AdmissibilityError,
    BranchParams,
    BranchStep,
    BranchTrajectory,
    PerturbationSpec,
    branch_condition,
    step_v2,
    validate_params,
)
from .lemmalab import PASS, VIOLATED, ClaimReport, Counterexample, _w

SYRACUSE_C = Fraction(2, 3)


class RefutationError(Exception):
    """A checked claim failed; carries the re-validating certificate."""

    def __init__(self, certificate: Counterexample, message: str):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class SyracuseStep:
    """Odd state W_n with h = h_{n+1} (None on the final recorded state)
    and e_prime = h_1 + ... + h_n."""

    n: int
    W: int
    h: Optional[int]
    e_prime: int


@dataclass(frozen=True)
class SyracuseTrajectory:
    w0: int
    cap: int
    steps: tuple[SyracuseStep, ...]
    resolved: bool  # reached W = 1 within cap

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, n: int) -> SyracuseStep:
        return self.steps[n]

    @property
    def odd_steps_to_one(self) -> Optional[int]:
        return len(self.steps) - 1 if self.resolved else None


def collatz_step(t: int) -> int:
    """One step of the two-arm integer map: (3t+1)/2 on odd, t/2 on even."""
    if not isinstance(t, int) or t < 1:
        raise ValueError(f"positive integer required, got {t}")
    return (3 * t + 1) // 2 if t % 2 else t // 2


def odd_step(w: int) -> tuple[int, int]:
    """Jump odd-to-odd: returns ((3w+1)/2 stripped of 2s, the valuation)."""
    if not isinstance(w, int) or w < 1 or w % 2 == 0:
        raise ValueError(f"odd positive integer required, got {w}")
    u = (3 * w + 1) // 2
    h = int_valuation(u, 2)
    return u >> h, h


def next_h(w: int) -> int:
    """Valuation h_{n+1} for the step out of w, without taking the step."""
    u = (3 * w + 1) // 2
    return int_valuation(u, 2)


def trajectory(w0: int, cap: int, past_one: int = 0) -> SyracuseTrajectory:
    """Iterate odd_step until W = 1 (optionally past_one further steps) or cap.

    The closed form W_n * 2^(n+e'_n) == 3^n * W_0 + A_n (A the scaled
    perturbation sum accumulated as A <- 3A + 2^(n+e'_n)) is asserted at
    every step; it is an unconditional identity, so a failure raises.
    Cap exhaustion is recorded on the result, never raised.
    """
    if not isinstance(w0, int) or w0 < 1 or w0 % 2 == 0:
        raise ValueError(f"odd positive integer seed required, got {w0}")
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    steps: list[SyracuseStep] = []
    w = w0
    e_prime = 0
    acc = 0  # A_n
    power3 = 1  # 3^n
    extra = past_one
    n = 0
    resolved = w == 1
    while True:
        if w == 1 and n > 0:
            resolved = True
        done = (w == 1 and extra == 0) or n >= cap
        if done:
            steps.append(SyracuseStep(n=n, W=w, h=None, e_prime=e_prime))
            break
        if w == 1 and extra > 0:
            extra -= 1
        w_next, h = odd_step(w)
        steps.append(SyracuseStep(n=n, W=w, h=h, e_prime=e_prime))
        acc = 3 * acc + (1 << (n + e_prime))
        power3 *= 3
        e_prime += h
        n += 1
        w = w_next
        if w * (1 << (n + e_prime)) != power3 * w0 + acc:
            raise InternalCheckError(f"closed form fails at step {n} of seed {w0}")
    return SyracuseTrajectory(w0=w0, cap=cap, steps=tuple(steps), resolved=resolved or w == 1)


def embedded_params(w0: int) -> BranchParams:
    """The (3, 2) parameter block with xi = 2*w0."""
    xi = Fraction(2 * w0)
    if w0 == 1:
        # the trivial cycle embeds with xi = 2, a power of q, below the
        # validated range; the (p, q) block invariants still hold
        return BranchParams(p=3, q=2, alpha=1, beta=1, xi=xi)
    return validate_params(3, 2, xi)


def embed(traj: SyracuseTrajectory) -> BranchTrajectory:
    """Build the Branch trajectory of a Syracuse run and cross-check it.

    The h-derived states are compared against the engine's own valuation
    recurrence at every step (same S, same g, admissible r); the first
    mismatch raises RefutationError with a certificate.
    """
    if len(traj.steps) == 0:
        raise ValueError("cannot embed an empty trajectory")
    params = embedded_params(traj.w0)
    q = params.q
    hs = [s.h if s.h is not None else next_h(s.W) for s in traj.steps]
    n_states = len(traj.steps)

    branch_steps: list[BranchStep] = []
    sigma = Fraction(0)
    e = 0
    power_p = 1
    for n in range(n_states):
        g = hs[n]
        e = e + g if n > 0 else g
        S = Fraction(2 * traj.steps[n].W, 2**g)
        r = SYRACUSE_C / 2**g if n < n_states - 1 else None
        branch_steps.append(BranchStep(n=n, S=S, r=r, g=g, e=e, Sigma=sigma))
        if r is not None:
            sigma += r * Fraction(2 ** (n + e), power_p)
        power_p *= params.p

    xi = Fraction(2 * traj.w0)
    result = BranchTrajectory(
        params=params, xi=xi, steps=tuple(branch_steps), spec_desc="syracuse(c=2/3)"
    )

    # consistency oracle: the engine must reproduce every state on its own
    S0 = branch_steps[0].S
    if not branch_condition(S0, q):
        raise RefutationError(
            Counterexample(
                claim_id="Lemma4.2",
                witness=_w(q=q, S0=S0, relation="start-condition"),
                lhs="condition-fails",
                rhs="condition-holds",
            ),
            f"embedded start state {format_rational(S0)} fails the multiply condition",
        )
    for n in range(n_states - 1):
        here = branch_steps[n]
        try:
            engine_next = step_v2(params, here, r=here.r)
        except AdmissibilityError:
            raise RefutationError(
                Counterexample(
                    claim_id="Eq1.3.b",
                    witness=_w(S=here.S, r=here.r),
                    lhs=format_rational(here.S + here.r),
                    rhs=format_rational(here.S),
                ),
                f"embedded perturbation inadmissible at step {n} of seed {traj.w0}",
            ) from None
        want = branch_steps[n + 1]
        if engine_next.g != want.g:
            s_prime = params.p * (here.S + here.r) / q
            raise RefutationError(
                Counterexample(
                    claim_id="Lemma4.2",
                    witness=_w(q=q, x=s_prime, expected_g=want.g, relation="valuation"),
                    lhs=str(engine_next.g),
                    rhs=str(want.g),
                ),
                f"valuation mismatch at step {n + 1} of seed {traj.w0}",
            )
        if engine_next.S != want.S:
            raise RefutationError(
                Counterexample(
                    claim_id="Lemma4.2",
                    witness=_w(
                        q=q,
                        S_iter=engine_next.S,
                        S_embed=want.S,
                        relation="state",
                    ),
                    lhs=format_rational(engine_next.S),
                    rhs=format_rational(want.S),
                ),
                f"state mismatch at step {n + 1} of seed {traj.w0}",
            )
    return result


def _structure_violation(
    W: int, h: int, W_next: int
) -> tuple[Optional[Counterexample], bool]:
    """Check one step's binary structure; returns (violation, literal_diverged).

    literal_diverged reports whether the single-formula reading
    2*W_next == (3*floor(S)+1)/2 fails at this step (expected on every
    even-valuation step, where the exact identity is (3*floor(S)+2)/2).
    """
    S = Fraction(2 * W, 2**h)
    b = S.numerator // S.denominator
    frac = S - b
    case_a = h % 2 == 1
    case = "4.4.a" if case_a else "4.4.b"
    a = (h - 1) // 2 if case_a else h // 2

    tail = 2 * (4**a - 1) // 3
    decomposition = tail + 4**a * (2 * b if case_a else b)
    if 2 * W != decomposition:
        return (
            Counterexample(
                claim_id="Eq4.4",
                witness=_w(W=W, h=h, a=a, b=b, case=case, relation="decomposition"),
                lhs=str(2 * W),
                rhs=str(decomposition),
            ),
            False,
        )
    want_mod = 1 if case_a else 6
    if b % 8 != want_mod:
        return (
            Counterexample(
                claim_id="Eq4.4",
                witness=_w(W=W, h=h, a=a, b=b, case=case, relation="congruence"),
                lhs=str(b % 8),
                rhs=str(want_mod),
            ),
            False,
        )
    # digit-level second opinion: alternating 10-tail, then the case break
    value = Fraction(2 * W)
    expected = [(j, j % 2) for j in range(2 * a + 2)]
    expected.append((2 * a + 2, 1 if not case_a else 0))
    if case_a:
        expected.append((2 * a + 3, 0))
    for j, bit in expected:
        if digit_at(value, 2, j) != bit:
            return (
                Counterexample(
                    claim_id="Eq4.4",
                    witness=_w(
                        W=W, h=h, a=a, b=b, case=case, relation="pattern",
                        position=j, expected_bit=bit,
                    ),
                    lhs=str(digit_at(value, 2, j)),
                    rhs=str(bit),
                ),
                False,
            )
    formula = (Fraction(1, 3) if case_a else Fraction(2, 3)) - Fraction(2, 3 * 2**h)
    if frac != formula:
        return (
            Counterexample(
                claim_id="Eq4.4.e",
                witness=_w(S=S, h=h, case=case),
                lhs=format_rational(frac),
                rhs=format_rational(formula),
            ),
            False,
        )
    numerator = 3 * b + (1 if case_a else 2)
    if numerator % 2 != 0 or 2 * W_next != numerator // 2:
        return (
            Counterexample(
                claim_id="Eq4.5.a",
                witness=_w(S=S, W_next=W_next, case=case),
                lhs=str(2 * W_next),
                rhs=format_rational(Fraction(numerator, 2)),
            ),
            False,
        )
    r = SYRACUSE_C / 2**h
    if not (0 <= frac + r < 1):
        return (
            Counterexample(
                claim_id="Eq1.3.b",
                witness=_w(S=S, r=r),
                lhs=format_rational(frac + r),
                rhs="[0,1)",
            ),
            False,
        )
    literal_diverged = 2 * (2 * W_next) != 3 * b + 1
    return None, literal_diverged


def _literal_certificate(W: int, h: int, W_next: int) -> Counterexample:
    S = Fraction(2 * W, 2**h)
    b = S.numerator // S.denominator
    return Counterexample(
        claim_id="Eq4.5.a-literal",
        witness=_w(S=S, W_next=W_next),
        lhs=format_rational(Fraction(2 * W_next)),
        rhs=format_rational(Fraction(3 * b + 1, 2)),
    )


def structure_check(traj: SyracuseTrajectory, n: int) -> ClaimReport:
    """Classify step n as case 4.4.a/4.4.b and verify every structure identity.

    Verified exactly: the alternating-tail decomposition of 2*W_n and its
    digit pattern, the b mod 8 congruence, the fractional-part formula, the
    case-exact successor identity, and perturbation admissibility.  The
    single-formula successor reading is additionally monitored; where it
    diverges (every 4.4.b step) the report stays `pass` but carries a
    re-validating divergence certificate.
    """
    if not 0 <= n < len(traj.steps) - 1:
        raise ValueError(f"step {n} is terminal or outside the trajectory")
    W = traj.steps[n].W
    h = traj.steps[n].h
    W_next = traj.steps[n + 1].W
    violation, literal_diverged = _structure_violation(W, h, W_next)
    case = "4.4.a" if h % 2 else "4.4.b"
    instance = f"W0={traj.w0} n={n} W={W} h={h} case={case}"
    extras = (_literal_certificate(W, h, W_next),) if literal_diverged else ()
    if literal_diverged:
        instance += " [single-formula successor reading diverges here]"
    return ClaimReport(
        claim_id="Eq4.4",
        instance=instance,
        verdict=VIOLATED if violation else PASS,
        certificate=violation,
        tested_count=1,
        extra_certificates=extras,
    )


def structure_check_all(traj: SyracuseTrajectory) -> ClaimReport:
    """structure_check over every non-terminal step, aggregated."""
    violation = None
    literal_count = 0
    first_literal: Optional[Counterexample] = None
    tested = 0
    for n in range(len(traj.steps) - 1):
        W = traj.steps[n].W
        h = traj.steps[n].h
        W_next = traj.steps[n + 1].W
        v, diverged = _structure_violation(W, h, W_next)
        tested += 1
        if v is not None and violation is None:
            violation = v
        if diverged:
            literal_count += 1
            if first_literal is None:
                first_literal = _literal_certificate(W, h, W_next)
    instance = (
        f"W0={traj.w0} steps={tested} "
        f"[single-formula successor reading diverges at {literal_count} even-valuation steps]"
    )
    return ClaimReport(
        claim_id="Eq4.4",
        instance=instance,
        verdict=VIOLATED if violation else PASS,
        certificate=violation,
        tested_count=tested,
        extra_certificates=(first_literal,) if first_literal else (),
    )


# ---------------------------------------------------------------------------
# range scans


@dataclass(frozen=True)
class SeedRecord:
    seed: int
    steps_to_one: Optional[int]
    max_w: int
    min_s: Fraction
    max_h: int
    resolved: bool
    check_results: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ScanSummary:
    start: int
    stop: int
    cap: int
    checks: tuple[str, ...]
    records: tuple[SeedRecord, ...]

    @property
    def failures(self) -> tuple[int, ...]:
        return tuple(r.seed for r in self.records if not r.resolved)

    @property
    def total(self) -> int:
        return len(self.records)

    @property
    def max_w(self) -> tuple[int, int]:
        best = max(self.records, key=lambda r: r.max_w)
        return best.seed, best.max_w

    @property
    def max_steps(self) -> tuple[int, int]:
        best = max(self.records, key=lambda r: r.steps_to_one or -1)
        return best.seed, best.steps_to_one or -1


_CHECK_IDS = ("Lemma2.1", "Corollary2.1", "Theorem2.1", "Definition1.4", "Lemma3.3", "Eq4.4")


def _scan_seed(seed: int, cap: int, checks: tuple[str, ...]) -> SeedRecord:
    # integer fast path: no rational arithmetic unless checks ask for it
    w = seed
    n = 0
    e_prime = 0
    acc = 0
    power3 = 1
    max_w = w
    max_h = 0
    min_num, min_shift = None, 0  # min S as  min_num / 2^min_shift
    while True:
        terminal = w == 1 or n >= cap
        h = next_h(w) if terminal else 0
        if not terminal:
            u = (3 * w + 1) // 2
            h = (u & -u).bit_length() - 1
        # S_n = 2*w / 2^h for this state's own valuation
        if min_num is None or 2 * w << min_shift < min_num << h:
            min_num, min_shift = 2 * w, h
        if terminal:
            break
        max_h = max(max_h, h)
        acc = 3 * acc + (1 << (n + e_prime))
        power3 *= 3
        e_prime += h
        n += 1
        w = u >> h
        if w * (1 << (n + e_prime)) != power3 * seed + acc:
            raise InternalCheckError(f"closed form fails at step {n} of seed {seed}")
        max_w = max(max_w, w)
    resolved = w == 1
    record = SeedRecord(
        seed=seed,
        steps_to_one=n if resolved else None,
        max_w=max_w,
        min_s=Fraction(min_num, 1 << min_shift),
        max_h=max_h,
        resolved=resolved,
    )
    if checks:
        record = _run_seed_checks(record, seed, cap, checks)
    return record


def _run_seed_checks(record: SeedRecord, seed: int, cap: int, checks: tuple[str, ...]) -> SeedRecord:
    from . import lemmalab
    from dataclasses import replace

    traj = trajectory(seed, cap)
    results = []
    branch_traj = None
    rows = None
    if any(c != "Eq4.4" for c in checks):
        branch_traj = embed(traj)
    for check in checks:
        if check == "Eq4.4":
            results.append((check, structure_check_all(traj).verdict))
        elif check == "Lemma3.3":
            results.append((check, lemmalab.min_bound_check(branch_traj).verdict))
        elif check == "Definition1.4":
            results.append((check, lemmalab.determinism_check(branch_traj).verdict))
        elif check == "Theorem2.1":
            results.append(
                (check, lemmalab.domination_check(branch_traj.params, branch_traj).verdict)
            )
        elif check in ("Lemma2.1", "Corollary2.1"):
            if rows is None and check == "Corollary2.1":
                from .branch import derived_steps

                rows = derived_steps(branch_traj.params, branch_traj)
            verdict = PASS
            for n, step in enumerate(branch_traj.steps):
                report = lemmalab.independence_probe(
                    branch_traj.params,
                    step,
                    derived=rows[n] if check == "Corollary2.1" else None,
                )
                if report.verdict != PASS:
                    verdict = report.verdict
                    break
            results.append((check, verdict))
        else:
            raise ValueError(f"unknown scan check {check!r}; known: {_CHECK_IDS}")
    return replace(record, check_results=tuple(results))


def _scan_chunk(args: tuple[int, int, int, tuple[str, ...]]) -> list[SeedRecord]:
    lo, hi, cap, checks = args
    return [_scan_seed(seed, cap, checks) for seed in range(lo, hi + 1, 2)]


def scan(
    start: int,
    stop: int,
    cap: int = 10**6,
    checks: tuple[str, ...] = (),
    workers: int = 1,
) -> ScanSummary:
    """Scan every odd seed in [start, stop]; deterministic in worker count.

    Per seed: odd-steps to 1, max state, min embedded S, max valuation, and
    any requested claim checks.  Seeds that exhaust the cap are recorded as
    unresolved, never dropped.
    """
    if start % 2 == 0 or stop % 2 == 0:
        raise ValueError("scan range endpoints must be odd")
    if start > stop:
        raise ValueError(f"inverted range [{start}, {stop}]")
    checks = tuple(checks)
    for c in checks:
        if c not in _CHECK_IDS:
            raise ValueError(f"unknown scan check {c!r}; known: {_CHECK_IDS}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    count = (stop - start) // 2 + 1
    if workers == 1 or count < 32:
        records = _scan_chunk((start, stop, cap, checks))
    else:
        block = max(1, count // (workers * 8))
        chunks = []
        lo = start
        while lo <= stop:
            hi = min(stop, lo + 2 * (block - 1))
            chunks.append((lo, hi, cap, checks))
            lo = hi + 2
        with multiprocessing.Pool(workers) as pool:
            parts = pool.map(_scan_chunk, chunks)
        records = [rec for part in parts for rec in part]
    return ScanSummary(
        start=start, stop=stop, cap=cap, checks=checks, records=tuple(records)
    )
