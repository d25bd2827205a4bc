"""Storage planner for arbitrary heterogeneous per-database budgets.

Given per-database capacities mu(1..N) (fractions of the full model), the
planner derives the coding parameter k = 1/max mu and the replication
budgets r = k * sum(mu), s = floor(k) * sum(mu), evaluates the two
candidate storage mixtures:

  * floor-k mixture: every submodel coded with parameter floor(k),
    replication split between floor(s) and ceil(s);
  * split-k mixture: submodels split across coding parameters floor(k)
    and ceil(k) and replications floor(r) and ceil(r), with closed-form
    optimal fractions alpha, beta, delta;

and picks the cheaper one. Per-database allocations come from clipped
water-filling splits, and a greedy descending fill turns each allocation
vector into exact fractional assignments over R-database subsets.

Everything here is exact rational arithmetic; no floats anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import (
    DegenerateHomogeneous,
    InfeasibleAllocation,
    InfeasibleCode,
    InvariantViolation,
)
from .field import DEFAULT_SIM_PRIME, gen_eval_constants, make_field
from .protocol import CodeSpec, derive_code

ZERO = Fraction(0)
ONE = Fraction(1)


def _frac(value) -> Fraction:
    """Exact conversion; decimal strings parse without float rounding."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        # floats are accepted at the API edge but converted via their
        # shortest decimal repr so 0.37 means 37/100, not its binary blur
        return Fraction(repr(value))
    raise TypeError(f"cannot interpret {value!r} as an exact fraction")


@dataclass(frozen=True)
class ConstraintSet:
    """Per-database storage budgets as exact fractions of the model size."""

    mu: tuple[Fraction, ...]

    @classmethod
    def from_values(cls, values: Sequence) -> "ConstraintSet":
        return cls(tuple(_frac(v) for v in values))

    def __post_init__(self):
        if len(self.mu) < 4:
            raise InfeasibleAllocation(f"need at least 4 databases, got {len(self.mu)}")
        for v in self.mu:
            if not ZERO < v <= ONE:
                raise InfeasibleAllocation(f"storage fraction {v} outside (0, 1]")

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def heterogeneous(self) -> bool:
        return len(set(self.mu)) > 1


@dataclass(frozen=True)
class DerivedParams:
    """k = 1/max mu, p = sum mu, and the replication budgets r = kp, s = floor(k)p."""

    k: Fraction
    p: Fraction
    r: Fraction
    s: Fraction

    @property
    def k_lo(self) -> int:
        return math.floor(self.k)

    @property
    def k_hi(self) -> int:
        return math.ceil(self.k)

    @property
    def r_lo(self) -> int:
        return math.floor(self.r)

    @property
    def r_hi(self) -> int:
        return math.ceil(self.r)

    @property
    def s_lo(self) -> int:
        return math.floor(self.s)

    @property
    def s_hi(self) -> int:
        return math.ceil(self.s)


def derive_params(cs: ConstraintSet, paper_rounded: bool = False) -> DerivedParams:
    """Derive the planner quantities, exactly.

    ``paper_rounded`` truncates k to one decimal place before computing r,
    for reproducing published worked figures that round k.
    """
    k = 1 / max(cs.mu)
    if paper_rounded:
        k = Fraction(math.floor(k * 10), 10)
    p = sum(cs.mu, start=ZERO)
    return DerivedParams(k=k, p=p, r=k * p, s=math.floor(k) * p)


def mds_total_cost(a: int, b: int) -> Fraction:
    """Total communication per useful symbol for an (a, b) code."""
    derive_code(a, b)  # range check
    if (b - a) % 2 == 1:
        return Fraction(4 * b, b - a - 1)
    return Fraction(4 * b - 2, b - a - 2)


@dataclass(frozen=True)
class MixtureSelection:
    """Optimal fractions for the split-k storage mixture.

    The four codes (floor k, floor r), (floor k, ceil r), (ceil k, floor r),
    (ceil k, ceil r) carry fractions alpha*beta, alpha*(1-beta),
    (1-alpha)*delta, (1-alpha)*(1-delta) of every submodel.
    """

    alpha: Fraction
    beta: Fraction
    delta: Fraction

    def fractions(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        a, b, d = self.alpha, self.beta, self.delta
        return (a * b, a * (1 - b), (1 - a) * d, (1 - a) * (1 - d))

    def validate_bounds(self, params: DerivedParams) -> None:
        """Feasibility bounds the allocation splits rely on."""
        k, r = params.k, params.r
        r_frac = r - params.r_lo
        a_min = Fraction(params.k_lo, 1) / k * (params.k_hi - k)
        if not a_min <= self.alpha <= 1:
            raise InvariantViolation(f"alpha {self.alpha} outside [{a_min}, 1]")
        b_min = max(1 - Fraction(params.k_lo, 1) / (k * self.alpha) * r_frac, ZERO)
        if not b_min <= self.beta <= 1:
            raise InvariantViolation(f"beta {self.beta} outside [{b_min}, 1]")
        if self.alpha < 1:
            d_min = max(
                1 - Fraction(params.k_hi, 1) / (k * (1 - self.alpha)) * r_frac, ZERO
            )
            if not d_min <= self.delta <= 1:
                raise InvariantViolation(f"delta {self.delta} outside [{d_min}, 1]")


def floor_k_mixture(params: DerivedParams) -> tuple[Fraction, Fraction]:
    """Cost of the floor-k mixture and the fraction on the floor(s) code.

    Integer s degenerates to the single (floor k, s) code with fraction 1.
    """
    if params.s.denominator == 1:
        return mds_total_cost(params.k_lo, int(params.s)), ONE
    beta = params.s_hi - params.s
    cost = beta * mds_total_cost(params.k_lo, params.s_lo) + (
        params.s - params.s_lo
    ) * mds_total_cost(params.k_lo, params.s_hi)
    return cost, beta


def split_k_selection(params: DerivedParams) -> MixtureSelection:
    """Closed-form optimal alpha, beta, delta for the split-k mixture."""
    if params.k.denominator == 1:
        raise InfeasibleCode("integer k has no coding-parameter split")
    k, r, s, p = params.k, params.r, params.s, params.p
    k_lo, k_hi = params.k_lo, params.k_hi
    r_lo, r_hi = params.r_lo, params.r_hi
    r_frac = r - r_lo
    k_frac = k - k_lo
    if (r_lo - k_lo) % 2 == 1:
        if r_frac > k_frac and s <= r_lo:
            denom = k_hi * r_lo - k_lo * r_hi
            if denom == 0:
                raise InfeasibleCode("split-k mixture undefined for these budgets")
            alpha = Fraction(k_lo * (p * k_hi - r_hi), denom)
        else:
            alpha = Fraction(k_lo, 1) / k * (k_hi - k)
        if r_frac > k_frac and s > r_lo:
            beta = (r_hi - r) / (k_hi - k)
        else:
            beta = ONE
        if r_frac <= k_frac:
            delta = 1 - r_frac / k_frac
        else:
            delta = ZERO
    else:
        if r_frac < k_hi - k:
            alpha = Fraction(k_lo, 1) / k * (k_hi - k)
            beta = 1 - r_frac / (k_hi - k)
        else:
            denom = k_hi * r_hi - k_lo * r_lo
            if denom == 0:
                raise InfeasibleCode("split-k mixture undefined for these budgets")
            alpha = Fraction(k_lo * (p * k_hi - r_lo), denom)
            beta = ZERO
        delta = ONE
    return MixtureSelection(alpha=alpha, beta=beta, delta=delta)


def _split_targets(params: DerivedParams, mix: MixtureSelection) -> tuple[Fraction, Fraction]:
    """Total storage earmarked for the floor-k and ceil-k code pairs.

    Uses the general beta/delta-weighted form so integer r stays exact.
    """
    ab, ab2, cd, cd2 = mix.fractions()
    hat = (ab * params.r_lo + ab2 * params.r_hi) / params.k_lo
    bar = (cd * params.r_lo + cd2 * params.r_hi) / params.k_hi
    return hat, bar


def split_k_mixture(params: DerivedParams) -> tuple[Fraction, MixtureSelection]:
    """Cost of the split-k mixture with its optimal fractions.

    Integer k collapses the coding-parameter split; the replication-only
    mixture with the single parameter k is used instead and reported with
    alpha = 1.
    """
    if params.k.denominator == 1:
        k = int(params.k)
        if params.r.denominator == 1:
            return mds_total_cost(k, int(params.r)), MixtureSelection(ONE, ONE, ONE)
        beta = params.r_hi - params.r
        cost = beta * mds_total_cost(k, params.r_lo) + (
            params.r - params.r_lo
        ) * mds_total_cost(k, params.r_hi)
        return cost, MixtureSelection(ONE, beta, ONE)
    mix = split_k_selection(params)
    mix.validate_bounds(params)
    cost = ZERO
    codes = split_k_codes(params)
    for fraction, (a, b) in zip(mix.fractions(), codes):
        if fraction > 0:
            cost += fraction * mds_total_cost(a, b)
    hat, bar = _split_targets(params, mix)
    if hat + bar != params.p:
        raise InvariantViolation(
            f"storage balance violated: {hat} + {bar} != {params.p}"
        )
    return cost, mix


def split_k_codes(params: DerivedParams) -> tuple[tuple[int, int], ...]:
    return (
        (params.k_lo, params.r_lo),
        (params.k_lo, params.r_hi),
        (params.k_hi, params.r_lo),
        (params.k_hi, params.r_hi),
    )


# ---------------------------------------------------------------------------
# allocations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AllocationEntry:
    """Per-database storage shares for one (K, R) code."""

    code: tuple[int, int]
    fraction: Fraction
    alloc: tuple[Fraction, ...]


def _clipped_split(
    v: Sequence[Fraction],
    target_a: Fraction,
    cap_a: Fraction,
    cap_b: Fraction,
    degenerate: str,
) -> tuple[list[Fraction], list[Fraction]]:
    """Split v(n) = a(n) + b(n) with sum(a) = target_a, a <= cap_a, b <= cap_b.

    Clipped excesses fix the forced minima; one shared ratio distributes the
    slack. A vanishing slack denominator means every v(n) sits at the common
    cap: either reject (strict heterogeneity required) or fall back to the
    proportional split, which is valid exactly in that case.
    """
    total = sum(v, start=ZERO)
    m = [max(x - cap_b, ZERO) for x in v]
    h = [max(x - cap_a, ZERO) for x in v]
    denom = total - sum(m) - sum(h)
    if denom == 0:
        if degenerate == "raise":
            raise DegenerateHomogeneous(
                "allocation split degenerates; constraints are effectively homogeneous"
            )
        if total == 0:
            a = [ZERO for _ in v]
        else:
            a = [x * target_a / total for x in v]
    else:
        gamma = (target_a - sum(m)) / denom
        if not ZERO <= gamma <= ONE:
            raise InvariantViolation(f"allocation ratio {gamma} outside [0, 1]")
        a = [mi + (x - mi - hi) * gamma for x, mi, hi in zip(v, m, h)]
    b = [x - ai for x, ai in zip(v, a)]
    for ai, bi in zip(a, b):
        if ai < 0 or bi < 0 or ai > cap_a or bi > cap_b:
            raise InvariantViolation("allocation split violates a per-database cap")
    return a, b


def allocate_floor_k(cs: ConstraintSet, params: DerivedParams) -> list[AllocationEntry]:
    """Per-database allocations for the floor-k mixture."""
    k_lo = params.k_lo
    s = params.s
    if s.denominator == 1:
        # single code fills every database completely
        return [AllocationEntry((k_lo, int(s)), ONE, tuple(cs.mu))]
    beta = Fraction(params.s_hi) - s
    cap_a = beta / k_lo
    cap_b = (s - params.s_lo) / k_lo
    target_a = Fraction(params.s_lo, k_lo) * beta
    a, b = _clipped_split(cs.mu, target_a, cap_a, cap_b, degenerate="raise")
    return [
        AllocationEntry((k_lo, params.s_lo), beta, tuple(a)),
        AllocationEntry((k_lo, params.s_hi), 1 - beta, tuple(b)),
    ]


def _integer_k_split(cs: ConstraintSet, params: DerivedParams) -> list[AllocationEntry]:
    """Replication-only mixture for integer k (the split collapses)."""
    k = int(params.k)
    r = params.r
    if r.denominator == 1:
        return [AllocationEntry((k, int(r)), ONE, tuple(cs.mu))]
    beta = Fraction(params.r_hi) - r
    cap_a = beta / k
    cap_b = (r - params.r_lo) / k
    target_a = Fraction(params.r_lo, k) * beta
    a, b = _clipped_split(cs.mu, target_a, cap_a, cap_b, degenerate="raise")
    return [
        AllocationEntry((k, params.r_lo), beta, tuple(a)),
        AllocationEntry((k, params.r_hi), 1 - beta, tuple(b)),
    ]


def allocate_split_k(
    cs: ConstraintSet, params: DerivedParams, mix: MixtureSelection
) -> list[AllocationEntry]:
    """Per-database allocations for the split-k mixture, in two stages.

    Stage one splits each budget between the floor-k and ceil-k code pairs;
    stage two splits each pair between the floor-r and ceil-r codes. beta
    or delta at 0 or 1 short-circuits its stage to a pure proportional
    assignment.
    """
    if params.k.denominator == 1:
        return _integer_k_split(cs, params)
    alpha, beta, delta = mix.alpha, mix.beta, mix.delta
    k_lo, k_hi = params.k_lo, params.k_hi
    r_lo, r_hi = params.r_lo, params.r_hi
    frac = mix.fractions()
    target_hat, target_bar = _split_targets(params, mix)

    hat, bar = _clipped_split(
        cs.mu, target_hat, alpha / k_lo, (1 - alpha) / k_hi, degenerate="raise"
    )

    if beta in (ZERO, ONE):
        hat1 = [v * beta for v in hat]
        hat2 = [v * (1 - beta) for v in hat]
    else:
        hat1, hat2 = _clipped_split(
            hat,
            frac[0] / k_lo * r_lo,
            frac[0] / k_lo,
            frac[1] / k_lo,
            degenerate="proportional",
        )
    if delta in (ZERO, ONE):
        bar1 = [v * delta for v in bar]
        bar2 = [v * (1 - delta) for v in bar]
    else:
        bar1, bar2 = _clipped_split(
            bar,
            frac[2] / k_hi * r_lo,
            frac[2] / k_hi,
            frac[3] / k_hi,
            degenerate="proportional",
        )

    codes = split_k_codes(params)
    return [
        AllocationEntry(codes[0], frac[0], tuple(hat1)),
        AllocationEntry(codes[1], frac[1], tuple(hat2)),
        AllocationEntry(codes[2], frac[2], tuple(bar1)),
        AllocationEntry(codes[3], frac[3], tuple(bar2)),
    ]


def validate_allocation(entries: Sequence[AllocationEntry], cs: ConstraintSet) -> None:
    """Exact checks: segment sums, per-database caps, per-database totals."""
    totals = [ZERO] * cs.n
    for entry in entries:
        k, r = entry.code
        expected = entry.fraction / k * r
        if sum(entry.alloc, start=ZERO) != expected:
            raise InvariantViolation(
                f"allocation for code {entry.code} sums to {sum(entry.alloc)}, "
                f"expected {expected}"
            )
        cap = entry.fraction / k
        for n, a in enumerate(entry.alloc):
            if not ZERO <= a <= cap:
                raise InvariantViolation(
                    f"allocation {a} for database {n + 1} outside [0, {cap}]"
                )
            totals[n] += a
    for n, (total, mu) in enumerate(zip(totals, cs.mu)):
        if total != mu:
            raise InvariantViolation(
                f"database {n + 1} allocated {total}, capacity {mu}"
            )


# ---------------------------------------------------------------------------
# replication partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionSolution:
    """Fractional assignment of coded content to R-database subsets."""

    etas: tuple[Fraction, ...]
    subsets: tuple[tuple[int, ...], ...]  # 1-based database indices

    def reconstruct(self, n_databases: int, k: int) -> list[Fraction]:
        out = [ZERO] * n_databases
        for eta, subset in zip(self.etas, self.subsets):
            for db in subset:
                out[db - 1] += eta / k
        return out


def solve_partition(alloc: Sequence[Fraction], K: int, R: int) -> PartitionSolution:
    """Greedy descending fill of R-database subsets matching ``alloc`` exactly.

    Repeatedly selects the R databases with the largest remaining demand and
    assigns the largest exact step that keeps max(remaining) <= sum/R, the
    necessary and sufficient feasibility condition. The result is always
    post-verified against the input.
    """
    n = len(alloc)
    if R > n:
        raise InfeasibleAllocation(f"cannot replicate on {R} of {n} databases")
    remaining = [K * _frac(a) for a in alloc]
    if any(v < 0 for v in remaining):
        raise InfeasibleAllocation("negative allocation")
    total = sum(remaining, start=ZERO)
    cap = total / R
    for i, v in enumerate(remaining):
        if v > cap:
            raise InfeasibleAllocation(
                f"database {i + 1} holds {v / K} but R-fold replication "
                f"supports at most {cap / K}"
            )
    etas: list[Fraction] = []
    subsets: list[tuple[int, ...]] = []
    guard = 2 * n + R + 4
    while total > 0:
        guard -= 1
        if guard < 0:
            raise InvariantViolation("partition fill failed to terminate")
        order = sorted(range(n), key=lambda i: (-remaining[i], i))
        chosen = order[:R]
        cap = total / R
        a_r = remaining[chosen[-1]]
        a_next = remaining[order[R]] if R < n else ZERO
        step = min(a_r, cap - a_next)
        if step <= 0:
            raise InvariantViolation("partition fill stalled")
        for i in chosen:
            remaining[i] -= step
        total -= R * step
        subset = tuple(sorted(i + 1 for i in chosen))
        if subsets and subsets[-1] == subset:
            etas[-1] += step
        else:
            subsets.append(subset)
            etas.append(step)
    merged: dict[tuple[int, ...], Fraction] = {}
    for eta, subset in zip(etas, subsets):
        merged[subset] = merged.get(subset, ZERO) + eta
    solution = PartitionSolution(
        etas=tuple(merged.values()), subsets=tuple(merged.keys())
    )
    if solution.reconstruct(n, K) != [_frac(a) for a in alloc]:
        raise InvariantViolation("partition does not reconstruct its allocation")
    return solution


# ---------------------------------------------------------------------------
# full plan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlanSegment:
    """One coded segment of the plan: code, fraction, allocation, partition."""

    spec: CodeSpec
    fraction: Fraction
    alloc: tuple[Fraction, ...]
    partition: PartitionSolution
    seed: int
    alphas: tuple[int, ...]
    f: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class StoragePlan:
    """Full heterogeneous-planner output."""

    n: int
    mu: tuple[Fraction, ...]
    q: int
    params: DerivedParams
    branch: str  # "C1" | "C2"
    cost_floor_k: Fraction | None
    cost_split_k: Fraction | None
    mixture: MixtureSelection | None
    segments: tuple[PlanSegment, ...]
    predicted_cost: Fraction
    paper_rounded: bool


def plan_hetero(
    cs: ConstraintSet,
    paper_rounded: bool = False,
    q: int = DEFAULT_SIM_PRIME,
    base_seed: int = 0,
) -> StoragePlan:
    """Pick the cheaper storage mixture and assemble the executable plan."""
    if not cs.heterogeneous:
        raise DegenerateHomogeneous(
            "all storage constraints are equal: use the homogeneous planner"
        )
    params = derive_params(cs, paper_rounded=paper_rounded)

    cost1 = cost2 = None
    mix = None
    try:
        cost1, _ = floor_k_mixture(params)
    except InfeasibleCode:
        pass
    try:
        cost2, mix = split_k_mixture(params)
    except InfeasibleCode:
        pass
    if cost1 is None and cost2 is None:
        raise InfeasibleCode(
            "no feasible storage mixture: replication budgets too small for any code"
        )
    # ties resolve to the split-k branch
    if cost2 is not None and (cost1 is None or cost2 <= cost1):
        branch = "C2"
        entries = allocate_split_k(cs, params, mix)
        predicted = cost2
    else:
        branch = "C1"
        entries = allocate_floor_k(cs, params)
        predicted = cost1
        mix = None

    validate_allocation(entries, cs)
    used = sum((e.fraction / e.code[0] * e.code[1] for e in entries), start=ZERO)
    if used != params.p:
        raise InvariantViolation(f"plan uses {used} of {params.p} total storage")

    field = make_field(q)
    segments: list[PlanSegment] = []
    idx = 0
    for entry in entries:
        if entry.fraction == 0:
            continue
        spec = derive_code(*entry.code)
        scaled = [a / entry.fraction for a in entry.alloc]
        partition = solve_partition(scaled, spec.K, spec.R)
        seed = base_seed + idx
        consts = gen_eval_constants(field, cs.n, spec.y, spec.K, seed=seed)
        segments.append(
            PlanSegment(
                spec=spec,
                fraction=entry.fraction,
                alloc=entry.alloc,
                partition=partition,
                seed=seed,
                alphas=consts.alphas,
                f=consts.f,
            )
        )
        idx += 1

    blended = sum(
        (seg.fraction * mds_total_cost(seg.spec.K, seg.spec.R) for seg in segments),
        start=ZERO,
    )
    if blended != predicted:
        raise InvariantViolation(
            f"segment mixture cost {blended} disagrees with prediction {predicted}"
        )
    return StoragePlan(
        n=cs.n,
        mu=cs.mu,
        q=q,
        params=params,
        branch=branch,
        cost_floor_k=cost1,
        cost_split_k=cost2,
        mixture=mix,
        segments=tuple(segments),
        predicted_cost=predicted,
        paper_rounded=paper_rounded,
    )
