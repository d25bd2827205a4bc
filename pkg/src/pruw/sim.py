"""End-to-end simulation of private read/write rounds over a storage plan.

N in-memory databases are filled from a plan document; rounds then read a
hidden submodel index and write masked updates back while a ledger counts
every transmitted symbol. An oracle copy of the model (never visible to
the databases) lets every round assert exact correctness, and the ledger
ratios are compared against the planner's predicted costs as exact
rationals.

Databases only ever see shard contents, query vectors and update scalars;
the hidden index and raw updates stay on the client side of the module
boundary.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    BadIndex,
    FieldTooSmall,
    IndivisibleL,
    InvariantViolation,
)
from .framing import pack_frame
from .planfile import SimPlan, fraction_str, parse_plan
from .protocol import (
    QueryBundle,
    ShardState,
    answer_query,
    apply_update,
    build_queries,
    build_updates,
    cost_formulas,
    decode_read,
    default_null_set,
    encode_subpacket,
)

ZERO = Fraction(0)


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


@dataclass
class CostLedger:
    """Exact symbol counts, total and per segment."""

    downloaded: int = 0
    uploaded: int = 0
    useful_read: int = 0
    useful_write: int = 0
    per_segment: dict[int, dict[str, int]] = dc_field(default_factory=dict)

    def _seg(self, idx: int) -> dict[str, int]:
        return self.per_segment.setdefault(
            idx, {"downloaded": 0, "uploaded": 0, "useful_read": 0, "useful_write": 0}
        )

    def add_read(self, seg: int, downloaded: int, useful: int) -> None:
        self.downloaded += downloaded
        self.useful_read += useful
        entry = self._seg(seg)
        entry["downloaded"] += downloaded
        entry["useful_read"] += useful

    def add_write(self, seg: int, uploaded: int, useful: int) -> None:
        self.uploaded += uploaded
        self.useful_write += useful
        entry = self._seg(seg)
        entry["uploaded"] += uploaded
        entry["useful_write"] += useful


class TranscriptWriter:
    """Binary frame log plus JSON round summaries.

    The public summary carries a salted hash of the round's submodel index,
    never the index itself; ``debug_theta`` adds the plaintext for test
    assertions only.
    """

    def __init__(self, directory: str | Path, salt: int, debug_theta: bool = False):
        self.directory = Path(directory)
        self.salt = salt
        self.debug_theta = debug_theta
        self.rounds: list[dict] = []
        self.directory.mkdir(parents=True, exist_ok=True)
        self._frames = open(self.directory / "messages.bin", "wb")

    def frame(self, q: int, m_count: int, spec, values) -> None:
        self._frames.write(pack_frame(q, m_count, spec, values))

    def round_summary(self, round_no: int, theta: int, costs: dict) -> None:
        digest = hashlib.sha256(
            f"{self.salt}:{round_no}:{theta}".encode()
        ).hexdigest()[:16]
        entry = {"round": round_no, "theta_hash": digest, **costs}
        if self.debug_theta:
            entry["theta"] = theta
        self.rounds.append(entry)

    def close(self) -> None:
        self._frames.close()
        with open(self.directory / "rounds.jsonl", "w") as fh:
            for entry in self.rounds:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


@dataclass
class EntryRuntime:
    """One (segment, subset) piece: a contiguous parameter range and its shards."""

    eta: Fraction
    subset: tuple[int, ...]
    null_set: tuple[int, ...]
    start: int  # first parameter index (0-based, per submodel)
    count: int  # parameters per submodel
    n_subpackets: int
    shards: dict[int, ShardState]


@dataclass
class SegmentRuntime:
    index: int
    spec: "CodeSpec"
    fraction: Fraction
    consts: "EvalConstants"
    entries: list[EntryRuntime]


class SystemState:
    """All simulator state: shards, oracle model, ledger, row counter."""

    def __init__(self, plan: SimPlan, m_count: int, length: int, seed: int):
        self.plan = plan
        self.m = m_count
        self.l = length
        self.seed = seed
        self.q = plan.q
        self.ledger = CostLedger()
        self.round = 0
        self._msg_counter = 0
        self.transcript: TranscriptWriter | None = None
        self.verify = True
        self.last_queries: dict[int, QueryBundle] = {}
        self.last_theta: int | None = None
        self.oracle = _rng(seed, 0).integers(0, self.q, size=(m_count, length), dtype=np.int64)
        self.segments: list[SegmentRuntime] = []
        self._build(plan)

    # -- construction -------------------------------------------------------

    def _build(self, plan: SimPlan) -> None:
        cursor = 0
        for seg_idx, seg in enumerate(plan.segments):
            need = plan.n + seg.spec.y * seg.spec.K
            if plan.q <= need:
                raise FieldTooSmall(f"q={plan.q} too small for segment {seg_idx}")
            entries = []
            for entry_idx, (eta, subset) in enumerate(seg.partition):
                count_f = seg.fraction * eta * self.l
                unit = seg.spec.y * seg.spec.K
                if count_f.denominator != 1 or int(count_f) % unit:
                    raise IndivisibleL(
                        f"L={self.l} incompatible with plan granularity; "
                        f"minimal valid L is {minimal_l(plan)}",
                        minimal_l(plan),
                    )
                count = int(count_f)
                n_sub = count // unit
                w = self._model_slice(cursor, count, seg.spec)
                noise_rng = _rng(self.seed, 1, seg_idx, entry_idx)
                columns = encode_subpacket(
                    w, seg.spec, seg.consts, list(subset), rng=noise_rng
                )
                shards = {
                    db: ShardState(db, seg.spec, col) for db, col in columns.items()
                }
                entries.append(
                    EntryRuntime(
                        eta=eta,
                        subset=subset,
                        null_set=default_null_set(seg.spec, list(subset)),
                        start=cursor,
                        count=count,
                        n_subpackets=n_sub,
                        shards=shards,
                    )
                )
                cursor += count
            self.segments.append(
                SegmentRuntime(
                    index=seg_idx,
                    spec=seg.spec,
                    fraction=seg.fraction,
                    consts=seg.consts,
                    entries=entries,
                )
            )
        if cursor != self.l:
            raise InvariantViolation(
                f"plan covers {cursor} of {self.l} parameters per submodel"
            )
        self._check_occupancy()

    def _model_slice(self, start: int, count: int, spec) -> np.ndarray:
        block = self.oracle[:, start : start + count]
        s = count // (spec.y * spec.K)
        return block.reshape(self.m, s, spec.y, spec.K).transpose(1, 0, 2, 3)

    def _delta_slice(self, delta: np.ndarray, start: int, count: int, spec) -> np.ndarray:
        block = delta[start : start + count]
        s = count // (spec.y * spec.K)
        return block.reshape(s, spec.y, spec.K)

    # -- invariants ---------------------------------------------------------

    def occupancy(self) -> dict[int, int]:
        """Stored symbol count per database."""
        counts = {n: 0 for n in range(1, self.plan.n + 1)}
        for seg in self.segments:
            for entry in seg.entries:
                for db, shard in entry.shards.items():
                    counts[db] += shard.symbol_count()
        return counts

    def expected_occupancy(self) -> dict[int, Fraction]:
        """Per-database symbols implied by the plan's allocation vectors."""
        expect = {n: ZERO for n in range(1, self.plan.n + 1)}
        for seg in self.plan.segments:
            for n in range(1, self.plan.n + 1):
                expect[n] += seg.allocation[n - 1] * self.m * self.l
        return expect

    def _check_occupancy(self) -> None:
        actual = self.occupancy()
        for db, expect in self.expected_occupancy().items():
            if expect != actual[db]:
                raise InvariantViolation(
                    f"database {db} stores {actual[db]} symbols, plan says {expect}"
                )

    # -- rounds -------------------------------------------------------------

    def _fresh_queries(self, theta: int) -> dict[int, QueryBundle]:
        bundles = {}
        for seg in self.segments:
            participants = sorted({db for e in seg.entries for db in e.subset})
            self._msg_counter += 1
            rng = _rng(self.seed, 2, self._msg_counter)
            qb = build_queries(theta, self.m, seg.spec, seg.consts, participants, rng=rng)
            bundles[seg.index] = qb
            if self.transcript is not None:
                for db in participants:
                    self.transcript.frame(self.q, self.m, seg.spec, qb.vectors[db])
        return bundles

    def run_read(self, theta: int) -> tuple[np.ndarray, dict]:
        """Privately download submodel theta; returns (values, cost delta)."""
        if not 1 <= theta <= self.m:
            raise BadIndex(f"theta={theta} outside 1..{self.m}")
        before_d, before_u = self.ledger.downloaded, self.ledger.useful_read
        bundles = self._fresh_queries(theta)
        out = np.zeros(self.l, dtype=np.int64)
        for seg in self.segments:
            qb = bundles[seg.index]
            for entry in seg.entries:
                answers = {
                    db: answer_query(entry.shards[db], qb, db) for db in entry.subset
                }
                if self.transcript is not None:
                    for db in entry.subset:
                        self.transcript.frame(self.q, self.m, seg.spec, answers[db])
                decoded = decode_read(answers, seg.spec, seg.consts, list(entry.subset))
                out[entry.start : entry.start + entry.count] = decoded.reshape(-1)
                self.ledger.add_read(
                    seg.index,
                    downloaded=seg.spec.R * seg.spec.K * entry.n_subpackets,
                    useful=entry.count,
                )
        self.last_queries = bundles
        self.last_theta = theta
        if self.verify and not (out == self.oracle[theta - 1]).all():
            raise InvariantViolation(f"read of submodel {theta} disagrees with oracle")
        delta = {
            "downloaded": self.ledger.downloaded - before_d,
            "useful_read": self.ledger.useful_read - before_u,
        }
        return out, delta

    def run_write(self, theta: int, delta: np.ndarray) -> dict:
        """Privately add ``delta`` to submodel theta on every database."""
        if not 1 <= theta <= self.m:
            raise BadIndex(f"theta={theta} outside 1..{self.m}")
        delta = np.asarray(delta, dtype=np.int64) % self.q
        if delta.shape != (self.l,):
            raise InvariantViolation(f"delta must have {self.l} entries")
        if self.last_theta == theta and self.last_queries:
            bundles = self.last_queries
        else:
            bundles = self._fresh_queries(theta)
        before_u, before_w = self.ledger.uploaded, self.ledger.useful_write
        for seg in self.segments:
            qb = bundles[seg.index]
            for entry_idx, entry in enumerate(seg.entries):
                block = self._delta_slice(delta, entry.start, entry.count, seg.spec)
                self._msg_counter += 1
                rng = _rng(self.seed, 3, self._msg_counter)
                ub = build_updates(
                    block,
                    theta,
                    seg.spec,
                    seg.consts,
                    list(entry.subset),
                    entry.null_set,
                    rng=rng,
                )
                for db in entry.subset:
                    if db in entry.null_set:
                        continue
                    apply_update(entry.shards[db], ub, qb, db)
                    if self.transcript is not None:
                        self.transcript.frame(self.q, self.m, seg.spec, ub.payload[db])
                self.ledger.add_write(
                    seg.index,
                    uploaded=seg.spec.K
                    * (seg.spec.R - len(entry.null_set))
                    * entry.n_subpackets,
                    useful=entry.count,
                )
        self.oracle[theta - 1] = (self.oracle[theta - 1] + delta) % self.q
        self.round += 1
        self.last_queries = {}
        self.last_theta = None
        return {
            "uploaded": self.ledger.uploaded - before_u,
            "useful_write": self.ledger.useful_write - before_w,
        }

    def run_round(self) -> dict:
        """One scripted round: random theta, read, random update, write."""
        rng = _rng(self.seed, 4, self.round)
        theta = int(rng.integers(1, self.m + 1))
        _, read_delta = self.run_read(theta)
        delta = rng.integers(0, self.q, size=self.l, dtype=np.int64)
        write_delta = self.run_write(theta, delta)
        costs = {
            "downloaded": read_delta["downloaded"],
            "uploaded": write_delta["uploaded"],
            "c_r": fraction_str(Fraction(read_delta["downloaded"], self.l)),
            "c_w": fraction_str(Fraction(write_delta["uploaded"], self.l)),
        }
        if self.transcript is not None:
            self.transcript.round_summary(self.round - 1, theta, costs)
        return {"theta": theta, **costs}


def minimal_l(plan: SimPlan | dict | str) -> int:
    """Smallest submodel length compatible with the plan's granularity.

    Every (segment, subset) piece must hold a whole number of subpackets:
    fraction * eta * L must be a multiple of y*K.
    """
    if not isinstance(plan, SimPlan):
        plan = parse_plan(plan)
    req = 1
    for seg in plan.segments:
        unit = seg.spec.y * seg.spec.K
        for eta, _ in seg.partition:
            share = seg.fraction * eta
            a, b = share.numerator, share.denominator
            need = unit * b // math.gcd(a, unit * b)
            req = math.lcm(req, need)
    return req


def init_system(
    plan: SimPlan | dict | str,
    m_count: int,
    length: int | None = None,
    seed: int = 0,
    transcript: TranscriptWriter | None = None,
) -> SystemState:
    """Encode every segment across its partition and stand up the databases."""
    if not isinstance(plan, SimPlan):
        plan = parse_plan(plan)
    if m_count < 2:
        raise BadIndex(f"need at least 2 submodels, got {m_count}")
    min_l = minimal_l(plan)
    if length is None:
        length = min_l
    elif length % min_l:
        raise IndivisibleL(
            f"L={length} incompatible with plan granularity; minimal valid L is {min_l}",
            min_l,
        )
    sys = SystemState(plan, m_count, length, seed)
    sys.transcript = transcript
    return sys


def measure_vs_theory(sys: SystemState, rounds: int) -> dict:
    """Run rounds and compare measured ledger ratios to predictions, exactly."""
    if rounds < 1:
        raise InvariantViolation("need at least one round")
    for _ in range(rounds):
        sys.run_round()
    report = {"rounds": rounds, "segments": [], "ok": True}
    for seg in sys.segments:
        counts = sys.ledger.per_segment[seg.index]
        c_r, c_w, c_t = cost_formulas(seg.spec)
        measured_r = Fraction(counts["downloaded"], counts["useful_read"])
        measured_w = Fraction(counts["uploaded"], counts["useful_write"])
        ok = measured_r == c_r and measured_w == c_w
        report["ok"] &= ok
        report["segments"].append(
            {
                "code": {"K": seg.spec.K, "R": seg.spec.R},
                "fraction": fraction_str(seg.fraction),
                "measured_c_r": fraction_str(measured_r),
                "predicted_c_r": fraction_str(c_r),
                "measured_c_w": fraction_str(measured_w),
                "predicted_c_w": fraction_str(c_w),
                "measured_c_t": fraction_str(measured_r + measured_w),
                "predicted_c_t": fraction_str(c_t),
                "ok": ok,
            }
        )
    blended = Fraction(sys.ledger.downloaded + sys.ledger.uploaded, sys.l * rounds)
    report["blended_c_t"] = fraction_str(blended)
    report["predicted_c_t"] = fraction_str(sys.plan.predicted_cost)
    report["blended_ok"] = blended == sys.plan.predicted_cost
    report["ok"] &= report["blended_ok"]
    return report
