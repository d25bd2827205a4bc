"""Versioned JSON plan documents shared by the planners, simulator and CLI.

A plan document is a plain dict with schema version 1. Exact rationals are
serialized as fraction strings ("430/37", "8"); evaluation constants as
decimal integers. Serialization is canonical (sorted keys, compact
separators, trailing newline) so parse -> serialize round-trips to
byte-identical form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .errors import InputError
from .field import EvalConstants, make_field
from .hetero import StoragePlan, _frac
from .homo import HomoPlan, section_holders
from .protocol import CodeSpec

SCHEMA_VERSION = 1


def fraction_str(value: Fraction) -> str:
    return str(Fraction(value))


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def _code_doc(spec: CodeSpec) -> dict:
    return {"K": spec.K, "R": spec.R, "x": spec.x, "y": spec.y}


def hetero_plan_doc(plan: StoragePlan) -> dict:
    segments = []
    for seg in plan.segments:
        segments.append(
            {
                "code": _code_doc(seg.spec),
                "fraction": fraction_str(seg.fraction),
                "allocation": [fraction_str(a) for a in seg.alloc],
                "partition": [
                    {"eta": fraction_str(eta), "subset": list(subset)}
                    for eta, subset in zip(seg.partition.etas, seg.partition.subsets)
                ],
                "seed": seg.seed,
                "consts": {
                    "alphas": list(seg.alphas),
                    "f": [list(row) for row in seg.f],
                },
            }
        )
    costs = {}
    if plan.cost_floor_k is not None:
        costs["floor_k"] = fraction_str(plan.cost_floor_k)
    if plan.cost_split_k is not None:
        costs["split_k"] = fraction_str(plan.cost_split_k)
    return {
        "schema": SCHEMA_VERSION,
        "plan_kind": "heterogeneous",
        "n": plan.n,
        "q": plan.q,
        "constraints": [fraction_str(v) for v in plan.mu],
        "derived": {
            "k": fraction_str(plan.params.k),
            "p": fraction_str(plan.params.p),
            "r": fraction_str(plan.params.r),
            "s": fraction_str(plan.params.s),
        },
        "branch": plan.branch,
        "paper_rounded": plan.paper_rounded,
        "mixture": None
        if plan.mixture is None
        else {
            "alpha": fraction_str(plan.mixture.alpha),
            "beta": fraction_str(plan.mixture.beta),
            "delta": fraction_str(plan.mixture.delta),
        },
        "costs": costs,
        "predicted_cost": fraction_str(plan.predicted_cost),
        "segments": segments,
    }


def homo_plan_doc(plan: HomoPlan, q: int, base_seed: int = 0) -> dict:
    """Homogeneous plans reuse the same segment schema with cyclic sections."""
    from .field import gen_eval_constants
    from .protocol import derive_code

    field = make_field(q)
    pieces = []
    if plan.gamma > 0:
        pieces.append((plan.pair_lo, plan.gamma))
    if plan.gamma < 1 and plan.pair_hi != plan.pair_lo:
        pieces.append((plan.pair_hi, 1 - plan.gamma))
    segments = []
    for idx, (pair, fraction) in enumerate(pieces):
        spec = derive_code(pair.K, pair.R)
        holders = section_holders(plan.n, pair.R)
        alloc = fraction * Fraction(pair.R, plan.n * pair.K)
        seed = base_seed + idx
        consts = gen_eval_constants(field, plan.n, spec.y, spec.K, seed=seed)
        segments.append(
            {
                "code": _code_doc(spec),
                "fraction": fraction_str(fraction),
                "allocation": [fraction_str(alloc)] * plan.n,
                "partition": [
                    {
                        "eta": fraction_str(Fraction(1, plan.n)),
                        "subset": list(holders[s]),
                    }
                    for s in range(1, plan.n + 1)
                ],
                "seed": seed,
                "consts": {
                    "alphas": list(consts.alphas),
                    "f": [list(row) for row in consts.f],
                },
            }
        )
    return {
        "schema": SCHEMA_VERSION,
        "plan_kind": "homogeneous",
        "n": plan.n,
        "q": q,
        "constraints": [fraction_str(plan.mu)] * plan.n,
        "derived": {
            "mu": fraction_str(plan.mu),
            "gamma": fraction_str(plan.gamma),
            "pair_lo": {"R": plan.pair_lo.R, "K": plan.pair_lo.K},
            "pair_hi": {"R": plan.pair_hi.R, "K": plan.pair_hi.K},
        },
        "branch": None,
        "paper_rounded": False,
        "mixture": None,
        "costs": {},
        "predicted_cost": fraction_str(plan.predicted_cost),
        "segments": segments,
    }


def single_code_plan_doc(K: int, R: int, q: int, seed: int = 0) -> dict:
    """Minimal plan exercising one (K, R) code: R databases, full segment."""
    from .field import gen_eval_constants
    from .protocol import derive_code

    spec = derive_code(K, R)
    consts = gen_eval_constants(make_field(q), R, spec.y, spec.K, seed=seed)
    mu = Fraction(1, K)
    return {
        "schema": SCHEMA_VERSION,
        "plan_kind": "single_code",
        "n": R,
        "q": q,
        "constraints": [fraction_str(mu)] * R,
        "derived": {"k": str(K), "p": fraction_str(mu * R), "r": str(R), "s": str(R)},
        "branch": None,
        "paper_rounded": False,
        "mixture": None,
        "costs": {},
        "predicted_cost": fraction_str(
            Fraction(4 * R, R - K - 1) if (R - K) % 2 else Fraction(4 * R - 2, R - K - 2)
        ),
        "segments": [
            {
                "code": _code_doc(spec),
                "fraction": "1",
                "allocation": [fraction_str(mu)] * R,
                "partition": [{"eta": "1", "subset": list(range(1, R + 1))}],
                "seed": seed,
                "consts": {
                    "alphas": list(consts.alphas),
                    "f": [list(row) for row in consts.f],
                },
            }
        ],
    }


@dataclass(frozen=True)
class SimSegment:
    """Normalized executable view of one plan segment."""

    spec: CodeSpec
    fraction: Fraction
    allocation: tuple[Fraction, ...]
    partition: tuple[tuple[Fraction, tuple[int, ...]], ...]
    seed: int
    consts: EvalConstants


@dataclass(frozen=True)
class SimPlan:
    kind: str
    n: int
    q: int
    constraints: tuple[Fraction, ...]
    predicted_cost: Fraction
    segments: tuple[SimSegment, ...]
    doc: dict


def parse_plan(doc: dict | str) -> SimPlan:
    """Validate and normalize a plan document for execution."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA_VERSION:
        raise InputError(f"unsupported plan schema: {doc.get('schema') if isinstance(doc, dict) else doc!r}")
    try:
        n = int(doc["n"])
        q = int(doc["q"])
        field = make_field(q)
        segments = []
        for seg in doc["segments"]:
            code = seg["code"]
            spec = CodeSpec(K=int(code["K"]), R=int(code["R"]), x=int(code["x"]), y=int(code["y"]))
            consts = EvalConstants(
                field=field,
                alphas=tuple(int(v) for v in seg["consts"]["alphas"]),
                f=tuple(tuple(int(v) for v in row) for row in seg["consts"]["f"]),
                seed=int(seg["seed"]),
            )
            partition = tuple(
                (_frac(p["eta"]), tuple(int(db) for db in p["subset"]))
                for p in seg["partition"]
            )
            for _, subset in partition:
                if len(subset) != spec.R:
                    raise InputError(
                        f"partition subset {subset} has {len(subset)} databases, code needs {spec.R}"
                    )
                if not all(1 <= db <= n for db in subset):
                    raise InputError(f"subset {subset} references unknown databases")
            if sum((eta for eta, _ in partition), start=Fraction(0)) != 1:
                raise InputError("partition fractions of a segment must sum to 1")
            segments.append(
                SimSegment(
                    spec=spec,
                    fraction=_frac(seg["fraction"]),
                    allocation=tuple(_frac(a) for a in seg["allocation"]),
                    partition=partition,
                    seed=int(seg["seed"]),
                    consts=consts,
                )
            )
        plan = SimPlan(
            kind=str(doc["plan_kind"]),
            n=n,
            q=q,
            constraints=tuple(_frac(v) for v in doc["constraints"]),
            predicted_cost=_frac(doc["predicted_cost"]),
            segments=tuple(segments),
            doc=doc,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed plan document: {exc}") from exc
    total = sum((seg.fraction for seg in plan.segments), start=Fraction(0))
    if total != 1:
        raise InputError(f"segment fractions sum to {total}, expected 1")
    return plan
