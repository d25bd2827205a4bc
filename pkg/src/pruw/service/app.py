"""FastAPI service wrapping the planners, simulator and audits.

Domain errors map onto HTTP statuses the thin CLI client translates to its
exit-code contract: bad input is 400, invariant violations are 409. Run
standalone with ``uvicorn pruw.service.app:app``.
"""

from __future__ import annotations

import base64
import json
import tempfile
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..audit import audit_privacy
from ..errors import PruwError
from ..field import DEFAULT_SIM_PRIME
from ..hetero import ConstraintSet, plan_hetero
from ..homo import cost_curve, plan_homo
from ..planfile import fraction_str, hetero_plan_doc, homo_plan_doc, parse_plan
from ..sim import TranscriptWriter, init_system, measure_vs_theory, minimal_l
from .models import (
    AuditRequest,
    AuditResponse,
    CurveResponse,
    CurveRow,
    HeteroPlanRequest,
    HeteroPlanResponse,
    HomoPlanRequest,
    HomoPlanResponse,
    SimulateRequest,
    SimulateResponse,
)

app = FastAPI(
    title="pruw service",
    description="Planning and simulation for private read-update-write "
    "over storage-constrained databases",
    version="0.1.0",
)


@app.exception_handler(PruwError)
async def pruw_error_handler(_: Request, exc: PruwError) -> JSONResponse:
    status = 400 if exc.error_class == "input" else 409
    detail = {"error_class": exc.error_class, "message": str(exc)}
    if hasattr(exc, "minimal_l"):
        detail["minimal_l"] = exc.minimal_l
    return JSONResponse(status_code=status, content=detail)


@app.get("/health")
async def health() -> dict:
    return {"status": "ok", "service": "pruw", "version": app.version}


@app.post("/plan/hetero", response_model=HeteroPlanResponse)
async def plan_hetero_endpoint(req: HeteroPlanRequest) -> HeteroPlanResponse:
    cs = ConstraintSet.from_values(req.mu)
    plan = plan_hetero(
        cs, paper_rounded=req.paper_rounded, q=DEFAULT_SIM_PRIME, base_seed=req.seed
    )
    return HeteroPlanResponse(
        plan=hetero_plan_doc(plan),
        branch=plan.branch,
        cost_floor_k=None if plan.cost_floor_k is None else fraction_str(plan.cost_floor_k),
        cost_split_k=None if plan.cost_split_k is None else fraction_str(plan.cost_split_k),
        predicted_cost=fraction_str(plan.predicted_cost),
        predicted_cost_decimal=float(plan.predicted_cost),
    )


@app.post("/plan/homo", response_model=HomoPlanResponse)
async def plan_homo_endpoint(req: HomoPlanRequest) -> HomoPlanResponse:
    plan = plan_homo(req.n, req.mu)
    return HomoPlanResponse(
        plan=homo_plan_doc(plan, q=DEFAULT_SIM_PRIME, base_seed=req.seed),
        gamma=fraction_str(plan.gamma),
        pair_lo={"R": plan.pair_lo.R, "K": plan.pair_lo.K, "cost": fraction_str(plan.pair_lo.cost)},
        pair_hi={"R": plan.pair_hi.R, "K": plan.pair_hi.K, "cost": fraction_str(plan.pair_hi.cost)},
        predicted_cost=fraction_str(plan.predicted_cost),
        predicted_cost_decimal=float(plan.predicted_cost),
    )


@app.get("/plan/homo/curve", response_model=CurveResponse)
async def curve_endpoint(n: int) -> CurveResponse:
    rows = []
    for row in cost_curve(n):
        rows.append(
            CurveRow(
                mu=fraction_str(row["mu"]),
                cost=fraction_str(row["cost"]),
                r_lo=row["r_lo"],
                k_lo=row["k_lo"],
                r_hi=row["r_hi"],
                k_hi=row["k_hi"],
                gamma=fraction_str(row["gamma"]),
                divided_cost=None if row["divided_cost"] is None else fraction_str(row["divided_cost"]),
                coded_cost=None if row["coded_cost"] is None else fraction_str(row["coded_cost"]),
            )
        )
    return CurveResponse(n=n, rows=rows)


@app.post("/simulate", response_model=SimulateResponse)
async def simulate_endpoint(req: SimulateRequest) -> SimulateResponse:
    plan = parse_plan(req.plan)
    transcript_payload = None
    if req.include_transcript:
        with tempfile.TemporaryDirectory() as tmp:
            writer = TranscriptWriter(tmp, salt=req.seed, debug_theta=req.debug_theta)
            state = init_system(plan, req.m, req.l, seed=req.seed, transcript=writer)
            report = measure_vs_theory(state, req.rounds)
            writer.close()
            messages = (Path(tmp) / "messages.bin").read_bytes()
            rounds = [
                json.loads(line)
                for line in (Path(tmp) / "rounds.jsonl").read_text().splitlines()
            ]
            transcript_payload = {
                "messages_b64": base64.b64encode(messages).decode(),
                "rounds": rounds,
            }
    else:
        state = init_system(plan, req.m, req.l, seed=req.seed)
        report = measure_vs_theory(state, req.rounds)
    return SimulateResponse(
        ok=bool(report["ok"]),
        m=req.m,
        l=state.l,
        minimal_l=minimal_l(plan),
        rounds=req.rounds,
        occupancy=state.occupancy(),
        report=report,
        transcript=transcript_payload,
    )


@app.post("/audit", response_model=AuditResponse)
async def audit_endpoint(req: AuditRequest) -> AuditResponse:
    report = audit_privacy(q=req.q, m_count=req.m, seed=req.seed)
    return AuditResponse(ok=bool(report["ok"]), report=report)
