"""Pydantic request/response models for the planner and simulator service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HeteroPlanRequest(BaseModel):
    mu: list[str] = Field(min_length=4, description="per-database fractions, exact strings")
    paper_rounded: bool = False
    seed: int = 0


class HeteroPlanResponse(BaseModel):
    plan: dict
    branch: str
    cost_floor_k: str | None = None
    cost_split_k: str | None = None
    predicted_cost: str
    predicted_cost_decimal: float


class HomoPlanRequest(BaseModel):
    n: int = Field(ge=4)
    mu: str
    seed: int = 0


class HomoPlanResponse(BaseModel):
    plan: dict
    gamma: str
    pair_lo: dict
    pair_hi: dict
    predicted_cost: str
    predicted_cost_decimal: float


class CurveRow(BaseModel):
    mu: str
    cost: str
    r_lo: int
    k_lo: int
    r_hi: int
    k_hi: int
    gamma: str
    divided_cost: str | None = None
    coded_cost: str | None = None


class CurveResponse(BaseModel):
    n: int
    rows: list[CurveRow]


class SimulateRequest(BaseModel):
    plan: dict
    m: int = Field(default=2, ge=2)
    l: int | None = None  # None picks the minimal valid length
    rounds: int = Field(default=1, ge=1)
    seed: int = 0
    include_transcript: bool = False
    debug_theta: bool = False


class SimulateResponse(BaseModel):
    ok: bool
    m: int
    l: int
    minimal_l: int
    rounds: int
    occupancy: dict[int, int]
    report: dict
    transcript: dict | None = None


class AuditRequest(BaseModel):
    q: int = 251
    m: int = Field(default=2, ge=2)
    seed: int = 0


class AuditResponse(BaseModel):
    ok: bool
    report: dict
