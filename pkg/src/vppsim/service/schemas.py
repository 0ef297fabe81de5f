"""Request and response shapes for the HTTP service.

Power conventions match the core: bus injections are generation-positive,
market quantities are non-negative with an explicit side, and the exchange
variable u is export-positive at the interconnection point.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str
    fleets: list[str]


class PowerFlowRequest(BaseModel):
    p_kw: dict[int, float] = Field(default_factory=dict)
    q_kvar: dict[int, float] = Field(default_factory=dict)
    tol: float = Field(default=1e-8, gt=0)


class VoltageViolation(BaseModel):
    bus: int
    v_pu: float
    bound_pu: float


class ThermalViolation(BaseModel):
    bus: int
    s_kva: float
    s_max_kva: float


class LimitView(BaseModel):
    ok: bool
    voltage_violations: list[VoltageViolation]
    thermal_violations: list[ThermalViolation]


class PowerFlowResponse(BaseModel):
    converged: bool
    iterations: int
    residual_pu: float
    pcc_kw: float
    losses_kw: float
    v_pu: list[float]
    limits: LimitView


class BidModel(BaseModel):
    side: Literal["supply", "demand"]
    price_eur_per_kwh: float
    quantity_kw: float = Field(ge=0)
    owner: Literal["rival", "vpp"] = "rival"
    name: str = ""


class ClearRequest(BaseModel):
    bids: list[BidModel] = Field(min_length=1)


class ClearResponse(BaseModel):
    mcp: float
    total_cleared_kw: float
    cleared_kw: list[float]
    dual_lo: float
    dual_hi: float
    marginal_index: int | None
    vpp_revenue_eur: float


class DispatchRequest(BaseModel):
    fleet: str = "basecase"
    hour: int = Field(ge=0, le=23)
    p_disp_kw: float = 0.0
    soe_kwh: dict[str, float] | None = None
    res_avail_kw: dict[str, float] | None = None
    optimize: bool = True
    tol_kw: float = Field(default=1.0, gt=0)


class DispatchResponse(BaseModel):
    feasible: bool
    reason: str
    p_kw: dict[str, float]
    q_kvar: dict[str, float]
    cost_eur: float | None
    pmc_eur_per_kwh: float | None
    pcc_kw: float | None
    losses_kw: float | None
    target_gap_kw: float | None
    flow_evals: int
    limits_ok: bool | None


class IntervalRequest(BaseModel):
    fleet: str = "basecase"
    hour: int = Field(ge=0, le=23)
    soe_kwh: dict[str, float] | None = None
    res_avail_kw: dict[str, float] | None = None
    tol_kw: float = Field(default=1.0, gt=0)


class IntervalResponse(BaseModel):
    u_min_kw: float
    u_max_kw: float
    opf_calls: int


class ShieldRequest(BaseModel):
    u_bid_kw: float
    u_min_kw: float
    u_max_kw: float
    eps_eur_per_kwh: float = Field(default=1.0, ge=0)
    activation_tol_kw: float = Field(default=1.0, ge=0)


class ShieldResponse(BaseModel):
    u_bid_kw: float
    u_safe_kw: float
    delta_kw: float
    cost_eur: float
    active: bool


class RunRequest(BaseModel):
    kind: Literal["train", "eval", "baseline", "report"]
    out_dir: str
    scenario: dict | None = None
    resume: bool = False
    policy: str | None = None
    episodes: int | None = None
    run_dirs: list[str] | None = None
    baseline_dirs: list[str] = Field(default_factory=list)


class JobView(BaseModel):
    job_id: str
    kind: str
    state: Literal["queued", "running", "done", "failed"]
    error: str = ""
    summary: dict | None = None


class JobListResponse(BaseModel):
    jobs: list[JobView]
