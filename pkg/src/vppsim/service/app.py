"""HTTP facade over the simulation core and the run harness.

Compute endpoints (power flow, clearing, dispatch, interval, shield) are
synchronous wrappers around the library on the bundled network and fleets.
Run endpoints hand harness work to a background job registry and report
progress by job id. Domain validation errors map to 400; shape errors are
FastAPI's own 422.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__, dispatch
from ..ders import (BUNDLED_FLEETS, bundled_fleet, bundled_load_curves,
                    bundled_res_profiles, sample_availability)
from ..grid import (PowerFlowError, bundled_network_path, evaluate_limits,
                    load_network, solve_power_flow)
from ..harness import (BASELINE_POLICIES, baseline_run, eval_run,
                       scenario_from_mapping, train_run, write_report)
from ..io import ConfigError
from ..market import Bid, clear, vpp_market_revenue
from ..shield import SafetyShield
from . import schemas
from .jobs import JobRegistry


def _finite(x: float) -> float | None:
    """JSON has no NaN or inf; report those as null."""
    x = float(x)
    return x if math.isfinite(x) else None


def _summary_dict(summary) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in dataclasses.asdict(summary).items()}


def create_app() -> FastAPI:
    app = FastAPI(title="vppsim service", version=__version__)
    net = load_network(bundled_network_path())
    curves = bundled_load_curves()
    profiles = bundled_res_profiles()
    registry = JobRegistry()
    app.state.jobs = registry

    def bad_request(msg) -> None:
        raise HTTPException(status_code=400, detail=str(msg))

    def availability(fleet_name: str, hour: int, soe_kwh, res_override):
        try:
            fleet = bundled_fleet(fleet_name)
            draw = sample_availability(fleet, curves, profiles, hour,
                                       rng=None, soe_kwh=soe_kwh)
        except (ConfigError, ValueError) as exc:
            bad_request(exc)
        if res_override:
            unknown = set(res_override) - set(draw.res_avail_kw)
            if unknown:
                bad_request(f"unknown renewable units {sorted(unknown)}")
            draw = dataclasses.replace(
                draw, res_avail_kw={**draw.res_avail_kw, **res_override})
        return fleet, draw

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return {"status": "ok", "version": __version__,
                "fleets": list(BUNDLED_FLEETS)}

    @app.post("/powerflow", response_model=schemas.PowerFlowResponse)
    def powerflow(req: schemas.PowerFlowRequest):
        p = np.zeros(net.n_bus)
        q = np.zeros(net.n_bus)
        for mapping, vec in ((req.p_kw, p), (req.q_kvar, q)):
            for bus, value in mapping.items():
                if not 0 <= bus < net.n_bus:
                    bad_request(f"bus {bus} outside 0..{net.n_bus - 1}")
                vec[bus] = value
        try:
            sol = solve_power_flow(net, p, q, tol=req.tol)
        except PowerFlowError as exc:
            bad_request(exc)
        report = evaluate_limits(net, sol)
        return {
            "converged": bool(sol.converged),
            "iterations": int(sol.iterations),
            "residual_pu": sol.residual_pu,
            "pcc_kw": sol.pcc_kw,
            "losses_kw": sol.losses_kw,
            "v_pu": [float(v) for v in sol.v_pu],
            "limits": {
                "ok": bool(report.ok),
                "voltage_violations": [
                    {"bus": b, "v_pu": v, "bound_pu": bound}
                    for b, v, bound in report.voltage_violations],
                "thermal_violations": [
                    {"bus": b, "s_kva": s, "s_max_kva": s_max}
                    for b, s, s_max in report.thermal_violations],
            },
        }

    @app.post("/market/clear", response_model=schemas.ClearResponse)
    def market_clear(req: schemas.ClearRequest):
        try:
            bids = [Bid(side=b.side, price_eur_per_kwh=b.price_eur_per_kwh,
                        quantity_kw=b.quantity_kw, owner=b.owner, name=b.name)
                    for b in req.bids]
            outcome = clear(bids)
        except ValueError as exc:
            bad_request(exc)
        return {
            "mcp": outcome.mcp,
            "total_cleared_kw": outcome.total_cleared_kw,
            "cleared_kw": [float(c) for c in outcome.cleared_kw],
            "dual_lo": outcome.dual_lo,
            "dual_hi": outcome.dual_hi,
            "marginal_index": outcome.marginal_index,
            "vpp_revenue_eur": vpp_market_revenue(bids, outcome),
        }

    @app.post("/dispatch", response_model=schemas.DispatchResponse)
    def run_dispatch(req: schemas.DispatchRequest):
        fleet, draw = availability(req.fleet, req.hour,
                                   req.soe_kwh, req.res_avail_kw)
        try:
            res = dispatch.solve_opf(net, fleet, draw, req.p_disp_kw,
                                     optimize=req.optimize, tol_kw=req.tol_kw)
        except dispatch.DispatchError as exc:
            bad_request(exc)
        return {
            "feasible": bool(res.feasible),
            "reason": res.reason,
            "p_kw": res.p_kw,
            "q_kvar": res.q_kvar,
            "cost_eur": _finite(res.cost_eur),
            "pmc_eur_per_kwh": _finite(res.pmc_eur_per_kwh),
            "pcc_kw": _finite(res.pcc_kw),
            "losses_kw": _finite(res.losses_kw),
            "target_gap_kw": _finite(res.target_gap_kw),
            "flow_evals": int(res.flow_evals),
            "limits_ok": bool(res.limits.ok) if res.limits is not None else None,
        }

    @app.post("/interval", response_model=schemas.IntervalResponse)
    def export_interval(req: schemas.IntervalRequest):
        fleet, draw = availability(req.fleet, req.hour,
                                   req.soe_kwh, req.res_avail_kw)
        try:
            ivl = dispatch.feasible_export_interval(net, fleet, draw,
                                                    tol_kw=req.tol_kw)
        except dispatch.DispatchError as exc:
            bad_request(exc)
        return {"u_min_kw": ivl.u_min_kw, "u_max_kw": ivl.u_max_kw,
                "opf_calls": ivl.opf_calls}

    @app.post("/shield/project", response_model=schemas.ShieldResponse)
    def shield_project(req: schemas.ShieldRequest):
        try:
            act = SafetyShield(req.eps_eur_per_kwh,
                               req.activation_tol_kw).apply(
                req.u_bid_kw, req.u_min_kw, req.u_max_kw)
        except ValueError as exc:
            bad_request(exc)
        return {"u_bid_kw": act.u_bid_kw, "u_safe_kw": act.u_safe_kw,
                "delta_kw": act.delta_kw, "cost_eur": act.cost_eur,
                "active": act.active}

    def build_work(req: schemas.RunRequest):
        if req.kind == "report":
            if not req.run_dirs:
                raise ValueError("report needs run_dirs")
            run_dirs = list(req.run_dirs)
            baseline_dirs = list(req.baseline_dirs)
            out_dir = req.out_dir

            def report_work():
                out = write_report(run_dirs, out_dir,
                                   baseline_dirs=baseline_dirs)
                return {"out_dir": str(out),
                        "files": sorted(p.name for p in Path(out).iterdir())}

            return report_work

        if req.scenario is None:
            raise ValueError(f"{req.kind} needs a scenario")
        cfg = scenario_from_mapping(dict(req.scenario), context="scenario")
        if req.kind == "train":
            return lambda: _summary_dict(
                train_run(cfg, req.out_dir, resume=req.resume))
        if req.kind == "eval":
            return lambda: _summary_dict(
                eval_run(cfg, req.out_dir, episodes=req.episodes))
        if req.policy not in BASELINE_POLICIES:
            raise ValueError(
                f"baseline needs a policy from {BASELINE_POLICIES}, "
                f"got {req.policy!r}")
        return lambda: _summary_dict(
            baseline_run(cfg, req.policy, req.out_dir, episodes=req.episodes))

    @app.post("/runs", response_model=schemas.JobView, status_code=202)
    def submit_run(req: schemas.RunRequest):
        try:
            work = build_work(req)
        except (ConfigError, ValueError) as exc:
            bad_request(exc)
        return registry.submit(req.kind, work).view()

    @app.get("/runs", response_model=schemas.JobListResponse)
    def list_runs():
        return {"jobs": [job.view() for job in registry.list()]}

    @app.get("/runs/{job_id}", response_model=schemas.JobView)
    def get_run(job_id: str):
        job = registry.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no job {job_id}")
        return job.view()

    return app
