"""Command line client for the simulation service.

Every command except `serve` talks to a service over HTTP: a remote one
named by --server, or a private in-process instance with --local (also the
fallback when no server is given). Work always flows through the same job
endpoints, so a local run and a remote run produce identical artifacts.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import httpx

from .harness import load_scenario
from .io import ConfigError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vppsim",
        description="Train, evaluate, and report on bidding policies for a "
                    "virtual power plant in a day-ahead auction.")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    def add_client_args(p: argparse.ArgumentParser):
        p.add_argument("--server", default=None,
                       help="service base URL; omit to run in-process")
        p.add_argument("--local", action="store_true",
                       help="force the in-process service")
        p.add_argument("--poll", type=float, default=0.5,
                       help="job poll interval in seconds")

    train = sub.add_parser("train", help="train a policy from a scenario file")
    train.add_argument("scenario", type=Path)
    train.add_argument("--out", required=True,
                       help="run directory for artifacts")
    train.add_argument("--resume", action="store_true",
                       help="continue from the run directory's checkpoint")
    add_client_args(train)

    ev = sub.add_parser("eval", help="evaluate a trained run greedily")
    ev.add_argument("scenario", type=Path)
    ev.add_argument("--out", required=True,
                    help="run directory holding checkpoint.npz")
    ev.add_argument("--episodes", type=int, default=None)
    add_client_args(ev)

    base = sub.add_parser("baseline", help="run a fixed reference policy")
    base.add_argument("scenario", type=Path)
    base.add_argument("--policy", required=True,
                      help="price_taker or no_vpp")
    base.add_argument("--out", required=True)
    base.add_argument("--episodes", type=int, default=None)
    add_client_args(base)

    rep = sub.add_parser("report", help="aggregate runs into a report")
    rep.add_argument("--runs", nargs="+", required=True,
                     help="run directories (train + eval artifacts)")
    rep.add_argument("--baselines", nargs="*", default=[],
                     help="baseline directories to include")
    rep.add_argument("--out", required=True)
    add_client_args(rep)

    return parser


def _payload(args: argparse.Namespace) -> dict:
    if args.command == "report":
        return {"kind": "report", "out_dir": args.out,
                "run_dirs": list(args.runs),
                "baseline_dirs": list(args.baselines)}
    cfg = load_scenario(args.scenario)
    payload = {"kind": args.command, "out_dir": args.out,
               "scenario": cfg.to_mapping()}
    if args.command == "train":
        payload["resume"] = bool(args.resume)
    if args.command in ("eval", "baseline") and args.episodes is not None:
        payload["episodes"] = args.episodes
    if args.command == "baseline":
        payload["policy"] = args.policy
    return payload


def _client(args: argparse.Namespace):
    if args.server and not args.local:
        return httpx.Client(base_url=args.server, timeout=30.0)
    from fastapi.testclient import TestClient

    from .service.app import create_app
    return TestClient(create_app())


def _run_job(client, payload: dict, poll_s: float) -> int:
    response = client.post("/runs", json=payload)
    if response.status_code != 202:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        print(f"error: {detail}", file=sys.stderr)
        return 2
    job = response.json()
    print(f"submitted {job['job_id']} ({payload['kind']})")
    body = job
    while body["state"] not in ("done", "failed"):
        time.sleep(poll_s)
        body = client.get(f"/runs/{job['job_id']}").json()
    if body["state"] == "failed":
        print(f"job failed: {body['error']}", file=sys.stderr)
        return 2
    for key, value in sorted((body["summary"] or {}).items()):
        print(f"{key} = {value}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service.app import create_app
        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    try:
        payload = _payload(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        with _client(args) as client:
            return _run_job(client, payload, args.poll)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
