"""Command-line front end: a thin client over the service endpoints.

By default requests go to the in-process app over an ASGI transport, so no
server needs to be running; ``--server URL`` points at a remote instance
instead. Exit codes: 0 ok, 2 bad input, 3 invariant violation, 4 privacy
distance nonzero.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import csv
import json
import sys
from pathlib import Path

import httpx

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INVARIANT = 3
EXIT_PRIVACY = 4


class ServiceClient:
    def __init__(self, server: str | None):
        self.server = server

    def request(self, method: str, path: str, **kwargs) -> httpx.Response:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=300.0) as client:
                return client.request(method, path, **kwargs)
        return asyncio.run(self._asgi_request(method, path, **kwargs))

    async def _asgi_request(self, method: str, path: str, **kwargs) -> httpx.Response:
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://pruw.local", timeout=300.0
        ) as client:
            return await client.request(method, path, **kwargs)


def _fail(resp: httpx.Response) -> int:
    try:
        detail = resp.json()
    except json.JSONDecodeError:
        detail = {"message": resp.text}
    message = detail.get("message") or detail.get("detail") or resp.text
    print(f"error: {message}", file=sys.stderr)
    if resp.status_code == 409:
        return EXIT_INVARIANT
    return EXIT_INPUT


def _fmt(fraction: str) -> str:
    from fractions import Fraction

    return f"{fraction} ({float(Fraction(fraction)):.4f})"


def _parse_mu_args(values: list[str] | None, mu_file: str | None) -> list[str]:
    out: list[str] = []
    if mu_file:
        out.extend(
            line.strip() for line in Path(mu_file).read_text().splitlines() if line.strip()
        )
    for v in values or []:
        token = v.replace("×", "x")
        if "x" in token:
            value, _, count = token.partition("x")
            out.extend([value] * int(count))
        else:
            out.append(token)
    return out


def cmd_plan_hetero(args: argparse.Namespace) -> int:
    mu = _parse_mu_args(args.mu, args.mu_file)
    if not mu:
        print("error: no storage constraints given", file=sys.stderr)
        return EXIT_INPUT
    client = ServiceClient(args.server)
    resp = client.request(
        "POST",
        "/plan/hetero",
        json={"mu": mu, "paper_rounded": args.paper_rounded, "seed": args.seed},
    )
    if resp.status_code != 200:
        return _fail(resp)
    data = resp.json()
    if data["cost_floor_k"] is not None:
        print(f"C1 = {_fmt(data['cost_floor_k'])}")
    if data["cost_split_k"] is not None:
        print(f"C2 = {_fmt(data['cost_split_k'])}")
    print(f"branch = {data['branch']}")
    print(f"predicted_cost = {_fmt(data['predicted_cost'])}")
    if args.out:
        _write_plan(args.out, data["plan"])
        print(f"wrote {args.out}")
    return EXIT_OK


def _write_plan(path: str, plan: dict) -> None:
    from .planfile import canonical_json

    Path(path).write_text(canonical_json(plan))


def cmd_plan_homo(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    if args.mu is None and not args.curve:
        print("error: need --mu and/or --curve", file=sys.stderr)
        return EXIT_INPUT
    if args.mu is not None:
        resp = client.request(
            "POST", "/plan/homo", json={"n": args.n, "mu": args.mu, "seed": args.seed}
        )
        if resp.status_code != 200:
            return _fail(resp)
        data = resp.json()
        lo, hi = data["pair_lo"], data["pair_hi"]
        print(f"gamma = {_fmt(data['gamma'])}")
        print(f"codes = ({lo['R']},{lo['K']}) cost {_fmt(lo['cost'])} | "
              f"({hi['R']},{hi['K']}) cost {_fmt(hi['cost'])}")
        print(f"predicted_cost = {_fmt(data['predicted_cost'])}")
        if args.out:
            _write_plan(args.out, data["plan"])
            print(f"wrote {args.out}")
    if args.curve:
        resp = client.request("GET", "/plan/homo/curve", params={"n": args.n})
        if resp.status_code != 200:
            return _fail(resp)
        rows = resp.json()["rows"]
        with open(args.curve, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["mu", "cost", "r_lo", "k_lo", "r_hi", "k_hi", "gamma",
                 "divided_cost", "coded_cost"]
            )
            for row in rows:
                writer.writerow(
                    [row["mu"], row["cost"], row["r_lo"], row["k_lo"], row["r_hi"],
                     row["k_hi"], row["gamma"], row["divided_cost"] or "",
                     row["coded_cost"] or ""]
                )
        print(f"wrote {args.curve} ({len(rows)} rows)")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    plan = json.loads(Path(args.plan).read_text())
    length = None if args.l == "auto" else int(args.l)
    client = ServiceClient(args.server)
    resp = client.request(
        "POST",
        "/simulate",
        json={
            "plan": plan,
            "m": args.m,
            "l": length,
            "rounds": args.rounds,
            "seed": args.seed,
            "include_transcript": bool(args.transcript),
            "debug_theta": args.debug_theta,
        },
    )
    if resp.status_code != 200:
        return _fail(resp)
    data = resp.json()
    print(f"M = {data['m']}  L = {data['l']}  (minimal L = {data['minimal_l']})  "
          f"rounds = {data['rounds']}")
    for seg in data["report"]["segments"]:
        code = seg["code"]
        print(f"  code ({code['K']},{code['R']}) fraction {seg['fraction']}: "
              f"C_R {seg['measured_c_r']} vs {seg['predicted_c_r']}, "
              f"C_W {seg['measured_c_w']} vs {seg['predicted_c_w']}, "
              f"C_T {seg['measured_c_t']} vs {seg['predicted_c_t']} "
              f"[{'ok' if seg['ok'] else 'MISMATCH'}]")
    print(f"blended C_T = {_fmt(data['report']['blended_c_t'])} "
          f"vs predicted {_fmt(data['report']['predicted_c_t'])}")
    if args.transcript and data.get("transcript"):
        tdir = Path(args.transcript)
        tdir.mkdir(parents=True, exist_ok=True)
        (tdir / "messages.bin").write_bytes(
            base64.b64decode(data["transcript"]["messages_b64"])
        )
        with open(tdir / "rounds.jsonl", "w") as fh:
            for entry in data["transcript"]["rounds"]:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
        print(f"wrote transcript to {tdir}")
    summary = {
        "ok": data["ok"],
        "l": data["l"],
        "rounds": data["rounds"],
        "blended_c_t": data["report"]["blended_c_t"],
        "predicted_c_t": data["report"]["predicted_c_t"],
    }
    print(json.dumps(summary, sort_keys=True))
    if not data["ok"]:
        print("error: measured costs disagree with predictions", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    client = ServiceClient(args.server)
    resp = client.request("POST", "/audit", json={"q": args.q, "m": args.m})
    if resp.status_code != 200:
        return _fail(resp)
    data = resp.json()
    print(json.dumps(data["report"], indent=2, sort_keys=True))
    if not data["ok"]:
        print("error: nonzero total-variation distance", file=sys.stderr)
        return EXIT_PRIVACY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pruw",
        description="Plan, simulate and audit private read-update-write storage.",
    )
    parser.add_argument("--server", default=None, help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan-hetero", help="plan for heterogeneous storage budgets")
    p.add_argument("--mu", nargs="*", help="fractions, e.g. 0.37 0.35 or 0.37x5")
    p.add_argument("--mu-file", help="file with one fraction per line")
    p.add_argument("--paper-rounded", action="store_true",
                   help="truncate k to one decimal before planning")
    p.add_argument("--out", help="write the plan JSON here")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_plan_hetero)

    p = sub.add_parser("plan-homo", help="plan for a common storage budget")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mu", default=None)
    p.add_argument("--out", help="write the plan JSON here")
    p.add_argument("--curve", help="write the cost-curve CSV here")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_plan_homo)

    p = sub.add_parser("simulate", help="run read/write rounds over a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--m", type=int, default=2, help="number of submodels")
    p.add_argument("--l", default="auto", help="parameters per submodel, or 'auto'")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transcript", help="directory for message frames and round log")
    p.add_argument("--debug-theta", action="store_true",
                   help="include plaintext indices in the round log (tests only)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("audit", help="exhaustive privacy/security audit")
    p.add_argument("--q", type=int, default=251)
    p.add_argument("--m", type=int, default=2)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        print(f"error: service unreachable: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
