"""Command-line client for the trust pipeline.

All logic lives in the core package and is shared with the HTTP service;
this module only parses arguments, builds the same request models the
service accepts, and maps errors to exit codes:

    0 success, 2 config error, 3 data error, 4 numeric divergence.

Every subcommand takes `--server URL` to run against a live service
instead of in-process.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import TEMPLATE, load_config
from .errors import CftrustError, StageFailure
from .pipeline import RunReport, emit_plots, execute_run
from .service.app import error_kind
from .service.schemas import PlotsRequest, RunRequest, SynthRequest
from .synth import generate_synthetic

_EXIT_BY_KIND = {"config": 2, "data": 3, "numeric": 4, "internal": 1}


def _fail(kind: str, message: str, stage: str | None = None) -> int:
    loc = f" [stage: {stage}]" if stage else ""
    print(f"error ({kind}){loc}: {message}", file=sys.stderr)
    return _EXIT_BY_KIND.get(kind, 1)


def _post(server: str, route: str, payload: dict) -> tuple[int, dict]:
    import httpx

    resp = httpx.post(server.rstrip("/") + route, json=payload, timeout=600.0)
    try:
        body = resp.json()
    except ValueError:
        body = {"kind": "internal", "message": resp.text}
    return resp.status_code, body


def _remote(server: str, route: str, payload: dict) -> tuple[int, dict | None]:
    """POST to the service; returns (exit_code, body or None on error)."""
    try:
        status, body = _post(server, route, payload)
    except Exception as exc:
        return _fail("internal", f"cannot reach server {server}: {exc}"), None
    if status >= 400:
        return _fail(body.get("kind", "internal"), body.get("message", ""), body.get("stage")), None
    return 0, body


def cmd_init(args: argparse.Namespace) -> int:
    out = Path(args.out or "cftrust.yaml")
    if out.exists() and not args.force:
        return _fail("config", f"{out} already exists (use --force to overwrite)")
    if args.server:
        code, body = _remote(args.server, "/config/template", {})
        if code:
            return code
        text = body["config"]
    else:
        text = TEMPLATE
    out.write_text(text, encoding="utf-8")
    if not args.quiet:
        print(f"wrote template config to {out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    req = SynthRequest(out_path=str(args.out), n=args.n, k=args.k, seed=args.seed)
    if args.server:
        code, body = _remote(args.server, "/datasets/synthetic", req.model_dump())
        if code:
            return code
        path, rows, rate = body["path"], body["rows"], body["positive_rate"]
    else:
        try:
            stats = generate_synthetic(req.out_path, n=req.n, k=req.k, seed=req.seed)
        except CftrustError as exc:
            return _fail(error_kind(exc), str(exc))
        path, rows, rate = stats.path, stats.rows, stats.positive_rate
    if not args.quiet:
        print(f"wrote {rows} rows to {path} (positive rate {rate:.4f})")
    return 0


def _print_run_summary(batches: list[dict], alerts: list[int], threshold: float, out_dir: str) -> None:
    print(f"{'batch':>5} {'trust':>8} {'smoothed':>9} {'drift':>8} {'accuracy':>9} injected")
    for b in batches:
        print(
            f"{b['index']:>5} {b['trust']:>8.4f} {b['trust_smoothed']:>9.4f} "
            f"{b['drift']:>8.4f} {b['accuracy']:>9.4f} {'yes' if b['injected'] else 'no'}"
        )
    if alerts:
        print(f"alerts (smoothed trust < {threshold}): batches {alerts}")
    else:
        print(f"no alerts (threshold {threshold})")
    print(f"outputs in {out_dir}")


def cmd_run(args: argparse.Namespace) -> int:
    req = RunRequest(
        config_path=str(Path(args.config).resolve()),
        seed=args.seed,
        out_dir=str(args.out) if args.out else None,
    )
    if args.server:
        code, body = _remote(args.server, "/runs", req.model_dump())
        if code:
            return code
        if not args.quiet:
            _print_run_summary(
                body["batches"], body["alerts"], body["alert_threshold"], body["out_dir"]
            )
        return 0
    try:
        config = load_config(req.config_path, seed_override=req.seed)
        if req.out_dir is not None:
            config.out_dir = Path(req.out_dir)
        result, paths = execute_run(config)
    except StageFailure as exc:
        qdir = getattr(exc, "quarantine_dir", None)
        if qdir and not args.quiet:
            print(f"partial outputs quarantined in {qdir}", file=sys.stderr)
        return _fail(error_kind(exc), str(exc.cause), stage=exc.stage)
    except CftrustError as exc:
        return _fail(error_kind(exc), str(exc))
    if not args.quiet:
        report = result.report
        _print_run_summary(
            report.batches, report.alerts, report.alert_threshold, str(config.out_dir)
        )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    req = PlotsRequest(
        report_path=str(Path(args.report).resolve()),
        out_dir=str(args.out) if args.out else None,
    )
    if args.server:
        code, body = _remote(args.server, "/reports/plots", req.model_dump())
        if code:
            return code
        written = body["written"]
    else:
        report_path = Path(req.report_path)
        if report_path.is_dir():
            report_path = report_path / "report.json"
        if not report_path.exists():
            return _fail("data", f"report file {report_path} does not exist")
        try:
            report = RunReport.load(report_path)
            out_dir = Path(req.out_dir) if req.out_dir else report_path.parent / "plots"
            written = emit_plots(report, out_dir)
        except CftrustError as exc:
            return _fail(error_kind(exc), str(exc))
    if not args.quiet:
        for p in written:
            print(f"wrote {p}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("cftrust.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cftrust",
        description="Counterfactual trust scoring over batched reward-model runs",
    )
    parser.add_argument("--version", action="version", version=f"cftrust {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--quiet", action="store_true", help="suppress normal output")
        p.add_argument("--server", default=None, help="run against a cftrust service URL")

    p = sub.add_parser("init", help="write a commented template config")
    p.add_argument("--out", default="cftrust.yaml", help="where to write the template")
    p.add_argument("--force", action="store_true", help="overwrite an existing file")
    common(p)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--n", type=int, default=5000, help="number of rows")
    p.add_argument("--k", type=int, default=10, help="intended batch count (needs n >= 20k)")
    p.add_argument("--seed", type=int, default=7, help="generator seed")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the full pipeline from a config")
    p.add_argument("--config", required=True, help="path to the YAML run config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="override the output directory")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-emit plot data from a stored report")
    p.add_argument("--report", required=True, help="report.json path or a run directory")
    p.add_argument("--out", default=None, help="plot output directory")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageFailure as exc:
        return _fail(error_kind(exc), str(exc.cause), stage=exc.stage)
    except CftrustError as exc:
        return _fail(error_kind(exc), str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
