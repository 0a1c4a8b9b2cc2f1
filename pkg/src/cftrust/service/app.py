"""FastAPI service wrapping the pipeline.

Endpoints mirror the CLI subcommands one-to-one: template config,
synthetic dataset generation, full runs, and plot re-emission. Errors
carry a machine-readable `kind` so clients (including the CLI) can map
them to exit codes.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import TEMPLATE, load_config, parse_config
from ..errors import (
    CftrustError,
    ConfigError,
    DataError,
    NumericDivergenceError,
    StageFailure,
)
from ..pipeline import RunReport, emit_plots, execute_run
from ..synth import generate_synthetic
from .schemas import (
    BatchSummary,
    HealthResponse,
    PlotsRequest,
    PlotsResponse,
    RunRequest,
    RunResponse,
    SynthRequest,
    SynthResponse,
    TemplateResponse,
)

_STATUS_BY_KIND = {
    "config": 400,
    "data": 422,
    "numeric": 500,
    "internal": 500,
}


def error_kind(exc: BaseException) -> str:
    if isinstance(exc, StageFailure):
        return error_kind(exc.cause)
    if isinstance(exc, ConfigError):
        return "config"
    if isinstance(exc, DataError):
        return "data"
    if isinstance(exc, NumericDivergenceError):
        return "numeric"
    return "internal"


def create_app() -> FastAPI:
    app = FastAPI(
        title="cftrust",
        version=__version__,
        description="Counterfactual trust scoring over batched reward-model runs",
    )

    @app.exception_handler(CftrustError)
    async def _handle_cftrust(request: Request, exc: CftrustError) -> JSONResponse:
        kind = error_kind(exc)
        body = {"kind": kind, "message": str(exc)}
        if isinstance(exc, StageFailure):
            body["stage"] = exc.stage
        return JSONResponse(status_code=_STATUS_BY_KIND[kind], content=body)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/config/template", response_model=TemplateResponse)
    def config_template() -> TemplateResponse:
        return TemplateResponse(config=TEMPLATE)

    @app.post("/datasets/synthetic", response_model=SynthResponse)
    def synth(req: SynthRequest) -> SynthResponse:
        stats = generate_synthetic(req.out_path, n=req.n, k=req.k, seed=req.seed)
        return SynthResponse(path=stats.path, rows=stats.rows, positive_rate=stats.positive_rate)

    @app.post("/runs", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        if (req.config_path is None) == (req.config_text is None):
            raise ConfigError("provide exactly one of config_path or config_text")
        if req.config_path is not None:
            config = load_config(req.config_path, seed_override=req.seed)
            if req.out_dir is not None:
                config.out_dir = Path(req.out_dir)
        else:
            config = parse_config(
                req.config_text,
                base_dir=req.base_dir,
                seed_override=req.seed,
                out_override=req.out_dir,
            )
        result, paths = execute_run(config)
        report = result.report
        return RunResponse(
            out_dir=str(config.out_dir),
            report_path=paths["report"],
            alerts=report.alerts,
            alert_threshold=report.alert_threshold,
            batches=[
                BatchSummary(
                    index=b["index"],
                    injected=b["injected"],
                    accuracy=b["accuracy"],
                    drift=b["drift"],
                    trust=b["trust"],
                    trust_smoothed=b["trust_smoothed"],
                )
                for b in report.batches
            ],
        )

    @app.post("/reports/plots", response_model=PlotsResponse)
    def plots(req: PlotsRequest) -> PlotsResponse:
        report_path = Path(req.report_path)
        if report_path.is_dir():
            report_path = report_path / "report.json"
        if not report_path.exists():
            raise DataError(f"report file {report_path} does not exist")
        report = RunReport.load(report_path)
        out_dir = Path(req.out_dir) if req.out_dir else report_path.parent / "plots"
        return PlotsResponse(written=emit_plots(report, out_dir))

    return app


app = create_app()
