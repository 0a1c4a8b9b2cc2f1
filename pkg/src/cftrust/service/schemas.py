"""Request/response models for the HTTP service.

The CLI builds these same models, so the two front ends cannot drift
apart on payload shape.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class TemplateResponse(BaseModel):
    config: str


class SynthRequest(BaseModel):
    out_path: str
    n: int = Field(default=5000, ge=1)
    k: int = Field(default=10, ge=2)
    seed: int = 7


class SynthResponse(BaseModel):
    path: str
    rows: int
    positive_rate: float


class RunRequest(BaseModel):
    """Run from a config file path or inline config text (exactly one)."""

    config_path: str | None = None
    config_text: str | None = None
    base_dir: str = "."
    seed: int | None = None
    out_dir: str | None = None


class BatchSummary(BaseModel):
    index: int
    injected: bool
    accuracy: float
    drift: float
    trust: float
    trust_smoothed: float


class RunResponse(BaseModel):
    out_dir: str
    report_path: str
    alerts: list[int]
    alert_threshold: float
    batches: list[BatchSummary]


class PlotsRequest(BaseModel):
    report_path: str
    out_dir: str | None = None


class PlotsResponse(BaseModel):
    written: list[str]


class ErrorResponse(BaseModel):
    kind: str
    message: str
    stage: str | None = None
