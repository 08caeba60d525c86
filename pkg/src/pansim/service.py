"""HTTP facade over the simulator for multi-client use.

Endpoints wrap the same core calls the CLI makes: config validation,
full scenario runs (optionally returning the artifact files inline), and
CSV time-series ingestion. Runs are deterministic server-side, so two
identical requests return identical artifacts.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .config import ConfigError, parse_config
from .harness import InvariantViolation, run_scenario, write_outputs
from .timeseries import TimeSeriesError, load_timeseries_csv, parse_column_map


class HealthResponse(BaseModel):
    status: str
    version: str


class ValidateRequest(BaseModel):
    config: dict


class ValidateResponse(BaseModel):
    valid: bool
    error: str | None = None


class RunRequest(BaseModel):
    config: dict
    seed: int | None = None
    include_artifacts: bool = False
    epochs_only: bool = False


class RunArtifacts(BaseModel):
    report_csv: str
    decisions_jsonl: str
    fabric_jsonl: str
    trace_jsonl: str


class RunResponse(BaseModel):
    summary: dict
    welfare: float
    rows: int
    decisions: int
    artifacts: RunArtifacts | None = None


class IngestRequest(BaseModel):
    csv_text: str
    column_map: dict[str, str] | str = Field(
        description="mapping like {'date': 'Date', 'infected': 'Cases'} "
                    "or the string form 'date=Date,infected=Cases'")


class IngestResponse(BaseModel):
    rows: int
    dates: list[str]
    columns: dict[str, list[float | None]]
    gaps: list[bool]


def create_app() -> FastAPI:
    app = FastAPI(title="pansim", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest) -> ValidateResponse:
        try:
            parse_config(req.config)
        except ConfigError as exc:
            return ValidateResponse(valid=False, error=str(exc))
        return ValidateResponse(valid=True)

    @app.post("/runs", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        try:
            config = parse_config(req.config)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            report = run_scenario(config, seed_override=req.seed)
        except InvariantViolation as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        artifacts = None
        if req.include_artifacts:
            with tempfile.TemporaryDirectory() as tmp:
                paths = write_outputs(report, tmp, epochs_only=req.epochs_only,
                                      decision_epoch=config.run.decision_epoch)
                artifacts = RunArtifacts(
                    report_csv=Path(paths["report"]).read_text(),
                    decisions_jsonl=Path(paths["decisions"]).read_text(),
                    fabric_jsonl=Path(paths["fabric"]).read_text(),
                    trace_jsonl=Path(paths["trace"]).read_text(),
                )
        return RunResponse(
            summary=report.summary,
            welfare=report.welfare,
            rows=len(report.rows),
            decisions=len(report.decisions),
            artifacts=artifacts,
        )

    @app.post("/ingest", response_model=IngestResponse)
    def ingest(req: IngestRequest) -> IngestResponse:
        try:
            mapping = (parse_column_map(req.column_map)
                       if isinstance(req.column_map, str) else req.column_map)
            with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
                fh.write(req.csv_text)
                tmp_path = fh.name
            try:
                series = load_timeseries_csv(tmp_path, mapping)
            finally:
                Path(tmp_path).unlink(missing_ok=True)
        except TimeSeriesError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return IngestResponse(
            rows=len(series),
            dates=[d.isoformat() for d in series.dates],
            columns=series.columns,
            gaps=series.gaps,
        )

    return app


app = create_app()
