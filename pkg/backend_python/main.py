import asyncio
import io
import logging
import os
from contextlib import asynccontextmanager
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException, Query, Request
from pydantic import BaseModel, Field, ValidationError

env_path = Path(__file__).parent / '.env'
load_dotenv(dotenv_path=env_path)

from component.analysis_service import snr_table
from services.csv_service import CSVService
from services.experiment_config import build_config, parse_snr_grid
from services.experiment_runner import new_run_id, run_experiment
from component.signal_service import IsiChannel
from sql_db.db_methods.database_manager import DatabaseManager
from sql_db.db_schema.base import create_all_tables

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info("🚀 Turbo equalization API starting up...")
    try:
        create_all_tables()
        logger.info("✅ Database tables ready")
    except Exception as e:
        logger.error(f"❌ Error creating database tables: {e}")
    yield
    logger.info("🛑 Turbo equalization API shutting down...")


app = FastAPI(title="Turbo Equalization Simulator API", lifespan=lifespan)

PORT = int(os.getenv("PORT", 8000))

csv_service = CSVService()

# Running job tasks, keyed by run id; the run rows in the database hold the status
experiment_tasks: Dict[str, asyncio.Task] = {}
job_lock = asyncio.Lock()


class ExperimentRequest(BaseModel):
    kind: Literal["ber", "exit", "rho"] = "ber"
    config: Dict[str, Any] = Field(default_factory=dict)
    # run inline and answer when finished instead of queueing
    wait: bool = False


class ExperimentJobResponse(BaseModel):
    job_id: str
    status: str


class ExperimentStatus(BaseModel):
    job_id: str
    kind: str
    channel: str
    variant: Optional[str] = None
    status: str
    error: Optional[str] = None
    row_count: int = 0
    created_at: Optional[str] = None
    finished_at: Optional[str] = None


@app.middleware("http")
async def log_requests(request: Request, call_next):
    if request.url.path != "/health":
        logger.info(f"🌐 {request.method} {request.url.path}")
    return await call_next(request)


@app.get("/health")
async def health_check():
    with DatabaseManager() as db:
        database_ok = db.health_check()
    return {
        "status": "healthy",
        "database": "ok" if database_ok else "unavailable",
        "timestamp": datetime.now().isoformat(),
    }


@app.get("/snr")
async def get_snr_table(channel: str = "h1", snr: str = Query("0:14"), grid: int = 4096):
    """Infinite-length DFE / BiDFE / MFB figures over an SNR grid"""
    try:
        ch = IsiChannel.from_spec(channel)
        df = snr_table(ch, parse_snr_grid(snr), grid=grid)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"❌ SNR table failed: {e}")
        raise HTTPException(status_code=500, detail=f"SNR table failed: {e}")
    return await csv_service.get_paginated_data(df, page=1, limit=max(1, len(df)))


async def process_experiment_job(job_id: str, kind: str, cfg):
    with DatabaseManager() as db:
        db.experiment_repo.mark_running(job_id)
    try:
        df, text = await asyncio.to_thread(run_experiment, kind, cfg)
    except Exception as e:
        with DatabaseManager() as db:
            db.experiment_repo.fail_run(job_id, f"{type(e).__name__}: {e}")
        return
    with DatabaseManager() as db:
        repo = db.experiment_repo
        repo.complete_run(job_id, text, len(df))
        if kind == "ber" and len(df):
            repo.add_ber_points(job_id, df)
    logger.info(f"✅ [Job {job_id}] completed with {len(df)} rows")


@app.post("/experiments")
async def create_experiment(request: ExperimentRequest) -> ExperimentJobResponse:
    try:
        cfg = build_config(overrides=request.config)
    except (ValueError, ValidationError) as e:
        raise HTTPException(status_code=400, detail=str(e))

    job_id = new_run_id(request.kind)
    try:
        with DatabaseManager() as db:
            db.experiment_repo.create_run(job_id, request.kind, cfg.model_dump(mode="json"))
    except Exception as e:
        logger.error(f"❌ Failed to register experiment: {e}")
        raise HTTPException(status_code=500, detail=f"Failed to register experiment: {e}")

    if request.wait:
        await process_experiment_job(job_id, request.kind, cfg)
    else:
        async with job_lock:
            task = asyncio.create_task(process_experiment_job(job_id, request.kind, cfg))
            experiment_tasks[job_id] = task
            task.add_done_callback(lambda _: experiment_tasks.pop(job_id, None))
        logger.info(f"🚀 [Job {job_id}] queued")

    with DatabaseManager() as db:
        run = db.experiment_repo.get_run(job_id)
        return ExperimentJobResponse(job_id=job_id, status=run.status)


@app.get("/experiments/{job_id}")
async def get_experiment(job_id: str) -> ExperimentStatus:
    with DatabaseManager() as db:
        run = db.experiment_repo.get_run(job_id)
        if run is None:
            raise HTTPException(status_code=404, detail="Job not found")
        return ExperimentStatus(
            job_id=run.id,
            kind=run.kind,
            channel=run.channel,
            variant=run.variant,
            status=run.status,
            error=run.error,
            row_count=run.row_count,
            created_at=run.created_at.isoformat() if run.created_at else None,
            finished_at=run.finished_at.isoformat() if run.finished_at else None,
        )


@app.get("/experiments/{job_id}/rows")
async def get_experiment_rows(job_id: str, page: int = Query(1, ge=1), limit: int = Query(20, ge=1, le=1000)):
    with DatabaseManager() as db:
        run = db.experiment_repo.get_run(job_id)
        if run is None:
            raise HTTPException(status_code=404, detail="Job not found")
        if run.status != "completed":
            raise HTTPException(status_code=409, detail=f"Job is {run.status}")
        text = run.csv_text
    try:
        return await csv_service.get_paginated_data(io.StringIO(text), page=page, limit=limit)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
