import json
import logging
from typing import List, Optional

import pandas as pd
from sqlalchemy.sql import func

from ..db_schema.models import BerPointRecord, ExperimentRun
from .base_repository import BaseRepository

logger = logging.getLogger(__name__)


class ExperimentRepository(BaseRepository):
    """
    Runs and their BER points
    """

    def create_run(self, run_id: str, kind: str, config: dict) -> ExperimentRun:
        with self.transaction():
            run = ExperimentRun(
                id=run_id,
                kind=kind,
                channel=str(config.get('channel', '')),
                variant=config.get('variant'),
                status='pending',
                config_json=json.dumps(config, sort_keys=True),
            )
            self.session.add(run)
        return run

    def get_run(self, run_id: str) -> Optional[ExperimentRun]:
        return self.session.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()

    def list_runs(self, kind: Optional[str] = None, limit: int = 50) -> List[ExperimentRun]:
        query = self.session.query(ExperimentRun)
        if kind:
            query = query.filter(ExperimentRun.kind == kind)
        return query.order_by(ExperimentRun.created_at.desc()).limit(limit).all()

    def mark_running(self, run_id: str):
        with self.transaction():
            self.session.query(ExperimentRun).filter(ExperimentRun.id == run_id).update(
                {ExperimentRun.status: 'running'}
            )

    def complete_run(self, run_id: str, csv_text: str, row_count: int):
        with self.transaction():
            self.session.query(ExperimentRun).filter(ExperimentRun.id == run_id).update({
                ExperimentRun.status: 'completed',
                ExperimentRun.csv_text: csv_text,
                ExperimentRun.row_count: row_count,
                ExperimentRun.finished_at: func.now(),
            })

    def fail_run(self, run_id: str, error: str):
        logger.error(f"❌ Run {run_id} failed: {error}")
        with self.transaction():
            self.session.query(ExperimentRun).filter(ExperimentRun.id == run_id).update({
                ExperimentRun.status: 'failed',
                ExperimentRun.error: error,
                ExperimentRun.finished_at: func.now(),
            })

    def add_ber_points(self, run_id: str, df: pd.DataFrame):
        """Store the rows of a BER table (columns of BER_COLUMNS)"""
        rows = [
            {
                'run_id': run_id,
                'snr_db': float(r.snr_db),
                'iteration': int(r.iteration),
                'bit_errors': int(r.bit_errors),
                'bits_counted': int(r.bits_counted),
                'ber': float(r.ber),
                'blocks': int(r.blocks),
            }
            for r in df.itertuples(index=False)
        ]
        self.bulk_insert(BerPointRecord, rows)

    def get_ber_points(self, run_id: str) -> List[BerPointRecord]:
        return (
            self.session.query(BerPointRecord)
            .filter(BerPointRecord.run_id == run_id)
            .order_by(BerPointRecord.snr_db, BerPointRecord.iteration)
            .all()
        )

    def delete_run(self, run_id: str) -> bool:
        with self.transaction():
            deleted = self.session.query(ExperimentRun).filter(ExperimentRun.id == run_id).delete()
        return bool(deleted)
