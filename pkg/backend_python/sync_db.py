#!/usr/bin/env python3
"""
Create the results store tables and report what the database holds.

    python sync_db.py
"""

import logging
import sys
from pathlib import Path

from dotenv import load_dotenv

backend_path = Path(__file__).parent
sys.path.insert(0, str(backend_path))

env_path = backend_path / '.env'
load_dotenv(dotenv_path=env_path)

from sqlalchemy import inspect

from sql_db.db_methods.database_manager import DatabaseManager
from sql_db.db_schema.base import Base, engine

logger = logging.getLogger(__name__)


def sync_database_schema() -> bool:
    """Create missing tables, then check every model table is present"""
    try:
        logger.info("🔄 Starting results database synchronization...")
        with DatabaseManager() as db:
            if not db.health_check():
                return False
            if not db.initialize_database():
                return False

        tables = set(inspect(engine).get_table_names())
        expected = set(Base.metadata.tables)
        logger.info(f"📊 Found {len(tables)} tables in database")
        for table in sorted(tables):
            status = "✅" if table in expected else "ℹ️"
            logger.info(f"  {status} {table}")

        missing = expected - tables
        if missing:
            logger.warning(f"⚠️ Missing expected tables: {sorted(missing)}")
            return False
        logger.info("✅ All expected tables found")
        return True
    except Exception as e:
        logger.error(f"❌ Database schema sync failed: {e}")
        return False


def report_runs(limit: int = 10) -> None:
    with DatabaseManager() as db:
        runs = db.experiment_repo.list_runs(limit=limit)
        logger.info(f"📋 {len(runs)} most recent runs")
        for run in runs:
            logger.info(f"  {run.id}: {run.kind} {run.channel} {run.variant or '-'} {run.status} ({run.row_count} rows)")


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    ok = sync_database_schema()
    if ok:
        report_runs()
    sys.exit(0 if ok else 1)
