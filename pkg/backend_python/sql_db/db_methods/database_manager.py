from sqlalchemy import text
from sqlalchemy.orm import Session
from ..db_schema.base import SessionLocal, create_all_tables, engine
from .experiment_repository import ExperimentRepository
import logging

logger = logging.getLogger(__name__)


class DatabaseManager:
    """
    Single entry point for the results store; use as a context manager
    so the session is closed (and rolled back on error)
    """

    def __init__(self):
        self.session: Session = None
        self._experiment_repo = None

    def __enter__(self):
        self.session = SessionLocal()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.session:
            if exc_type:
                self.session.rollback()
            self.session.close()
        self._experiment_repo = None

    @property
    def experiment_repo(self) -> ExperimentRepository:
        if not self._experiment_repo:
            self._experiment_repo = ExperimentRepository(self.session)
        return self._experiment_repo

    def initialize_database(self) -> bool:
        try:
            logger.info("🔧 Creating database tables...")
            create_all_tables()
            logger.info("✅ Database tables ready")
            return True
        except Exception as e:
            logger.error(f"❌ Failed to initialize database: {e}")
            return False

    def health_check(self) -> bool:
        try:
            with engine.connect() as conn:
                conn.execute(text("SELECT 1"))
            return True
        except Exception as e:
            logger.error(f"❌ Database health check failed: {e}")
            return False

