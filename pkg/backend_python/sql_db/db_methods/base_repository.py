from contextlib import contextmanager
from typing import Any, Dict, List
import logging

from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session

logger = logging.getLogger(__name__)


class BaseRepository:
    """
    Shared session handling for the results store repositories
    """

    def __init__(self, session: Session):
        self.session = session

    @contextmanager
    def transaction(self):
        """Commit on success, roll back and re-raise on any failure"""
        try:
            yield self.session
            self.session.commit()
        except SQLAlchemyError as e:
            self.session.rollback()
            logger.error(f"❌ Results store transaction failed: {e}")
            raise
        except Exception as e:
            self.session.rollback()
            logger.error(f"❌ Unexpected error in results store transaction: {e}")
            raise

    def bulk_insert(self, model_class, rows: List[Dict[str, Any]]):
        """Insert many rows of one model in a single transaction"""
        if not rows:
            return
        with self.transaction():
            self.session.bulk_insert_mappings(model_class, rows)
        logger.debug(f"💾 Inserted {len(rows)} {model_class.__tablename__} rows")
