# Results store schema

from .base import Base, SessionLocal, create_all_tables, engine
from .models import BerPointRecord, ExperimentRun

__all__ = [
    'Base',
    'SessionLocal',
    'create_all_tables',
    'engine',
    'BerPointRecord',
    'ExperimentRun',
]
