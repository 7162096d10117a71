# Results store repositories

from .base_repository import BaseRepository
from .experiment_repository import ExperimentRepository
from .database_manager import DatabaseManager

__all__ = [
    'BaseRepository',
    'ExperimentRepository',
    'DatabaseManager',
]
