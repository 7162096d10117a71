from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker
from sqlalchemy.pool import StaticPool
import logging
import os
from pathlib import Path
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Environment wins over the .env file so tests can point at a scratch database
env_path = Path(__file__).parent.parent.parent / '.env'
load_dotenv(dotenv_path=env_path, override=False)

Base = declarative_base()

DATABASE_URL = os.getenv('DATABASE_URL', 'sqlite:///turbo_results.db')


def _engine_options(url: str) -> dict:
    if url.startswith('sqlite'):
        options = {'connect_args': {'check_same_thread': False}}
        if ':memory:' in url or url in ('sqlite://', 'sqlite:///'):
            # one shared connection, otherwise every session sees an empty database
            options['poolclass'] = StaticPool
        return options
    return {
        'pool_size': 10,
        'max_overflow': 20,
        'pool_pre_ping': True,
        'pool_recycle': 3600,
    }


logger.info(f"🔗 Results database: {DATABASE_URL.split('@')[-1][:50]}")
engine = create_engine(DATABASE_URL, echo=False, **_engine_options(DATABASE_URL))

SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)


def create_all_tables():
    """Create all tables"""
    # models must be imported so their tables are registered on Base
    from . import models  # noqa: F401
    Base.metadata.create_all(bind=engine)
