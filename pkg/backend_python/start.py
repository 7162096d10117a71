#!/usr/bin/env python3
"""
Startup script for the simulator API
"""

import logging
import os
import sys
from pathlib import Path
from dotenv import load_dotenv

env_path = Path(__file__).parent / '.env'
load_dotenv(dotenv_path=env_path)

logging.basicConfig(level=os.getenv("LOG_LEVEL", "INFO").upper())
logger = logging.getLogger("start")


def start_server():
    """Replace this process with uvicorn serving main:app"""
    port = os.getenv("PORT", "8000")
    workers = os.getenv("TURBO_WORKERS", "1")
    logger.info(f"🔧 .env file exists: {env_path.exists()}; TURBO_WORKERS={workers}")
    logger.info(f"🚀 Starting simulator API on port {port}...")
    try:
        os.execv(sys.executable, [sys.executable, "-m", "uvicorn", "main:app", "--host", "0.0.0.0", "--port", port])
    except Exception as e:
        logger.error(f"❌ Failed to start server: {e}")
        sys.exit(1)


if __name__ == "__main__":
    os.chdir(os.path.dirname(os.path.abspath(__file__)))
    start_server()
