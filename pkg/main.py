"""
Beltrami Field Laboratory - command-line entry point
Version 1.0.0
"""
import logging
import sys

from app.config import settings
from app.cli import run

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


if __name__ == "__main__":
    logger.debug(f"Starting {settings.APP_NAME} v{settings.VERSION}")
    sys.exit(run(sys.argv[1:]))
