import logging

from app.cli.router import main
from app.core.config import settings

# Setup logging
logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


def run() -> int:
    """Console entry point."""
    logger.debug(f"Starting {settings.PROJECT_NAME}")
    return main()


# Run the toolkit when executed directly: python -m app.main limits --replicates 200
if __name__ == "__main__":
    raise SystemExit(run())
