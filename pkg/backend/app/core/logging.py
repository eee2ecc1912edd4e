"""Root logger setup for command-line runs.

Library modules only create `logging.getLogger(__name__)` loggers; the
entry point calls `configure_logging()` once.
"""
import logging

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str | int = "INFO") -> None:
    """Configure the root logger; `level` may be a name in any case or a number."""
    if isinstance(level, str):
        level = level.upper()
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")
