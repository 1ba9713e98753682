"""
Logging setup. LPO_LOG={error|info|debug} picks the verbosity; everything goes
to stderr so stdout stays machine-readable.
"""

import logging
import os
import sys

from dotenv import load_dotenv

LOG_ENV_VAR = "LPO_LOG"
LOG_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging() -> int:
    """Configure the root logger from the environment; returns the level used."""
    load_dotenv()
    raw = os.environ.get(LOG_ENV_VAR, "info").strip().lower()
    level = LOG_LEVELS.get(raw, logging.INFO)

    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    if raw not in LOG_LEVELS:
        logging.getLogger(__name__).warning(f"Unknown {LOG_ENV_VAR}={raw!r}, using info")
    return level
