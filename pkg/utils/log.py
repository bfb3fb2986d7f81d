import logging

import coloredlogs

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def setup_logging(level: str = "INFO") -> None:
    """Install coloured console logging for the whole process."""
    coloredlogs.install(level=level.upper(), fmt=LOG_FORMAT)
    logging.getLogger("joblib").setLevel(logging.WARNING)
