import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

from poserefine.config.settings import settings


def setup_logger(name: str = __name__) -> logging.Logger:
    """Attach console and rotating file handlers once per logger name."""
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, settings.log_level.upper()))
    if logger.handlers:
        return logger

    formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    file_handler = RotatingFileHandler(
        Path(settings.log_file), maxBytes=10485760, backupCount=5  # 10MB
    )
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)

    return logger


logger = setup_logger("poserefine")
# pose_pipeline modules log through logging.getLogger(__name__)
pipeline_logger = setup_logger("pose_pipeline")
