import logging
import sys

from config.settings import LOG_LEVEL


def setup_logger(level: str = LOG_LEVEL):
    """Configure logging for the application"""
    logger = logging.getLogger()
    logger.setLevel(level.upper())

    # Reports go to stdout, so diagnostics use stderr
    for handler in logger.handlers:
        if getattr(handler, '_smallnoise', False):
            handler.setLevel(level.upper())
            return logger

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level.upper())
    console_handler._smallnoise = True

    # Format
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    console_handler.setFormatter(formatter)

    logger.addHandler(console_handler)

    return logger
