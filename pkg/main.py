import logging
import sys

from cli.commands import EXIT_ERROR, run

logger = logging.getLogger(__name__)


def main():
    """Entry point for the smallnoise command line"""
    try:
        return run(sys.argv[1:])
    except KeyboardInterrupt:
        logger.info("Interrupted, shutting down...")
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"Application error: {e}")
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
