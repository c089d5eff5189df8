"""
Logging setup for the command-line tools
"""

import logging
from typing import Optional

from colorama import Fore, Style, init as colorama_init

LEVEL_COLOURS = {
    logging.DEBUG: Fore.CYAN,
    logging.INFO: Fore.GREEN,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED + Style.BRIGHT,
}

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class ColourFormatter(logging.Formatter):
    """Formatter that colours the level name"""

    def format(self, record: logging.LogRecord) -> str:
        colour = LEVEL_COLOURS.get(record.levelno, '')
        original = record.levelname
        record.levelname = f"{colour}{original}{Style.RESET_ALL}"
        try:
            return super().format(record)
        finally:
            record.levelname = original


def setup_logging(level: str = 'INFO', log_file: Optional[str] = None) -> None:
    """Configure the root logger: coloured console, optional plain file"""
    colorama_init()
    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(level.upper())

    console = logging.StreamHandler()
    console.setFormatter(ColourFormatter(LOG_FORMAT))
    root.addHandler(console)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(file_handler)
