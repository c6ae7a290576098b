"""
Logging Setup Module untuk SCALE-I
==================================
"""

import logging

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(verbose: int = 0) -> None:
    """
    Konfigurasi root logger untuk pemakaian command line.

    Args:
        verbose: 0 hanya warning, 1 untuk info, 2 atau lebih untuk debug
    """
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    # numba (pulled in by dcor) is noisy at debug level
    logging.getLogger("numba").setLevel(logging.WARNING)
