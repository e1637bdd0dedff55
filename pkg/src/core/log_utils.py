""" Logging helpers shared by every module. """

import logging

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def get_logger(name):
    """
    Gets or creates a logger with the standard project configuration.

    :param name: Logger name, usually ``__name__``.
    :type name: str
    :return: Configured logger.
    :rtype: :class:`logging.Logger`
    """
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
        logger.propagate = False
    return logger


def set_verbose(verbose=True):
    """Switches every project logger between DEBUG and INFO."""
    level = logging.DEBUG if verbose else logging.INFO
    for name in list(logging.root.manager.loggerDict):
        if name == "src" or name.startswith("src."):
            logging.getLogger(name).setLevel(level)
