"""Console logging setup"""
import logging
import sys

_FORMAT = "[%(levelname)s] %(message)s"


def setup_logging(level: str = "INFO") -> None:
    """
    Route package logs to stderr with a bracketed level prefix.

    Calling it again only changes the level.

    Args:
        level: Logging level name (DEBUG, INFO, WARNING, ...)
    """
    root = logging.getLogger()
    numeric_level = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric_level, int):
        raise ValueError(f"Unknown log level: {level}")

    if not any(getattr(h, "_gf_handler", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_FORMAT))
        handler._gf_handler = True
        root.addHandler(handler)
    root.setLevel(numeric_level)
