from __future__ import annotations

import logging

from rich.logging import RichHandler

_CONFIGURED = False


def configure_logging(level: str | int = "INFO") -> None:
    """Install one RichHandler on the `fcdl` logger tree. Later calls only change the level."""
    global _CONFIGURED
    root = logging.getLogger("fcdl")
    root.setLevel(level if isinstance(level, int) else level.upper())
    if not _CONFIGURED:
        handler = RichHandler(show_path=False, rich_tracebacks=True, markup=False)
        handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
        root.addHandler(handler)
        root.propagate = False
        _CONFIGURED = True


def get_logger(name: str) -> logging.Logger:
    """Child of the `fcdl` logger, e.g. get_logger(__name__) -> fcdl.core.training.trainer."""
    return logging.getLogger(f"fcdl.{name}")
