import logging
import math
import os
from pathlib import Path
from typing import Union

import numpy as np

from .exceptions import ErrorCodes




PathLike = Union[str, os.PathLike]




def get_logger(verbose=True, name="pyhwnas"):
    root_logger = logging.getLogger(name)
    
    if root_logger.hasHandlers():
        root_logger.handlers.clear()
    
    if verbose:
        console_handler = logging.StreamHandler()
        root_logger.setLevel(logging.INFO)
        root_logger.addHandler(console_handler)
    else:
        root_logger.addHandler(logging.NullHandler())
    
    root_logger.propagate = False
    return root_logger



def quiet_logger():
    return get_logger(verbose=False, name="pyhwnas.quiet")



def default_max_workers():
    return min(32, (os.cpu_count() or 1) + 4)



def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, *stream)``; equal keys give equal draws."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))



def unpack_error(e):
    return str(e.args[0] if e.args else e)


def all_finite(*values) -> bool:
    return all(math.isfinite(float(v)) for v in values)


def ensure_dir(path: PathLike) -> Path:
    path = Path(path).expanduser()
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as oe:
        raise ErrorCodes.raise_error(
            ErrorCodes.IO_ERROR,
            f"Output directory {str(path)!r} is not writable: {oe}"
        ) from oe
    return path


def terminate(status=0):
    import sys
    sys.exit(int(status))


def set_verbosity(verbose=True):
    level = logging.INFO if verbose else logging.WARNING
    for name, logger in list(logging.Logger.manager.loggerDict.items()):
        if name.startswith("pyhwnas") and isinstance(logger, logging.Logger):
            logger.setLevel(level)
