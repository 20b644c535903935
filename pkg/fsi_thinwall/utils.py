"""Utility functions: logging setup, rate fits, content hashes and level parallelism."""

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy.stats import linregress

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def setup_logging(log_level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Setup logging configuration.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR)
        log_file: Optional path to log file
    """
    level = getattr(logging, str(log_level).upper(), None)
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level: {log_level}")

    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )

    logger.info(f"Logging configured at {str(log_level).upper()} level")


def ensure_output_dir(path: str) -> Path:
    """Create the output directory if needed.

    Raises:
        NotADirectoryError: If the path exists and is not a directory
    """
    out = Path(path)
    if out.exists() and not out.is_dir():
        logger.error(f"Output path is not a directory: {path}")
        raise NotADirectoryError(f"Output path is not a directory: {path}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def pairwise_orders(hs: Sequence[float], errors: Sequence[float]) -> List[float]:
    """Observed orders log(e_i / e_{i+1}) / log(h_i / h_{i+1}) of consecutive levels.

    Pairs with a non-positive error yield NaN.
    """
    orders = []
    for (h0, e0), (h1, e1) in zip(zip(hs, errors), zip(hs[1:], errors[1:])):
        if e0 > 0 and e1 > 0 and h0 != h1:
            orders.append(math.log(e0 / e1) / math.log(h0 / h1))
        else:
            orders.append(float("nan"))
    return orders


def fit_rate(hs: Sequence[float], errors: Sequence[float]) -> Tuple[float, float]:
    """Least-squares slope of log(error) against log(h).

    Returns:
        (slope, standard error of the slope); the standard error is NaN for two points

    Raises:
        ValueError: With fewer than two levels or non-positive values
    """
    h = np.asarray(hs, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.size < 2 or h.size != e.size:
        raise ValueError(f"Rate fits need at least two (h, error) pairs, got {h.size} and {e.size}")
    if np.any(h <= 0) or np.any(e <= 0):
        raise ValueError("Rate fits need positive mesh sizes and errors")
    if h.size == 2:
        return pairwise_orders(list(h), list(e))[0], float("nan")
    fit = linregress(np.log(h), np.log(e))
    return float(fit.slope), float(fit.stderr)


def blob_hash(data: bytes) -> str:
    """Git-style blob SHA-1 of file content."""
    return hashlib.sha1(b"blob " + str(len(data)).encode() + b"\0" + data).hexdigest()


def run_levels(func: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """Map ``func`` over independent levels, in input order.

    With ``jobs > 1`` the levels run in a process pool; ``func`` and the items must be
    picklable.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.info(f"Running {len(items)} levels on {min(jobs, len(items))} processes")
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(func, items))
