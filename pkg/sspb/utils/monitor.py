"""
Resource monitoring utilities for the sspb toolkit.
Times phases and keeps resident memory in check between them.
"""

import functools
import gc
import logging
import time
from typing import Callable, Dict

import psutil

logger = logging.getLogger(__name__)

MEMORY_THRESHOLD = 85.0


class Monitor:
    """
    Phase monitor.

    Features:
    - Wall-time measurement
    - Memory pressure relief
    - Per-stage duration bookkeeping
    """

    def __init__(self, memory_threshold: float = MEMORY_THRESHOLD):
        self.logger = logging.getLogger(__name__)
        self.memory_threshold = memory_threshold
        self.stage_durations: Dict[str, float] = {}

    @staticmethod
    def memory_guard(func: Callable) -> Callable:
        """Collect garbage before the call when system memory runs high."""
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            if psutil.virtual_memory().percent > MEMORY_THRESHOLD:
                gc.collect()
            return func(*args, **kwargs)
        return wrapper

    @staticmethod
    def timed(func: Callable) -> Callable:
        """Log the wall time of each call at DEBUG level."""
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            result = func(*args, **kwargs)
            logger.debug(f"{func.__name__} took {time.perf_counter() - start_time:.2f}s")
            return result
        return wrapper

    def record(self, stage: str, duration: float):
        """Store a stage duration and log it with the current RSS."""
        self.stage_durations[stage] = duration
        rss_mb = psutil.Process().memory_info().rss / 2**20
        self.logger.info(
            f"Stage {stage} finished in {duration:.1f}s",
            extra={'context': {'stage': stage, 'rss_mb': round(rss_mb, 1)}}
        )
        if psutil.virtual_memory().percent > self.memory_threshold:
            self.logger.warning(f"Memory above {self.memory_threshold}% after stage {stage}")
            gc.collect()
