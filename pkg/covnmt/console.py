"""
Console logging and memory housekeeping.
"""
import gc
import os
import queue
from datetime import datetime
from typing import List

import psutil

MAX_MEMORY_MB = int(os.environ.get('COVNMT_MAX_MEMORY_MB', '2048'))

# Recent log lines for callers that want to inspect them (tests, long runs)
console_queue = queue.Queue(maxsize=1000)


def log_console(message: str, level: str = "INFO"):
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    log_entry = f"[{timestamp}] [{level}] {message}"
    print(log_entry)
    try:
        console_queue.put_nowait(log_entry)
    except queue.Full:
        pass


def drain_console() -> List[str]:
    """Remove and return every queued log line"""
    lines = []
    while True:
        try:
            lines.append(console_queue.get_nowait())
        except queue.Empty:
            return lines


def memory_mb() -> float:
    """Resident memory of this process in MB"""
    return psutil.Process(os.getpid()).memory_info().rss / (1024 * 1024)


def clean_memory(limit_mb: int = MAX_MEMORY_MB) -> bool:
    """Check memory usage and trigger garbage collection if it exceeds limit_mb"""
    try:
        current_mb = memory_mb()

        if current_mb > limit_mb:
            log_console(f"Memory usage ({current_mb:.2f}MB) exceeds limit ({limit_mb}MB), triggering garbage collection", "WARNING")
            gc.collect()

            after_mb = memory_mb()
            log_console(f"Garbage collection completed. Freed {current_mb - after_mb:.2f}MB. Current: {after_mb:.2f}MB", "INFO")
            return True
        return False
    except Exception as e:
        log_console(f"Error in clean_memory: {str(e)}", "ERROR")
        return False
