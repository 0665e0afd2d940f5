"""
Order-preserving worker pool for independent sweep points
"""
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence

import config
from core.logger_config import get_logger

logger = get_logger(__name__)


@dataclass
class TaskOutcome:
    """Result (or failure) of one item, tagged with its input index"""
    index: int
    value: Any = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def ordered_map(func: Callable[[Any], Any], items: Sequence[Any],
                max_workers: Optional[int] = None, label: str = "item") -> List[TaskOutcome]:
    """
    Apply ``func`` to every item, in parallel when max_workers > 1.

    Failures are captured per item instead of aborting the batch. Outcomes are
    sorted by input index, so output order never depends on worker count or
    completion order.

    Args:
        func: Pure function of one item
        items: Inputs
        max_workers: Thread count (defaults to config.MAX_PARALLEL_THREADS)
        label: Name used in progress logging

    Returns:
        list[TaskOutcome] in input order
    """
    items = list(items)
    total = len(items)
    workers = max(1, min(total, max_workers or config.MAX_PARALLEL_THREADS)) if total else 1

    def run_one(index):
        try:
            return TaskOutcome(index=index, value=func(items[index]))
        except Exception as e:
            logger.warning(f"{label} {index + 1}/{total} failed: {type(e).__name__}: {e}")
            return TaskOutcome(index=index, error=e)

    if workers == 1:
        return [run_one(i) for i in range(total)]

    logger.info(f"Processing {total} {label}s on {workers} threads")
    outcomes = []
    completed = 0

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(run_one, i): i for i in range(total)}
        for future in as_completed(futures):
            outcomes.append(future.result())
            completed += 1
            logger.debug(f"Completed {label} {futures[future] + 1} ({completed}/{total})")

    # Sort by index to keep input order
    outcomes.sort(key=lambda outcome: outcome.index)
    return outcomes
