from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, Dict, List, Optional, Sequence, TypeVar

_logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_shards(
    task_fn: Callable[[T], R],
    tasks: Sequence[T],
    parallelism: int = 1,
    on_result: Optional[Callable[[int, R], None]] = None,
) -> List[R]:
    """
    Run independent shard tasks and return their results in task order.

    ``task_fn`` must be a module-level function so it pickles. ``on_result``
    sees each result as it completes (in completion order) together with its
    task index; the returned list never depends on completion order.
    """
    if not tasks:
        return []

    results: Dict[int, R] = {}
    if parallelism <= 1 or len(tasks) == 1:
        for index, task in enumerate(tasks):
            results[index] = task_fn(task)
            _logger.info("Shard finished", extra={"event": "shard_done", "index": index})
            if on_result is not None:
                on_result(index, results[index])
        return [results[i] for i in range(len(tasks))]

    workers = min(parallelism, len(tasks))
    _logger.info(
        "Dispatching shards",
        extra={"event": "shards_dispatched", "shards": len(tasks), "workers": workers},
    )
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(task_fn, task): index for index, task in enumerate(tasks)}
        for future in as_completed(futures):
            index = futures[future]
            try:
                results[index] = future.result()
            except Exception:
                _logger.error("Shard %s failed", index, extra={"event": "shard_failed"})
                for pending in futures:
                    pending.cancel()
                raise
            _logger.info("Shard finished", extra={"event": "shard_done", "index": index})
            if on_result is not None:
                on_result(index, results[index])
    return [results[i] for i in range(len(tasks))]
