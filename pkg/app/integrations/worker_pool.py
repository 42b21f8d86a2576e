import concurrent.futures
import logging
import multiprocessing
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_CHUNKS_PER_WORKER = 8


def _run_chunk(fn: Callable[[T], R], start: int, chunk: Sequence[T]):
    return start, [fn(task) for task in chunk]


def map_replicates(fn: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    """
    Apply a picklable module-level function to every task.

    Results come back in task order whatever the completion order, so the
    worker count never changes the output.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]

    workers = min(workers, len(tasks))
    size = max(1, -(-len(tasks) // (workers * _CHUNKS_PER_WORKER)))
    logger.info(f"Dispatching {len(tasks)} replicates to {workers} workers in chunks of {size}")
    results = {}
    mp_context = multiprocessing.get_context("spawn")
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers, mp_context=mp_context) as executor:
        futures = [
            executor.submit(_run_chunk, fn, start, tasks[start:start + size])
            for start in range(0, len(tasks), size)
        ]
        for future in concurrent.futures.as_completed(futures):
            try:
                start, values = future.result()
            except Exception as e:
                logger.error(f"Error in replicate worker: {str(e)}")
                for pending in futures:
                    pending.cancel()
                raise
            results[start] = values
    return [value for start in sorted(results) for value in results[start]]
