from concurrent.futures import ThreadPoolExecutor
import logging
import time
from typing import Any, Callable, List, Optional, Tuple

import numpy as np
from prometheus_client import Counter, Histogram

# Import config
from mtfcost.config import SIMULATION
from mtfcost.core.errors import InvalidArgumentError

# Configure logging
logger = logging.getLogger(__name__)

# Metrics
task_counter = Counter('mtf_tasks_total', 'Total sampling tasks', ['task_name', 'status'])
task_duration = Histogram('mtf_task_duration_seconds', 'Sampling task duration', ['task_name'])

ChunkFn = Callable[[np.random.Generator, int], np.ndarray]


def chunk_plan(count: int, chunk_size: Optional[int] = None) -> List[Tuple[int, int, int]]:
    """Split `count` samples into (chunk_index, start, size) triples of a fixed chunk size"""
    if chunk_size is None:
        chunk_size = SIMULATION["chunk_size"]
    if count < 1:
        raise InvalidArgumentError(f"count must be positive, got {count}")
    if chunk_size < 1:
        raise InvalidArgumentError(f"chunk_size must be positive, got {chunk_size}")
    return [(index, start, min(chunk_size, count - start)) for index, start in enumerate(range(0, count, chunk_size))]


def chunk_generator(seed: int, chunk_index: int) -> np.random.Generator:
    """Stream for one chunk, keyed by (seed, chunk_index)"""
    return np.random.default_rng([int(seed), int(chunk_index)])


class SamplingTask:
    """Runs one chunked sampling job and records its outcome"""

    def __init__(self, name: str, fn: ChunkFn):
        self.name = name
        self.fn = fn

    def on_failure(self, exc: BaseException, chunk_index: int):
        logger.error(f"Task {self.name} [chunk {chunk_index}] failed: {exc}", exc_info=True)
        task_counter.labels(task_name=self.name, status='failed').inc()

    def on_success(self, retval: Any, count: int):
        logger.debug(f"Task {self.name} produced {count} samples")
        task_counter.labels(task_name=self.name, status='success').inc()

    def _run_chunk(self, seed: int, chunk_index: int, size: int) -> np.ndarray:
        try:
            out = np.asarray(self.fn(chunk_generator(seed, chunk_index), size))
        except Exception as exc:
            self.on_failure(exc, chunk_index)
            raise
        if out.shape[0] != size:
            exc = ValueError(f"chunk {chunk_index} returned {out.shape[0]} rows, expected {size}")
            self.on_failure(exc, chunk_index)
            raise exc
        return out

    def run(
        self,
        count: int,
        seed: int,
        chunk_size: Optional[int] = None,
        workers: Optional[int] = None,
    ) -> np.ndarray:
        """Execute every chunk and concatenate the results in chunk order"""
        start_time = time.time()
        plan = chunk_plan(count, chunk_size)
        if workers is None:
            workers = SIMULATION["workers"]
        if workers < 1:
            raise InvalidArgumentError(f"workers must be positive, got {workers}")

        if workers > 1 and len(plan) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(self._run_chunk, seed, index, size) for index, _, size in plan]
                parts = [future.result() for future in futures]
        else:
            parts = [self._run_chunk(seed, index, size) for index, _, size in plan]

        result = np.concatenate(parts, axis=0)
        self.on_success(result, count)

        # Record metrics
        task_duration.labels(task_name=self.name).observe(time.time() - start_time)

        return result


def run_chunks(
    task_name: str,
    fn: ChunkFn,
    count: int,
    seed: int,
    chunk_size: Optional[int] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Run fn(rng, size) over a fixed chunk plan; the output does not depend on `workers`"""
    return SamplingTask(task_name, fn).run(count, seed, chunk_size, workers)
