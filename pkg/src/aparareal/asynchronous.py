"""Threaded asynchronous parareal with flexible communication.

One worker thread owns each time slice ``n`` and keeps rewriting the
interface ``lambda_{n+1}`` from whatever ``lambda_n`` it finds, with no
barrier between workers. The left interface is read twice per update:
once before the expensive fine solve, and again before the coarse solve,
so data that arrived while ``F`` was running is absorbed at once.
"""

import logging
import math
import statistics
import threading
import time
from dataclasses import dataclass, field
from typing import NamedTuple

from .fd import StateVector, initial_state
from .sync import (PararealConfig, PararealResult, coarse_G, correct, fine_F,
                   initialize_coarse, local_residual, price_from_state)

__all__ = [
    "Snapshot",
    "InterfaceBuffer",
    "DetectionParams",
    "ConvergenceDetector",
    "AsyncRunStats",
    "worker_update",
    "detect_convergence",
    "async_solve",
]

log = logging.getLogger(__name__)


class Snapshot(NamedTuple):
    state: StateVector
    version: int
    residual: float


class InterfaceBuffer:
    """Latest value of every interface ``lambda_0 .. lambda_N``.

    Each slot holds an immutable ``Snapshot``. Writers build a fresh one and
    swap it in whole, so a reader always sees a published (state, version)
    pair. ``lambda_0`` is fixed.
    """

    def __init__(self, lambdas):
        lambdas = list(lambdas)
        if len(lambdas) < 2:
            raise ValueError("need at least lambda_0 and lambda_1")
        self._slots = [Snapshot(lambdas[0], 0, 0.0)]
        self._slots += [Snapshot(s, 0, math.inf) for s in lambdas[1:]]
        self._changed = threading.Condition()

    def __len__(self):
        return len(self._slots)

    def read(self, n: int) -> Snapshot:
        return self._slots[n]

    def publish(self, n: int, state: StateVector) -> Snapshot:
        if n == 0:
            raise ValueError("lambda_0 is immutable")
        with self._changed:
            prev = self._slots[n]
            snap = Snapshot(state, prev.version + 1,
                            local_residual(prev.state.values, state.values))
            self._slots[n] = snap
            self._changed.notify_all()
        return snap

    def wait_newer(self, n: int, version: int, timeout: float) -> Snapshot:
        """Block until slot ``n`` passes ``version`` or ``timeout`` expires."""
        with self._changed:
            self._changed.wait_for(lambda: self._slots[n].version > version, timeout)
            return self._slots[n]

    def snapshot(self) -> tuple:
        return tuple(self._slots)

    def states(self) -> list:
        return [s.state for s in self.snapshot()]


@dataclass(frozen=True)
class DetectionParams:
    """Knobs of the convergence detector.

    ``min_progress`` is the version advance each worker must show between
    two sweeps. Two publications guarantee that at least one update both
    started and finished inside the interval. ``idle_wait`` bounds how long
    a worker whose input has not changed waits before updating anyway.
    """

    tol: float = 1e-8
    interval: float = 1e-3
    min_progress: int = 2
    max_updates: int | None = None
    idle_wait: float = 2e-3


class ConvergenceDetector:
    """Double-sweep detector with a progress guard.

    Reports convergence only when two sweeps both see every local residual
    below ``tol`` and every worker has advanced its output version by
    ``min_progress`` in between. While the workers have not yet made that
    progress and the buffers stay quiet, the first sweep is kept as the
    baseline; any loud sweep replaces it.
    """

    def __init__(self, params: DetectionParams):
        self.params = params
        self.rounds = 0
        self.trace = []
        self._baseline = None

    def observe(self, buffers: InterfaceBuffer) -> bool:
        snap = buffers.snapshot()[1:]
        self.rounds += 1
        worst = max(s.residual for s in snap)
        self.trace.append(worst)
        versions = [s.version for s in snap]
        quiet = worst < self.params.tol
        base = self._baseline
        if not quiet or base is None:
            self._baseline = versions if quiet else None
            return False
        return all(v - b >= self.params.min_progress for v, b in zip(versions, base))


def detect_convergence(buffers: InterfaceBuffer, detector: ConvergenceDetector) -> bool:
    """One detector sweep over ``buffers``."""
    return detector.observe(buffers)


@dataclass
class AsyncRunStats:
    worker_iterations: list
    detection_rounds: int
    wall_time: float
    converged: bool = False
    residual_trace: list = field(default_factory=list, repr=False)

    @property
    def min(self) -> int:
        return min(self.worker_iterations)

    @property
    def max(self) -> int:
        return max(self.worker_iterations)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.worker_iterations)


def worker_update(n: int, buffers: InterfaceBuffer, cfg: PararealConfig,
                  after_fine=None) -> Snapshot:
    """One asynchronous update of ``lambda_{n+1}`` by the owner of slice ``n``.

    ``after_fine`` is called between the fine solve and the second read;
    tests use it to inject fresher data.
    """
    if not 0 <= n < cfg.n_slices:
        raise ValueError(f"slice index {n} outside 0..{cfg.n_slices - 1}")
    old = buffers.read(n)
    f_old = fine_F(old.state, cfg)
    if after_fine is not None:
        after_fine()
    new = buffers.read(n)
    g_old = coarse_G(old.state, cfg)
    g_new = g_old if new.version == old.version else coarse_G(new.state, cfg)
    return buffers.publish(n + 1, correct(g_new, f_old, g_old))


def _worker(n, buffers, cfg, stop, counts, budget, idle_wait):
    seen = -1
    while not stop.is_set():
        if buffers.read(n).version == seen:
            # nothing new upstream: yield the core, but never stop updating
            buffers.wait_newer(n, seen, idle_wait)
            if stop.is_set():
                break
        seen = buffers.read(n).version
        worker_update(n, buffers, cfg)
        counts[n] += 1
        if sum(counts) >= budget:
            stop.set()


def async_solve(cfg: PararealConfig, workers: int | None = None,
                detection: DetectionParams | None = None,
                u0: StateVector | None = None) -> tuple[PararealResult, AsyncRunStats]:
    """Run asynchronous parareal with one thread per slice until detection.

    Returns the final interfaces and per-worker iteration counts. If the
    update budget ``detection.max_updates`` runs out first, the result is
    flagged as not converged.
    """
    N = cfg.n_slices
    if workers is None:
        workers = N
    if workers != N:
        raise ValueError(f"one worker per slice required: workers={workers}, slices={N}")
    if detection is None:
        detection = DetectionParams(tol=cfg.tol)
    budget = detection.max_updates
    if budget is None:
        budget = 1000 * N
    if u0 is None:
        u0 = initial_state(cfg.grid, cfg.problem)

    buffers = InterfaceBuffer(initialize_coarse(u0, cfg))
    detector = ConvergenceDetector(detection)
    stop = threading.Event()
    counts = [0] * N
    threads = [threading.Thread(target=_worker, args=(n, buffers, cfg, stop, counts, budget,
                                                    detection.idle_wait),
                                name=f"parareal-slice-{n}", daemon=True)
               for n in range(N)]
    converged = False
    start = time.perf_counter()
    for t in threads:
        t.start()
    try:
        while not stop.is_set():
            time.sleep(detection.interval)
            if detect_convergence(buffers, detector):
                converged = True
                stop.set()
            else:
                log.log(5, "async sweep %d max residual %.3e",
                        detector.rounds, detector.trace[-1])
    finally:
        stop.set()
        for t in threads:
            t.join()
    wall = time.perf_counter() - start

    lambdas = buffers.states()
    stats = AsyncRunStats(list(counts), detector.rounds, wall, converged, detector.trace)
    log.info("async parareal: iterations min/mean/max %d/%.1f/%d, converged=%s",
             stats.min, stats.mean, stats.max, converged)
    result = PararealResult(lambdas, stats.max, list(detector.trace),
                            price_from_state(lambdas[-1], cfg), converged, detection.tol)
    return result, stats
