"""Event loops: virtual-time, exhaustive-exploration and wall-clock."""
from __future__ import annotations

import heapq
import threading
import time
from typing import Callable, Optional, Sequence


class SimScheduler:
    """Discrete-event loop. Ties at equal virtual time run in scheduling order."""

    def __init__(self):
        self._now = 0.0
        self._heap: list = []
        self._seq = 0
        self.stopped = False
        self.events_run = 0

    def now(self) -> float:
        return self._now

    def after(self, delay: float, cb: Callable[[], None]):
        self._seq += 1
        heapq.heappush(self._heap, (self._now + max(0.0, delay), self._seq, cb))

    def loop(self, node_id: int) -> "SimScheduler":
        return self

    def stop(self):
        self.stopped = True

    def run(self, until: float = float("inf"), max_events: Optional[int] = None):
        while self._heap and not self.stopped:
            t, _, cb = self._heap[0]
            if t > until:
                self._now = until
                return
            heapq.heappop(self._heap)
            self._now = t
            cb()
            self.events_run += 1
            if max_events is not None and self.events_run >= max_events:
                return

    @property
    def pending(self) -> int:
        return len(self._heap)


class ExploringScheduler(SimScheduler):
    """Replays one schedule from a bounded tree of delivery orders.

    Pending events are kept in arrival order. For the first ``depth`` steps
    the next event is ``choices[k]`` among the ``branching`` oldest pending
    ones; afterwards the oldest is always taken, which is fair and so keeps
    the protocols live. Delays are ignored; virtual time advances by a fixed
    tick per step so timers still see time pass.
    """

    def __init__(self, choices: Sequence[int] = (), depth: int = 8, branching: int = 2,
                 step: float = 0.001):
        super().__init__()
        self.choices = list(choices)
        self.depth = depth
        self.branching = branching
        self.step = step
        self.fanout: list[int] = []  # options available at each explored step
        self._pending: list[Callable[[], None]] = []

    def after(self, delay: float, cb: Callable[[], None]):
        self._pending.append(cb)

    @property
    def pending(self) -> int:
        return len(self._pending)

    def run(self, until: float = float("inf"), max_events: Optional[int] = None):
        while self._pending and not self.stopped and self._now <= until:
            k = len(self.fanout)
            if k < self.depth:
                width = min(self.branching, len(self._pending))
                self.fanout.append(width)
                pick = self.choices[k] if k < len(self.choices) else 0
                pick = min(pick, width - 1)
            else:
                pick = 0
            cb = self._pending.pop(pick)
            self._now += self.step
            cb()
            self.events_run += 1
            if max_events is not None and self.events_run >= max_events:
                return


def next_schedule(choices: list[int], fanout: list[int]) -> Optional[list[int]]:
    """Odometer step over a DFS tree; None when every branch has been visited."""
    path = [choices[i] if i < len(choices) else 0 for i in range(len(fanout))]
    for i in reversed(range(len(fanout))):
        if path[i] + 1 < fanout[i]:
            return path[:i] + [path[i] + 1]
    return None


class ThreadedLoop:
    """One wall-clock event loop on its own thread.

    ``after`` may be called from any thread. Time is seconds since ``epoch``
    (shared by all loops of a cluster so timestamps are comparable).
    """

    def __init__(self, name: str, epoch: float):
        self.name = name
        self.epoch = epoch
        self._heap: list = []
        self._seq = 0
        self._cv = threading.Condition()
        self.stopped = False
        self.error: Optional[BaseException] = None
        self._thread = threading.Thread(target=self._main, name=name, daemon=True)

    def now(self) -> float:
        return time.monotonic() - self.epoch

    def after(self, delay: float, cb: Callable[[], None]):
        with self._cv:
            self._seq += 1
            heapq.heappush(self._heap, (self.now() + max(0.0, delay), self._seq, cb))
            self._cv.notify()

    def start(self):
        self._thread.start()

    def stop(self):
        with self._cv:
            self.stopped = True
            self._cv.notify()

    def join(self, timeout: Optional[float] = None):
        self._thread.join(timeout)

    def _main(self):
        while True:
            with self._cv:
                while not self.stopped:
                    if self._heap:
                        wait = self._heap[0][0] - self.now()
                        if wait <= 0:
                            break
                        self._cv.wait(wait)
                    else:
                        self._cv.wait()
                if self.stopped:
                    return
                _, _, cb = heapq.heappop(self._heap)
            try:
                cb()
            except BaseException as e:  # surfaced by the cluster runner
                self.error = e
                self.stopped = True
                return
