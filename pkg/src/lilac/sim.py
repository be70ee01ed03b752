"""Deterministic event loop with generator-based tasks.

Events are ordered by ``(tick, key, sub)``.  Keys come from one monotone
counter shared with message ids, so two runs fed the same inputs pop events
in exactly the same order.
"""
import heapq
import itertools
from typing import Any, Callable, Generator, Optional


class Pending:
    """A handle that resolves at most once, either with a value or an error."""

    __slots__ = ("done", "value", "error", "_callbacks")

    def __init__(self):
        self.done = False
        self.value = None
        self.error: Optional[BaseException] = None
        self._callbacks: list = []

    def resolve(self, value=None):
        if self.done:
            raise RuntimeError("handle resolved twice")
        self.done = True
        self.value = value
        callbacks, self._callbacks = self._callbacks, []
        for fn in callbacks:
            fn(self)

    def fail(self, error: BaseException):
        self.error = error
        self.resolve(None)

    def add_callback(self, fn: Callable[["Pending"], None]):
        if self.done:
            fn(self)
        else:
            self._callbacks.append(fn)

    def __repr__(self):
        state = "done" if self.done else "pending"
        return f"<Pending {state} {self.value!r}>"


class Sleep:
    __slots__ = ("ticks",)

    def __init__(self, ticks: int):
        self.ticks = ticks


class Simulator:
    def __init__(self):
        self.now = 0
        self._heap: list = []
        self._ids = itertools.count(1)
        self.events_processed = 0

    def next_id(self) -> int:
        return next(self._ids)

    def at(self, tick: int, fn: Callable, *args, key: Optional[int] = None, sub: int = 0):
        if tick < self.now:
            raise ValueError(f"cannot schedule in the past ({tick} < {self.now})")
        if key is None:
            key = next(self._ids)
        heapq.heappush(self._heap, (tick, key, sub, fn, args))

    def schedule(self, delay: int, fn: Callable, *args):
        self.at(self.now + delay, fn, *args)

    def empty(self) -> bool:
        return not self._heap

    def peek_time(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def step(self) -> int:
        """Advance to the next event tick and run everything due there.

        Callbacks that schedule more work at the same tick run in this step
        as well.  Returns the number of events executed (0 on an empty queue).
        """
        if not self._heap:
            return 0
        tick = self._heap[0][0]
        self.now = tick
        n = 0
        heap = self._heap
        while heap and heap[0][0] == tick:
            _, _, _, fn, args = heapq.heappop(heap)
            fn(*args)
            n += 1
        self.events_processed += n
        return n

    def run(self, until: Optional[int] = None, max_events: Optional[int] = None):
        """Run until the queue drains, the clock would pass ``until``, or
        ``max_events`` have been executed."""
        start = self.events_processed
        while self._heap:
            if until is not None and self._heap[0][0] > until:
                self.now = until
                return
            if max_events is not None and self.events_processed - start >= max_events:
                return
            self.step()

    # -- tasks -------------------------------------------------------------

    def spawn(self, gen: Generator, on_exit: Optional[Callable[[Any, Optional[BaseException]], None]] = None) -> Pending:
        """Drive ``gen`` as a task.

        The generator may yield a :class:`Pending` (resumed with its value, or
        with its error thrown in), a :class:`Sleep`, or an ``int`` delay.
        """
        done = Pending()
        self.schedule(0, self._advance, gen, done, on_exit, None, None)
        return done

    def _advance(self, gen, done, on_exit, value, error):
        try:
            if error is not None:
                yielded = gen.throw(error)
            else:
                yielded = gen.send(value)
        except StopIteration as stop:
            if on_exit:
                on_exit(stop.value, None)
            done.resolve(stop.value)
            return
        except Exception as exc:  # noqa: BLE001 - surfaced through the handle
            if on_exit:
                on_exit(None, exc)
            done.fail(exc)
            return

        if isinstance(yielded, Pending):
            def wake(p, gen=gen):
                self.schedule(0, self._advance, gen, done, on_exit, p.value, p.error)
            yielded.add_callback(wake)
        elif isinstance(yielded, Sleep):
            self.schedule(yielded.ticks, self._advance, gen, done, on_exit, None, None)
        elif isinstance(yielded, int):
            self.schedule(yielded, self._advance, gen, done, on_exit, None, None)
        else:
            raise TypeError(f"task yielded unsupported object {yielded!r}")
