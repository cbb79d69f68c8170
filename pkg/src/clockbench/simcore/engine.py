"""Discrete-event execution of per-rank sequential programs.

Processes are generators driven by the engine; they yield request objects
(send, recv, read_clock, wait_until_local, collective, compute) and are
resumed with the result. The event queue is keyed by (true time, sequence
number) with ties broken by insertion order, so runs are deterministic.

Message semantics follow blocking MPI point-to-point: a send is buffered and
returns immediately; the message arrives at its destination after one sampled
one-way latency; a receive blocks until the matching (src, tag) message has
arrived, matching in send order per channel.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .instance import SimInstance


class DeadlockError(RuntimeError):
    def __init__(self, blocked: dict):
        names = ", ".join(f"rank {r} waiting on recv{key}" for r, key in sorted(blocked.items()))
        super().__init__(f"deadlock: all runnable work exhausted with blocked processes: {names}")
        self.blocked = blocked


# -- requests ------------------------------------------------------------------

@dataclass(frozen=True)
class Send:
    dst: int
    tag: Any = 0
    payload: Any = None


@dataclass(frozen=True)
class Recv:
    src: int
    tag: Any = 0


@dataclass(frozen=True)
class ReadClock:
    pass


@dataclass(frozen=True)
class WaitUntilLocal:
    target: float


@dataclass(frozen=True)
class Collective:
    name: str
    msize: int = 0
    label: str | None = None


@dataclass(frozen=True)
class Compute:
    duration: float


@dataclass
class TraceRecord:
    rank: int
    kind: str
    true_time: float
    local_time: float | None = None


@dataclass
class EventTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def add(self, rank, kind, true_time, local_time=None):
        self.records.append(TraceRecord(rank, kind, true_time, local_time))

    def filter(self, kind: str) -> list[TraceRecord]:
        return [r for r in self.records if r.kind == kind]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("rank,event_kind,true_time,local_time\n")
            for r in self.records:
                local = "" if r.local_time is None else repr(r.local_time)
                fh.write(f"{r.rank},{r.kind},{r.true_time!r},{local}\n")


class _Proc:
    def __init__(self, rank: int, gen):
        self.rank = rank
        self.gen = gen
        self.now = 0.0
        self.done = False
        self.waiting_on: tuple | None = None  # (src, tag) while blocked on recv


class Engine:
    def __init__(self, instance: SimInstance, record_trace: bool = True):
        self.inst = instance
        self.trace = EventTrace() if record_trace else None
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0
        self._procs: dict[int, _Proc] = {}
        # channel (src, dst, tag) -> list of arrival-sorted-by-send-order messages
        self._channels: dict[tuple, list[tuple[float, Any]]] = {}
        self._coll_entries: dict[tuple, list[tuple[int, float]]] = {}
        self._coll_round: dict[tuple, int] = {}

    # -- scheduling ------------------------------------------------------------

    def _schedule(self, t: float, fn: Callable[[], None]) -> None:
        heapq.heappush(self._heap, (t, self._seq, fn))
        self._seq += 1

    def spawn(self, rank: int, gen) -> None:
        proc = _Proc(rank, gen)
        proc.now = float(self.inst.now[rank])
        self._procs[rank] = proc
        self._schedule(proc.now, lambda p=proc: self._step(p, None))

    def run(self) -> EventTrace | None:
        while self._heap:
            t, _, fn = heapq.heappop(self._heap)
            fn()
        blocked = {r: p.waiting_on for r, p in self._procs.items() if not p.done and p.waiting_on}
        if blocked:
            raise DeadlockError(blocked)
        not_done = [r for r, p in self._procs.items() if not p.done]
        if not_done:
            raise RuntimeError(f"processes {not_done} stopped without completing")
        for r, p in self._procs.items():
            self.inst.now[r] = p.now
        return self.trace

    # -- process stepping --------------------------------------------------------

    def _step(self, proc: _Proc, value) -> None:
        try:
            req = proc.gen.send(value)
        except StopIteration:
            proc.done = True
            return
        self._handle(proc, req)

    def _trace(self, proc, kind, local=None):
        if self.trace is not None:
            self.trace.add(proc.rank, kind, proc.now, local)

    def _handle(self, proc: _Proc, req) -> None:
        if isinstance(req, Send):
            latency = self.inst.sample_latency(proc.rank, req.dst)
            arrival = proc.now + latency
            self._trace(proc, "send")
            self._schedule(arrival, lambda: self._deliver(proc.rank, req.dst, req.tag, arrival, req.payload))
            self._step(proc, None)
        elif isinstance(req, Recv):
            chan = self._channels.get((req.src, proc.rank, req.tag))
            if chan:
                arrival, payload = chan.pop(0)
                resume_at = max(proc.now, arrival)
                self._schedule(resume_at, lambda: self._resume_recv(proc, resume_at, payload))
            else:
                proc.waiting_on = (req.src, req.tag)
        elif isinstance(req, ReadClock):
            reading = self.inst.clocks[proc.rank].read(proc.now)
            self._trace(proc, "clock_read", reading)
            self._step(proc, reading)
        elif isinstance(req, WaitUntilLocal):
            saved = self.inst.now[proc.rank]
            self.inst.now[proc.rank] = proc.now
            self.inst.busy_wait_until_local(proc.rank, req.target)
            wake = float(self.inst.now[proc.rank])
            self.inst.now[proc.rank] = saved
            if wake <= proc.now:
                self._trace(proc, "wait")
                self._step(proc, None)
            else:
                self._schedule(wake, lambda: self._resume_at(proc, wake, "wait"))
        elif isinstance(req, Compute):
            if req.duration < 0:
                raise ValueError("compute duration must be >= 0")
            wake = proc.now + req.duration
            self._schedule(wake, lambda: self._resume_at(proc, wake, "compute"))
        elif isinstance(req, Collective):
            key = (req.name, req.msize, self._coll_round.setdefault((req.name, req.msize), 0))
            entries = self._coll_entries.setdefault(key, [])
            entries.append((proc.rank, proc.now))
            self._trace(proc, "collective_enter")
            if len(entries) == self.inst.p:
                self._coll_round[(req.name, req.msize)] += 1
                self._run_collective(req, entries)
        else:
            raise TypeError(f"unknown engine request {req!r}")

    def _run_collective(self, req: Collective, entries: list[tuple[int, float]]) -> None:
        entry_times = np.empty(self.inst.p)
        for rank, t in entries:
            entry_times[rank] = t
        rec = self.inst.collectives[req.name].execute(
            entry_times,
            req.msize,
            latency_factor=self.inst.latency_factor,
            label=req.label if req.label is not None else req.name,
        ) if req.name != "barrier" else self.inst.barrier_model.execute(
            entry_times, 0, latency_factor=self.inst.latency_factor, label=req.label or "barrier"
        )
        self.inst.collective_log.append(rec)
        for rank, _ in entries:
            proc = self._procs[rank]
            exit_t = float(rec.exits[rank])
            self._schedule(exit_t, lambda p=proc, t=exit_t: self._resume_at(p, t, "collective_exit"))

    def _deliver(self, src: int, dst: int, tag, arrival: float, payload) -> None:
        proc = self._procs.get(dst)
        if proc is not None and not proc.done and proc.waiting_on == (src, tag):
            proc.waiting_on = None
            resume_at = max(proc.now, arrival)
            self._schedule(resume_at, lambda: self._resume_recv(proc, resume_at, payload))
        else:
            self._channels.setdefault((src, dst, tag), []).append((arrival, payload))

    def _resume_recv(self, proc: _Proc, t: float, payload) -> None:
        proc.now = max(proc.now, t)
        self._trace(proc, "recv")
        self._step(proc, payload)

    def _resume_at(self, proc: _Proc, t: float, kind: str) -> None:
        proc.now = max(proc.now, t)
        self._trace(proc, kind)
        self._step(proc, None)


# -- declarative programs --------------------------------------------------------

_STEP_KINDS = {"read_clock", "send", "recv", "wait_until_local", "collective", "compute"}


def _compile(steps: Iterable) -> Callable:
    steps = list(steps)
    for s in steps:
        if not s or s[0] not in _STEP_KINDS:
            raise ValueError(f"unknown program step {s!r}")

    def program():
        for s in steps:
            kind = s[0]
            if kind == "read_clock":
                yield ReadClock()
            elif kind == "send":
                yield Send(dst=s[1], tag=s[2] if len(s) > 2 else 0, payload=s[3] if len(s) > 3 else None)
            elif kind == "recv":
                yield Recv(src=s[1], tag=s[2] if len(s) > 2 else 0)
            elif kind == "wait_until_local":
                yield WaitUntilLocal(target=float(s[1]))
            elif kind == "collective":
                yield Collective(name=s[1], msize=int(s[2]) if len(s) > 2 else 0)
            elif kind == "compute":
                yield Compute(duration=float(s[1]))

    return program


def run_programs(instance: SimInstance, programs: dict[int, Iterable] | list) -> EventTrace:
    """Execute per-rank step lists under discrete-event semantics.

    `programs` maps rank -> sequence of steps; each step is a tuple:
    ("read_clock",), ("send", dst[, tag[, payload]]), ("recv", src[, tag]),
    ("wait_until_local", t), ("collective", name[, msize]), ("compute", dt).
    """
    if isinstance(programs, (list, tuple)):
        programs = dict(enumerate(programs))
    engine = Engine(instance, record_trace=True)
    for rank, steps in sorted(programs.items()):
        engine.spawn(rank, _compile(steps)())
    return engine.run()
