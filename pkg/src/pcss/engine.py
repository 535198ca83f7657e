"""Deterministic discrete-event core.

Time jumps from one decision instant to the next.  Elapsed ticks are charged
to every running unit and its capacity source at each jump (interval
charging), so the cost of a run grows with the number of events, not with the
horizon.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import server as srv
from .dispatcher import GlobalQueue, Dispatcher, spawn_pjobs, STEAL_POLICIES
from .model import (
    Job, PJob, ServerState, SimulationError, SourceKind, SpecError, TaskSet, WorkerState,
)
from .trace import Trace
from .workload import arrivals, dump_spec, job_body

log = logging.getLogger(__name__)


class EventKind(enum.IntEnum):
    # simultaneous events are handled in this order
    COMPLETION = 0
    SPAWN = 1
    EXHAUSTION = 2
    RESIDUAL_EXPIRY = 3
    REPLENISH = 4
    ARRIVAL = 5


@dataclass(frozen=True, order=True)
class Event:
    time: int
    kind: EventKind
    server_id: int
    payload: object = field(default=None, compare=False)


@dataclass(frozen=True)
class SimConfig:
    m: int = 1
    horizon: int = 1000
    seed: int = 0
    policy: str = "pcss"
    steal: str = "deadline-compare"
    exec_range: tuple = (Fraction(1, 2), Fraction(1))
    jitter: Fraction = Fraction(1, 2)
    record_waits: bool = True

    def validate(self) -> None:
        if self.m < 1:
            raise SpecError("m must be >= 1")
        if self.horizon <= 0:
            raise SpecError("horizon must be positive")
        if self.policy not in srv.POLICIES:
            raise SpecError(f"unknown policy {self.policy!r}")
        if self.policy in ("cbs", "css") and self.m != 1:
            raise SpecError(f"policy {self.policy} is uniprocessor-only (got m={self.m})")
        if self.steal not in STEAL_POLICIES:
            raise SpecError(f"unknown steal policy {self.steal!r}")


def next_exhaustion_time(workers, t: int, bound: int) -> int:
    """Earliest instant a running unit hits a milestone or drains its source."""
    best = bound
    for w in workers:
        u = w.current
        if u is None:
            continue
        left = u.seg_left if isinstance(u, Job) else u.remaining
        amt = w.source.amount
        if amt < left:
            left = amt
        if t + left < best:
            best = t + left
    return best


class Simulation:
    def __init__(self, taskset: TaskSet, config: SimConfig = SimConfig()):
        config.validate()
        self.taskset = taskset
        self.config = config
        self.policy = config.policy
        self.horizon = config.horizon
        share = srv.sharing(config.policy)
        self.servers = [ServerState(task, phantom=share) for task in taskset]
        self.by_id = {s.task_id: s for s in self.servers}
        self.tasks = {t.task_id: t for t in taskset}
        self.workers = [WorkerState(i + 1) for i in range(config.m)]
        self.queue = GlobalQueue(self.by_id)
        self.trace = Trace({
            "m": config.m, "horizon": config.horizon, "seed": config.seed,
            "policy": config.policy, "steal": config.steal,
            "taskset": taskset_fingerprint(taskset),
        })
        self.dispatcher = Dispatcher(self.servers, self.workers, self.queue, config.policy,
                                     config.steal, self.trace, self._on_start, config.record_waits)
        self.arrivals = {
            t.task_id: arrivals(t, config.horizon, config.seed, config.jitter) for t in taskset
        }
        self._arr_heap = [(a[0], tid, 0) for tid, a in self.arrivals.items() if a]
        heapq.heapify(self._arr_heap)
        self.jobs: list[Job] = []
        self.t = 0
        self._open: dict[int, tuple] = {}
        self.n_events = 0
        self.done = False
        self._started = False

    # ----------------------------------------------------------------- helpers

    def _rec(self, t, kind, worker=None, unit=None, server=None, src=None, deadline=None):
        if src is not None:
            self.trace.add(t, t, worker, kind, unit, server, src.kind.value,
                           src.server.task_id, src.deadline)
        else:
            self.trace.add(t, t, worker, kind, unit, server, None, None, deadline)

    def _on_start(self, w: WorkerState, t: int) -> None:
        job = w.current
        if job.seg_left == 0:
            self._advance_main(w, t)

    def _advance_main(self, w: WorkerState, t: int) -> None:
        """Main unit of ``w`` reached the end of its segment: spawn, move on."""
        job = w.current
        segs = job.template.segments
        while True:
            seg = segs[job.seg_idx]
            if seg.spawn:
                for p in spawn_pjobs(w, job, seg.spawn, t):
                    self._rec(t, "SPAWN", w.wid, p.uid, job.task_id)
            if job.seg_idx == len(segs) - 1:
                job.main_done = True
                w.current = None
                w.source = None
                self._rec(t, "END", w.wid, job.uid, job.task_id)
                if job.pending_pjobs == 0:
                    self._complete(job, t)
                return
            job.seg_idx += 1
            job.seg_left = segs[job.seg_idx].cost
            if job.seg_left > 0:
                return

    def _complete(self, job: Job, t: int) -> None:
        s = self.by_id[job.task_id]
        if not s.jobs or s.jobs[0] is not job:
            raise SimulationError(f"{job.uid} completes but is not at the head of S{s.task_id}")
        if job.remaining != 0:
            raise SimulationError(f"{job.uid} completes with {job.remaining} ticks left")
        job.finish = t
        self._rec(t, "COMPLETE", None, job.uid, s.task_id, deadline=s.d)
        released = srv.on_job_completion(s, t, self.policy)
        if released:
            self._rec(t, "RELEASE", None, None, s.task_id, deadline=s.d)
        elif not s.active:
            self._rec(t, "DEACTIVATE", None, None, s.task_id, deadline=s.d)
        if s.jobs:
            self.queue.enqueue_job(s.jobs[0])

    # ------------------------------------------------------------------- time

    def next_time(self) -> int:
        t = self.t
        best = self.horizon
        if self._arr_heap and self._arr_heap[0][0] < best:
            best = self._arr_heap[0][0]
        for s in self.servers:
            if s.d < best and srv.needs_deadline_event(s, self.policy):
                if s.d <= t:
                    raise SimulationError(f"S{s.task_id} deadline {s.d} not after t={t}")
                best = s.d
        return next_exhaustion_time(self.workers, t, best)

    def advance(self, t1: int) -> None:
        dt = t1 - self.t
        if dt < 0:
            raise SimulationError(f"event in the past: {t1} < {self.t}")
        if dt:
            for w in self.workers:
                u = w.current
                if u is None:
                    continue
                srv.charge(w.source, dt, t1)
                if isinstance(u, Job):
                    u.seg_left -= dt
                    job = u
                else:
                    u.remaining -= dt
                    job = u.job
                job.executed += dt
                job.remaining -= dt
        self.t = t1

    def events_at(self, t: int) -> list[Event]:
        evs = []
        for w in self.workers:
            u = w.current
            if u is None:
                continue
            if isinstance(u, Job):
                if u.seg_left == 0:
                    last = u.seg_idx == len(u.template.segments) - 1
                    kind = EventKind.COMPLETION if last else EventKind.SPAWN
                    evs.append(Event(t, kind, u.task_id, w))
                    continue
            elif u.remaining == 0:
                evs.append(Event(t, EventKind.COMPLETION, u.task_id, w))
                continue
            if w.source.amount == 0:
                evs.append(Event(t, EventKind.EXHAUSTION, u.task_id, w))
        for s in self.servers:
            if s.d == t and srv.needs_deadline_event(s, self.policy):
                kind = EventKind.REPLENISH if s.jobs else EventKind.RESIDUAL_EXPIRY
                evs.append(Event(t, kind, s.task_id, s))
        heap = self._arr_heap
        while heap and heap[0][0] == t:
            _, tid, j = heapq.heappop(heap)
            evs.append(Event(t, EventKind.ARRIVAL, tid, j))
            nxt = self.arrivals[tid]
            if j + 1 < len(nxt):
                heapq.heappush(heap, (nxt[j + 1], tid, j + 1))
        evs.sort(key=lambda e: (e.kind, e.server_id, e.payload.wid if isinstance(e.payload, WorkerState) else 0))
        return evs

    def apply(self, ev: Event) -> None:
        t = ev.time
        k = ev.kind
        if k is EventKind.COMPLETION or k is EventKind.SPAWN:
            w = ev.payload
            u = w.current
            if isinstance(u, Job):
                self._advance_main(w, t)
            else:
                w.current = None
                w.source = None
                self._rec(t, "END", w.wid, u.uid, u.task_id)
                job = u.job
                job.pending_pjobs -= 1
                if job.pending_pjobs == 0 and job.main_done:
                    self._complete(job, t)
        elif k is EventKind.EXHAUSTION:
            w = ev.payload
            self._rec(t, "EXHAUST", w.wid, w.current.uid, w.current.task_id, w.source)
        elif k is EventKind.REPLENISH or k is EventKind.RESIDUAL_EXPIRY:
            s = ev.payload
            what = srv.deadline_event(s, t, self.policy)
            if what is None:
                return
            if "expire" in what:
                self._rec(t, "EXPIRE", None, None, s.task_id, deadline=t)
                self._rec(t, "DEACTIVATE", None, None, s.task_id, deadline=t)
            if what != "expire":
                self._rec(t, "RECHARGE", None, None, s.task_id, deadline=s.d)
            if what == "replenish":
                self.queue.reorder()
        else:
            tid, j = ev.server_id, ev.payload
            task = self.tasks[tid]
            s = self.by_id[tid]
            job = Job(tid, j, t, job_body(task, j, self.config.seed, self.config.exec_range),
                      task.T)
            self.jobs.append(job)
            self._rec(t, "ARRIVAL", None, job.uid, tid, deadline=job.deadline)
            head = not s.jobs
            if srv.on_job_arrival(s, job, t):
                self._rec(t, "RECHARGE", None, None, tid, deadline=s.d)
            if head:
                self.queue.enqueue_job(job)
        self.n_events += 1

    def _sync_intervals(self, t: int) -> None:
        opened = self._open
        for w in self.workers:
            u = w.current
            old = opened.get(w.wid)
            if u is None:
                if old is None:
                    continue
                cur = None
            else:
                src = w.source
                cur = (t, u, src.kind, src.server.task_id, src.deadline)
                if old is not None and old[1] is u and old[2:] == cur[2:]:
                    continue
            if old is not None and old[0] < t:
                start, ou, kind, ssid, dl = old
                self.trace.add(start, t, w.wid, "RUN", ou.uid, ou.task_id, kind.value, ssid, dl)
            opened[w.wid] = cur

    def _check(self) -> None:
        for s in self.servers:
            s.check()

    # ------------------------------------------------------------------- loop

    def start(self) -> None:
        self._started = True
        for s in self.servers:
            if s.c:  # idle best-effort reservation, stealable from t=0
                self._rec(0, "RECHARGE", None, None, s.task_id, deadline=s.d)
        self._decide(0)

    def _decide(self, t: int) -> None:
        for ev in self.events_at(t):
            self.apply(ev)
        self._check()
        self.dispatcher.dispatch(t)
        self._sync_intervals(t)

    def step(self) -> bool:
        """Advance to the next decision instant.  False once the horizon is hit."""
        if not self._started:
            self.start()
            return True
        if self.done:
            return False
        t1 = self.next_time()
        if t1 >= self.horizon:
            self.advance(self.horizon)
            # work that ends exactly at the horizon still completes
            for ev in self.events_at(self.horizon):
                if ev.kind is EventKind.COMPLETION:
                    self.apply(ev)
            self._sync_intervals_close()
            self.done = True
            return False
        self.advance(t1)
        self._decide(t1)
        return True

    def _sync_intervals_close(self) -> None:
        t = self.horizon
        for wid, old in sorted(self._open.items()):
            if old is None:
                continue
            start, ou, kind, ssid, dl = old
            if start < t:
                self.trace.add(start, t, wid, "RUN", ou.uid, ou.task_id, kind.value, ssid, dl)
        self._open = {}

    def run(self) -> Trace:
        try:
            while self.step():
                pass
        except SimulationError as e:
            e.trace = self.trace  # diagnostic prefix
            raise
        return self.trace


def run(taskset: TaskSet, config: SimConfig = SimConfig()) -> Trace:
    return Simulation(taskset, config).run()


def taskset_fingerprint(taskset: TaskSet) -> str:
    return hashlib.sha256(dump_spec(taskset).encode()).hexdigest()[:12]
