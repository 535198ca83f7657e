"""Maps runnable work onto workers.

Jobs wait in one system-wide queue ordered by their server's deadline.  Pjobs
never enter that queue: they sit in the deque of the worker that spawned them,
where the owner takes from the bottom and thieves take from the top.

At every decision instant the dispatcher

1. collects the *candidate* units: running units, queued jobs, the bottom pjob
   of every idle worker's deque and (if the steal policy allows) every deque top;
2. keeps the capacity link of every running unit while it stays valid, then
   lets servers claim sources for the remaining units in EDF order of their
   own deadline, each unit taking the next source of the residual, own, stolen
   chain, with every capacity bound to at most one unit;
3. fills idle workers (local bottom, then queue, then steal on equal deadline)
   and preempts for strictly earlier effective deadlines until nothing changes.
"""

from __future__ import annotations

import bisect
from typing import Callable, Optional

from .model import CapacitySource, Job, PJob, ServerState, SimulationError, WorkerState
from .server import keep_source, select_capacity_source

STEAL_POLICIES = ("deadline-compare", "queue-empty-only", "off")

# how a waiting unit is reached by a worker; lower wins on equal deadline
LOCAL, GLOBAL, THIEF = 0, 1, 2


class GlobalQueue:
    """Released jobs ordered by (server deadline, task id)."""

    def __init__(self, servers: dict[int, ServerState]):
        self._servers = servers
        self._jobs: list[Job] = []

    def _key(self, job: Job):
        return (self._servers[job.task_id].d, job.task_id, job.index)

    def enqueue_job(self, job: Job) -> None:
        if any(j is job for j in self._jobs):
            raise SimulationError(f"{job.uid} already queued")
        keys = [self._key(j) for j in self._jobs]
        self._jobs.insert(bisect.bisect_right(keys, self._key(job)), job)

    def remove(self, job: Job) -> None:
        for i, j in enumerate(self._jobs):
            if j is job:
                del self._jobs[i]
                return
        raise SimulationError(f"{job.uid} not queued")

    def reorder(self) -> None:
        self._jobs.sort(key=self._key)

    def deadlines(self) -> list[int]:
        return [self._servers[j.task_id].d for j in self._jobs]

    def __iter__(self):
        return iter(self._jobs)

    def __len__(self):
        return len(self._jobs)

    def __contains__(self, job):
        return any(j is job for j in self._jobs)


def spawn_pjobs(worker: WorkerState, job: Job, costs, t: int) -> list[PJob]:
    """Push new pjobs of ``job`` onto the bottom of ``worker``'s deque, in order."""
    out = []
    for cost in costs:
        p = PJob(job, job.spawned, cost, t, worker.wid)
        job.spawned += 1
        job.pending_pjobs += 1
        worker.deque.append(p)
        out.append(p)
    return out


class Cand:
    """A unit that could run now, and how it can be reached."""

    __slots__ = ("unit", "server", "worker", "top", "bottom", "source", "order", "running")

    def __init__(self, unit, server, worker=None, top=False, bottom=False, running=False):
        self.unit = unit
        self.server = server
        self.worker = worker  # running worker, or deque owner for pjobs
        self.top = top
        self.bottom = bottom
        self.running = running
        self.source: Optional[CapacitySource] = None
        self.order = 0

    def key(self):
        return (self.source.deadline, self.server.task_id, self.order)


class Dispatcher:
    def __init__(self, servers: list[ServerState], workers: list[WorkerState],
                 queue: GlobalQueue, policy: str = "pcss", steal: str = "deadline-compare",
                 trace=None, on_start: Optional[Callable] = None, record_waits: bool = True):
        if steal not in STEAL_POLICIES:
            raise ValueError(f"unknown steal policy {steal!r}")
        self.servers = servers
        self.by_id = {s.task_id: s for s in servers}
        self.workers = workers
        self.queue = queue
        self.policy = policy
        self.steal = steal
        self.trace = trace
        self.on_start = on_start
        self.record_waits = record_waits

    # ------------------------------------------------------------------ records

    def _rec(self, t, kind, worker, unit, src=None):
        if self.trace is None:
            return
        sid = unit.task_id if unit is not None else None
        if src is None:
            self.trace.add(t, t, worker, kind, unit.uid if unit else None, sid)
        else:
            self.trace.add(t, t, worker, kind, unit.uid, sid, src.kind.value,
                           src.server.task_id, src.deadline)

    # --------------------------------------------------------------- candidates

    def candidates(self, with_tops: bool) -> list[Cand]:
        by_id = self.by_id
        out = []
        for w in self.workers:
            u = w.current
            if u is not None:
                out.append(Cand(u, by_id[u.task_id], w, running=True))
        for job in self.queue:
            out.append(Cand(job, by_id[job.task_id]))
        for w in self.workers:
            dq = w.deque
            if not dq:
                continue
            n = len(dq)
            if w.current is None:
                p = dq[-1]
                out.append(Cand(p, by_id[p.task_id], w, top=(n == 1), bottom=True))
                if n > 1 and with_tops:
                    p = dq[0]
                    out.append(Cand(p, by_id[p.task_id], w, top=True))
            elif with_tops:
                p = dq[0]
                out.append(Cand(p, by_id[p.task_id], w, top=True, bottom=(n == 1)))
        return out

    def claim(self, cands: list[Cand], t: int) -> list[Cand]:
        """Bind capacity sources to candidates; return those that got one.

        Running units keep their link while it stays valid.  Broken links, then
        waiting units, select in EDF order of their server's deadline.
        """
        m = len(self.workers)
        claimed: set = set()
        offered = []
        # only these can lend capacity to another server
        pool = [s for s in self.servers if s.r > 0 or (not s.isolated and not s.jobs and s.c > 0)]
        busy: dict[int, int] = {}
        broken = []
        groups: dict[int, list[Cand]] = {}
        for c in cands:
            tid = c.server.task_id
            if not c.running:
                groups.setdefault(tid, []).append(c)
                continue
            busy[tid] = busy.get(tid, 0) + 1
            src = keep_source(c.server, c.worker.source, t, self.policy)
            if src is None or src.key in claimed:
                broken.append(c)
                continue
            claimed.add(src.key)
            c.source = src
            offered.append(c)
        if len(broken) > 1:
            broken.sort(key=lambda c: (c.server.d, c.server.task_id, c.worker.wid))
        for c in broken:
            src = select_capacity_source(c.server, t, pool, claimed, self.policy)
            if src is not None:
                claimed.add(src.key)
                c.source = src
                offered.append(c)
        for tid in sorted(groups, key=lambda tid: (self.by_id[tid].d, tid)):
            units = groups[tid]
            # queued job first, then pjobs by worker, bottom before top
            if len(units) > 1:
                units.sort(key=lambda c: (c.worker is not None,
                                          c.worker.wid if c.worker is not None else -1,
                                          not c.bottom))
            server = units[0].server
            srcs = []
            for _ in range(min(len(units), m - busy.get(tid, 0))):
                src = select_capacity_source(server, t, pool, claimed, self.policy)
                if src is None:
                    break
                claimed.add(src.key)
                srcs.append(src)
            if len(srcs) > 1:
                srcs.sort(key=lambda s: s.deadline)
            for i, (c, src) in enumerate(zip(units, srcs)):
                c.source = src
                c.order = i
                offered.append(c)
        return offered

    def offers(self, t: int) -> list[Cand]:
        if self.steal == "deadline-compare":
            return self.claim(self.candidates(True), t)
        got = self.claim(self.candidates(False), t)
        if self.steal == "off" or any(c.worker is None for c in got):
            return got
        return self.claim(self.candidates(True), t)

    def steal_allowed(self, offered: list[Cand]) -> bool:
        if self.steal == "deadline-compare":
            return True
        if self.steal == "off":
            return False
        return not any(c.worker is None for c in offered)

    @staticmethod
    def access(c: Cand, w: WorkerState, steal_ok: bool) -> Optional[int]:
        if c.worker is None:
            return GLOBAL
        if c.bottom and c.worker is w:
            return LOCAL
        if c.top and c.worker is not w and steal_ok:
            return THIEF
        return None

    # ------------------------------------------------------------------ moves

    def take(self, w: WorkerState, c: Cand, how: int, t: int) -> None:
        u = c.unit
        if how == GLOBAL:
            self.queue.remove(u)
            self._rec(t, "DISPATCH", w.wid, u, c.source)
        elif how == LOCAL:
            if w.deque[-1] is not u:
                raise SimulationError(f"local pop of {u.uid} is not the bottom of W{w.wid}")
            w.deque.pop()
            self._rec(t, "LOCAL", w.wid, u, c.source)
        else:
            victim = c.worker
            if victim.deque[0] is not u:
                raise SimulationError(f"steal of {u.uid} is not the top of W{victim.wid}")
            victim.deque.popleft()
            self._rec(t, "STEAL", w.wid, u, c.source)
        w.current = u
        w.source = c.source
        if self.on_start is not None and isinstance(u, Job):
            self.on_start(w, t)

    def preempt(self, w: WorkerState, t: int) -> None:
        u = w.current
        w.current = None
        w.source = None
        self._rec(t, "PREEMPT", w.wid, u)
        if isinstance(u, Job):
            self.queue.enqueue_job(u)
        else:
            self.workers[u.origin - 1].deque.append(u)
            self._rec(t, "REQUEUE", u.origin, u)

    def next_work(self, w: WorkerState, offered: list[Cand], steal_ok: bool):
        """Best waiting unit ``w`` may take: (cand, how) or None."""
        best = None
        for c in offered:
            if c.running:
                continue
            how = self.access(c, w, steal_ok)
            if how is None:
                continue
            k = (c.source.deadline, how, c.server.task_id, c.order)
            if best is None or k < best[0]:
                best = (k, c, how)
        return None if best is None else best[1:]

    def preempt_check(self, offered: list[Cand], steal_ok: bool):
        """First waiting unit (EDF order) that some worker should run instead of
        a strictly later-deadline unit: (worker, cand, how) or None."""
        running = {c.worker.wid: c for c in offered if c.running}
        waiting = sorted((c for c in offered if not c.running), key=Cand.key)
        for v in waiting:
            worst = None
            for w in self.workers:
                r = running.get(w.wid)
                if r is None or r.source.deadline <= v.source.deadline:
                    continue
                how = self.access(v, w, steal_ok)
                if how is None:
                    continue
                if how == LOCAL and isinstance(r.unit, PJob) and r.unit.origin == w.wid:
                    # the requeued pjob would bury v under the bottom
                    continue
                if worst is None or r.key() > worst[1].key():
                    worst = (w, r, how)
            if worst is not None:
                return worst[0], v, worst[2]
        return None

    # ---------------------------------------------------------------- driver

    def dispatch(self, t: int) -> list[Cand]:
        self.queue.reorder()
        limit = 8 * (len(self.workers) + len(self.servers)) + 64
        for _ in range(limit):
            offered = self.offers(t)
            kept = {c.worker.wid for c in offered if c.running}
            lost = [w for w in self.workers if w.current is not None and w.wid not in kept]
            if lost:
                for w in lost:
                    self.preempt(w, t)
                continue
            steal_ok = self.steal_allowed(offered)
            moved = False
            for w in self.workers:
                if w.current is None:
                    pick = self.next_work(w, offered, steal_ok)
                    if pick is not None:
                        self.take(w, pick[0], pick[1], t)
                        moved = True
                        break
            if moved:
                continue
            pre = self.preempt_check(offered, steal_ok)
            if pre is None:
                break
            w, v, how = pre
            self.preempt(w, t)
            self.take(w, v, how, t)
        else:
            raise SimulationError(f"dispatch did not settle at t={t}")
        for s in self.servers:
            s.links = []
        for c in offered:
            if c.running:
                c.worker.source = c.source
                c.server.links.append(c.source)
            elif self.record_waits and self.trace is not None:
                owner = c.worker.wid if c.worker is not None else None
                self._rec(t, "WAIT", owner, c.unit, c.source)
        return offered
