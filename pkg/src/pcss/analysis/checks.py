"""Trace checkers.  They re-derive what they need from the records alone and
never look at engine state, so they can catch engine bugs."""

from __future__ import annotations

import bisect
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Optional

from ..model import TaskSet
from ..trace import Record, Trace


@dataclass(frozen=True)
class Violation:
    time: int
    server: Optional[int]
    what: str

    def __str__(self):
        who = "" if self.server is None else f" S{self.server}"
        return f"t={self.time}{who}: {self.what}"


@dataclass
class Report:
    name: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, time, server, what):
        self.violations.append(Violation(time, server, what))

    def __str__(self):
        if self.ok:
            return f"{self.name}: ok"
        lines = [f"{self.name}: {len(self.violations)} violation(s)"]
        lines += [f"  {v}" for v in self.violations[:20]]
        if len(self.violations) > 20:
            lines.append(f"  ... {len(self.violations) - 20} more")
        return "\n".join(lines)


def _runs(trace: Trace) -> list[Record]:
    return [r for r in trace.records if r.kind == "RUN"]


class DeadlineTimeline:
    """Server deadline as a step function, rebuilt from RECHARGE records."""

    def __init__(self, trace: Trace):
        pts: dict[int, list] = defaultdict(list)
        for r in trace.records:
            if r.kind == "RECHARGE":
                pts[r.server].append((r.t_start, r.deadline))
        self._times = {}
        self._values = {}
        for sid, seq in pts.items():
            times, values = [], []
            for t, d in seq:  # file order: a later record at the same instant wins
                if times and times[-1] == t:
                    values[-1] = d
                else:
                    times.append(t)
                    values.append(d)
            self._times[sid], self._values[sid] = times, values

    def at(self, server: int, t: int) -> int:
        times = self._times.get(server)
        if not times:
            return 0
        i = bisect.bisect_right(times, t) - 1
        return self._values[server][i] if i >= 0 else 0

    def windows(self, server: int, horizon: int) -> list[tuple[int, int]]:
        times = self._times.get(server, [])
        ends = times[1:] + [horizon]
        return list(zip(times, ends))


def check_isolation(trace: Trace, taskset: TaskSet) -> Report:
    """Budget per replenishment window and no stealing from isolated servers.

    Every tick drawn from a server's reservation (its own use, residual
    reclaimed by others, capacity stolen by others) counts against the window
    opened by the server's last recharge.
    """
    rep = Report("isolation")
    tasks = {t.task_id: t for t in taskset}
    horizon = trace.horizon
    timeline = DeadlineTimeline(trace)
    by_src: dict[int, list[Record]] = defaultdict(list)
    for r in _runs(trace):
        if r.source_server not in tasks:
            rep.add(r.t_start, r.source_server, f"unknown source server in {r.line()}")
            continue
        by_src[r.source_server].append(r)
        if r.source_kind == "Stolen" and tasks[r.source_server].isolated:
            rep.add(r.t_start, r.source_server,
                    f"isolated server is a steal victim of {r.unit} (S{r.server})")
    for sid, runs in by_src.items():
        Q = tasks[sid].Q
        wins = timeline.windows(sid, horizon)
        starts = [a for a, _ in wins]
        used = [0] * len(wins)
        before = 0
        for r in runs:
            # split the interval over the windows it overlaps
            i = bisect.bisect_right(starts, r.t_start) - 1
            t0 = r.t_start
            if i < 0:
                first = starts[0] if starts else horizon
                pre = min(r.t_end, first) - t0
                before += pre
                t0 += pre
                i = 0
            while t0 < r.t_end and i < len(wins):
                seg = min(r.t_end, wins[i][1]) - t0
                used[i] += seg
                t0 += seg
                i += 1
        if before:
            rep.add(0, sid, f"{before} tick(s) charged before the first recharge")
        for (a, b), u in zip(wins, used):
            if u > Q:
                rep.add(a, sid, f"window [{a},{b}) charged {u} > Q={Q}")
    return rep


def check_rules(trace: Trace, taskset: TaskSet) -> Report:
    """Source eligibility (residual/own/stolen), residual lifetime, one consumer
    per capacity and one unit per worker at every instant."""
    rep = Report("rules")
    tasks = {t.task_id: t for t in taskset}
    timeline = DeadlineTimeline(trace)
    arrivals: dict[int, list[int]] = defaultdict(list)
    completes: dict[int, list[int]] = defaultdict(list)
    for r in trace.records:
        if r.kind == "ARRIVAL":
            arrivals[r.server].append(r.t_start)
        elif r.kind == "COMPLETE":
            completes[r.server].append(r.t_start)

    def pending(sid, t):
        return bisect.bisect_right(arrivals[sid], t) - bisect.bisect_right(completes[sid], t)

    runs = _runs(trace)
    for r in runs:
        t = r.t_start
        d_own = timeline.at(r.server, t)
        if r.source_kind == "Own":
            if r.source_server != r.server:
                rep.add(t, r.server, f"Own charge on foreign server: {r.line()}")
            if r.deadline != d_own:
                rep.add(t, r.server, f"Own charge with deadline {r.deadline} != {d_own}")
        elif r.source_kind == "Residual":
            d_src = timeline.at(r.source_server, t)
            if r.deadline != d_src:
                rep.add(t, r.server, f"residual deadline {r.deadline} != source's {d_src}")
            if d_src < d_own:
                rep.add(t, r.server, f"residual of S{r.source_server} (d={d_src}) reclaimed by "
                                     f"earlier-deadline consumer (d={d_own})")
            if r.t_end > d_src:
                rep.add(t, r.server, f"residual of S{r.source_server} used past its deadline {d_src}")
        elif r.source_kind == "Stolen":
            d_src = timeline.at(r.source_server, t)
            if tasks[r.source_server].isolated:
                rep.add(t, r.source_server, "capacity stolen from an isolated server")
            if d_src > d_own:
                rep.add(t, r.server, f"stole from S{r.source_server} with later deadline "
                                     f"{d_src} > {d_own}")
            if r.deadline != d_own:
                rep.add(t, r.server, f"stolen capacity run with deadline {r.deadline} != {d_own}")
            if pending(r.source_server, t):
                rep.add(t, r.source_server, "capacity stolen from a server with pending work")
        else:
            rep.add(t, r.server, f"unknown source kind {r.source_kind!r}")

    # one unit per worker, one consumer per capacity
    for key_fn, label in ((lambda r: r.worker, "worker"),
                          (lambda r: (r.source_kind == "Residual", r.source_server), "capacity")):
        groups = defaultdict(list)
        for r in runs:
            groups[key_fn(r)].append(r)
        for key, seq in groups.items():
            seq.sort(key=lambda r: r.t_start)
            for a, b in zip(seq, seq[1:]):
                if b.t_start < a.t_end:
                    rep.add(b.t_start, b.server, f"{label} {key} used twice: {a.unit} and {b.unit}")
    return rep


def _instants(trace: Trace):
    """Group WAIT records per instant together with the RUN records live then."""
    waits = defaultdict(list)
    for r in trace.records:
        if r.kind == "WAIT":
            waits[r.t_start].append(r)
    runs = sorted(_runs(trace), key=lambda r: r.t_start)
    starts = [r.t_start for r in runs]
    for t in sorted(waits):
        hi = bisect.bisect_right(starts, t)
        live = [r for r in runs[:hi] if r.t_end > t]
        yield t, waits[t], live


def check_edf(trace: Trace) -> Report:
    """Global EDF and work conservation at every decision instant.

    A waiting unit may only sit behind a later effective deadline if the worker
    running that later unit could not legally take it (owner taking its own
    deque top, or stealing disabled).  No worker may idle while a waiting unit
    is reachable by it.
    """
    rep = Report("edf")
    m = trace.m
    steal = trace.meta.get("steal", "deadline-compare")
    for t, waits, live in _instants(trace):
        main_waiting = any(w.worker is None for w in waits)
        steal_ok = steal == "deadline-compare" or (steal == "queue-empty-only" and not main_waiting)
        busy = {r.worker: r for r in live}
        for v in waits:
            for w in range(1, m + 1):
                reach = v.worker is None or (v.worker != w and steal_ok)
                if not reach:
                    continue
                r = busy.get(w)
                if r is None:
                    rep.add(t, v.server, f"worker {w} idle while {v.unit} waits")
                elif r.deadline > v.deadline:
                    rep.add(t, v.server, f"{v.unit} (d={v.deadline}) waits while worker {w} runs "
                                         f"{r.unit} (d={r.deadline})")
    return rep


def check_work_conservation(trace: Trace) -> Report:
    rep = check_edf(trace)
    out = Report("work-conservation")
    out.violations = [v for v in rep.violations if "idle" in v.what]
    return out


def check_deques(trace: Trace) -> Report:
    """Replay every deque: owners pop the bottom, thieves take a top, pjobs and
    jobs never swap structures."""
    rep = Report("deques")
    dq: dict[int, deque] = defaultdict(deque)
    for r in trace.records:
        k = r.kind
        if k in ("SPAWN", "REQUEUE", "LOCAL", "STEAL") and not (r.unit or "").startswith("P"):
            rep.add(r.t_start, r.server, f"{k} of non-pjob {r.unit}")
            continue
        if k == "DISPATCH" and not (r.unit or "").startswith("J"):
            rep.add(r.t_start, r.server, f"pjob {r.unit} dispatched from the global queue")
        elif k in ("SPAWN", "REQUEUE"):
            dq[r.worker].append(r.unit)
        elif k == "LOCAL":
            d = dq[r.worker]
            if d and d[-1] == r.unit:
                d.pop()
            else:
                rep.add(r.t_start, r.server, f"worker {r.worker} took {r.unit}, not its bottom")
                if r.unit in d:
                    d.remove(r.unit)
        elif k == "STEAL":
            for owner, d in dq.items():
                if owner != r.worker and d and d[0] == r.unit:
                    d.popleft()
                    break
            else:
                rep.add(r.t_start, r.server, f"worker {r.worker} stole {r.unit}, not a foreign top")
                for d in dq.values():
                    if r.unit in d:
                        d.remove(r.unit)
    return rep


def check_monotone(trace: Trace) -> Report:
    rep = Report("monotone")
    last = 0
    for r in trace.records:
        if r.t_end < last:
            rep.add(r.t_end, r.server, f"record out of order: {r.line()}")
        last = max(last, r.t_end)
    return rep


def check_all(trace: Trace, taskset: TaskSet) -> list[Report]:
    return [check_isolation(trace, taskset), check_rules(trace, taskset), check_edf(trace),
            check_deques(trace), check_monotone(trace)]
