"""Naive tick-by-tick reference schedulers for one processor and sequential jobs.

They share nothing with the event-driven engine except the workload inputs
(arrival instants and per-job demand), and exist to cross-check it.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

from ..model import SpecError, TaskSet
from ..trace import Record, Trace
from ..workload import arrivals, job_body

_EXEC = (Fraction(1, 2), Fraction(1))


class _Srv:
    def __init__(self, task, phantom):
        self.tid, self.Q, self.T, self.iso = task.task_id, task.Q, task.T, task.isolated
        self.r = 0
        if phantom and not task.isolated:
            self.d, self.c = task.T, task.Q
        else:
            self.d, self.c = 0, 0
        self.jobs: list[list] = []  # [uid, remaining]


def _releases(taskset, horizon, seed, exec_range, jitter):
    table = defaultdict(list)
    for task in taskset:
        for j, a in enumerate(arrivals(task, horizon, seed, jitter)):
            body = job_body(task, j, seed, exec_range)
            if body.n_pjobs:
                raise SpecError(f"task {task.task_id}: the reference schedulers only handle sequential jobs")
            table[a].append((task.task_id, f"J{task.task_id}.{j}", body.total_cost))
    return table


def _admit(s, uid, cost, t):
    s.jobs.append([uid, cost])
    if len(s.jobs) > 1:
        return
    if s.r:
        s.c, s.r = s.r, 0
    if t >= s.d or s.c * s.T >= (s.d - t) * s.Q:
        s.d, s.c = t + s.T, s.Q


def _pick(s, servers, claimed, t, share):
    """Residual, then own, then stolen; (kind, lender, effective deadline)."""
    if share:
        res = [x for x in servers if x is not s and x.r > 0 and t < x.d and x.d >= s.d
               and (True, x.tid) not in claimed]
        if res:
            x = min(res, key=lambda x: (x.d, x.tid))
            return ("Residual", x, x.d)
    if s.c > 0 and (False, s.tid) not in claimed:
        return ("Own", s, s.d)
    if share:
        vic = [x for x in servers if x is not s and not x.iso and not x.jobs and x.r == 0
               and x.c > 0 and x.d <= s.d and (False, x.tid) not in claimed]
        if vic:
            x = min(vic, key=lambda x: (x.d, x.tid))
            return ("Stolen", x, s.d)
    return None


def _keep(s, link, t):
    kind, x = link
    if kind == "Own":
        return ("Own", s, s.d) if s.c > 0 else None
    if kind == "Residual":
        return ("Residual", x, x.d) if x.r > 0 and t < x.d and x.d >= s.d else None
    if not x.iso and not x.jobs and x.r == 0 and x.c > 0 and x.d <= s.d:
        return ("Stolen", x, s.d)
    return None


def _merge(ticks):
    out = []
    for rec in ticks:
        if out:
            last = out[-1]
            if last.t_end == rec.t_start and last[2:] == rec[2:]:
                out[-1] = last._replace(t_end=rec.t_end)
                continue
        out.append(rec)
    return out


def _simulate(taskset, horizon, seed, exec_range, jitter, share, policy):
    servers = [_Srv(t, share) for t in taskset]
    table = _releases(taskset, horizon, seed, exec_range, jitter)
    ticks, events = [], []
    prev = None
    link = None
    done = None
    for t in range(horizon):
        if done is not None:
            s = done
            events.append(Record(t, t, None, "COMPLETE", s.jobs[0][0], s.tid, None, None, s.d))
            s.jobs.pop(0)
            if share and not s.jobs and s.c > 0 and t < s.d:
                s.r, s.c = s.c, 0
            done = None
        for s in servers:
            if s.d != t:
                continue
            if s.jobs:
                s.c, s.d, s.r = s.Q, s.d + s.T, 0
            else:
                s.r = 0
                if share and not s.iso:
                    s.c, s.d = s.Q, s.d + s.T
        for tid, uid, cost in sorted(table.get(t, ())):
            _admit(servers[[x.tid for x in servers].index(tid)], uid, cost, t)

        claimed = set()
        offers = {}
        order = sorted((x for x in servers if x.jobs), key=lambda x: (x.d, x.tid))
        cur = next((x for x in order if x.tid == prev), None)
        if cur is not None:
            # the running job keeps its link while it stays valid
            src = _keep(cur, link, t)
            if src is None:
                src = _pick(cur, servers, claimed, t, share)
            if src is not None:
                claimed.add((src[0] == "Residual", src[1].tid))
                offers[cur.tid] = (src[2], cur.tid, cur, src)
        for s in order:
            if s is cur:
                continue
            src = _pick(s, servers, claimed, t, share)
            if src is not None:
                claimed.add((src[0] == "Residual", src[1].tid))
                offers[s.tid] = (src[2], s.tid, s, src)
        if not offers:
            prev = None
            continue
        best = min(offers.values(), key=lambda o: o[:2])
        if prev in offers and offers[prev][0] <= best[0]:
            best = offers[prev]  # ties never preempt
        _, tid, s, (kind, donor, eff) = best
        link = (kind, donor)
        if kind == "Residual":
            donor.r -= 1
        else:
            donor.c -= 1
        s.jobs[0][1] -= 1
        ticks.append(Record(t, t + 1, 1, "RUN", s.jobs[0][0], tid, kind, donor.tid, eff))
        prev = tid
        if s.jobs[0][1] == 0:
            done, prev = s, None

    if done is not None:
        events.append(Record(horizon, horizon, None, "COMPLETE", done.jobs[0][0], done.tid,
                             None, None, done.d))

    from ..engine import taskset_fingerprint
    meta = {"m": 1, "horizon": horizon, "seed": seed, "policy": policy, "oracle": "tick"}
    meta["taskset"] = taskset_fingerprint(taskset)
    recs = sorted(_merge(ticks) + events, key=lambda r: (r.t_end, r.kind != "COMPLETE"))
    return Trace(meta, recs)


def oracle_cbs_uniproc(taskset: TaskSet, horizon: int, seed: int = 0,
                       exec_range=_EXEC, jitter=Fraction(1, 2)) -> Trace:
    """Plain hard CBS servers under EDF, one tick at a time."""
    return _simulate(taskset, horizon, seed, exec_range, jitter, False, "cbs")


def oracle_css_uniproc(taskset: TaskSet, horizon: int, seed: int = 0,
                       exec_range=_EXEC, jitter=Fraction(1, 2)) -> Trace:
    """CBS plus residual release/reclaim and stealing from idle best-effort servers."""
    return _simulate(taskset, horizon, seed, exec_range, jitter, True, "css")


def schedule_projection(trace: Trace) -> str:
    """Canonical text of who ran when on what capacity, plus completion instants.

    Adjacent identical RUN intervals are merged, so traces that only differ in
    how often the scheduler woke up project to the same text.
    """
    runs = sorted((r for r in trace.records if r.kind == "RUN"), key=lambda r: (r.worker, r.t_start))
    merged = []
    for w in sorted({r.worker for r in runs}):
        merged += _merge([r for r in runs if r.worker == w])
    rows = merged + [r for r in trace.records if r.kind == "COMPLETE"]
    rows.sort(key=lambda r: (r.t_start, r.kind, r.worker or 0, r.unit or ""))
    return "".join(r.line() + "\n" for r in rows)
