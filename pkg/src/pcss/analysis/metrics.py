"""Numbers derived from a trace: tardiness, deadline misses, response times."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ..model import SpecError, TaskSet
from ..trace import Trace

METRICS_VERSION = 1


@dataclass
class TaskStats:
    task_id: int
    released: int = 0
    finished: int = 0
    # job deadline = arrival + period
    misses: int = 0
    unfinished_misses: int = 0
    job_tardiness: list[int] = field(default_factory=list)
    # tardiness against the server deadline in force at completion
    server_tardiness: list[int] = field(default_factory=list)
    responses: list[int] = field(default_factory=list)

    @staticmethod
    def _summary(xs):
        if not xs:
            return {"min": None, "mean": None, "max": None}
        return {"min": min(xs), "mean": str(Fraction(sum(xs), len(xs))), "max": max(xs)}

    def to_dict(self) -> dict:
        return {
            "task": self.task_id, "released": self.released, "finished": self.finished,
            "misses": self.misses, "unfinished_misses": self.unfinished_misses,
            "job_tardiness": self._summary(self.job_tardiness),
            "server_tardiness": self._summary(self.server_tardiness),
            "response": self._summary(self.responses),
        }

    @property
    def mean_response(self) -> Optional[Fraction]:
        if not self.responses:
            return None
        return Fraction(sum(self.responses), len(self.responses))


def tardiness(trace: Trace) -> dict[int, TaskStats]:
    """Per-task statistics.

    A job with deadline before the horizon that never completed counts as a
    miss; its tardiness is unknown and left out of the tardiness lists.
    """
    horizon = trace.horizon
    arrived = {}
    stats: dict[int, TaskStats] = {}
    for r in trace.records:
        if r.kind == "ARRIVAL":
            st = stats.setdefault(r.server, TaskStats(r.server))
            st.released += 1
            arrived[r.unit] = (r.t_start, r.deadline)
        elif r.kind == "COMPLETE":
            st = stats.setdefault(r.server, TaskStats(r.server))
            a, dl = arrived.pop(r.unit)
            st.finished += 1
            st.responses.append(r.t_start - a)
            late = max(0, r.t_start - dl)
            st.job_tardiness.append(late)
            st.misses += late > 0
            st.server_tardiness.append(max(0, r.t_start - r.deadline))
    for uid, (a, dl) in arrived.items():
        if dl < horizon:
            st = stats[int(uid[1:].split(".")[0])]
            st.misses += 1
            st.unfinished_misses += 1
    return dict(sorted(stats.items()))


def total_misses(trace: Trace) -> int:
    return sum(s.misses for s in tardiness(trace).values())


def response_times(trace: Trace, task_id: int) -> dict[str, int]:
    arrived = {}
    out = {}
    for r in trace.records:
        if r.server != task_id:
            continue
        if r.kind == "ARRIVAL":
            arrived[r.unit] = r.t_start
        elif r.kind == "COMPLETE":
            out[r.unit] = r.t_start - arrived[r.unit]
    return out


def speedup(trace_par: Trace, trace_seq: Trace, task_id: int) -> Fraction:
    """Mean response time without stealing over mean response time with it.

    Only jobs that finished in both runs are compared.
    """
    fp_a, fp_b = trace_par.meta.get("taskset"), trace_seq.meta.get("taskset")
    if fp_a != fp_b:
        raise SpecError(f"traces come from different task sets ({fp_a} vs {fp_b})")
    par, seq = response_times(trace_par, task_id), response_times(trace_seq, task_id)
    common = sorted(set(par) & set(seq))
    if not common:
        raise SpecError(f"task {task_id} has no job finished in both traces")
    return Fraction(sum(seq[u] for u in common), sum(par[u] for u in common))


def gfb_sufficient_test(taskset: TaskSet, m: int) -> bool:
    """Density bound for global EDF with implicit deadlines:
    U_sum <= m - (m - 1) * U_max."""
    if m < 1:
        raise SpecError("m must be >= 1")
    return taskset.total_utilization <= m - (m - 1) * taskset.max_utilization


def metrics_document(trace: Trace, n_events: Optional[int] = None) -> dict:
    stats = tardiness(trace)
    counts = defaultdict(int)
    for r in trace.records:
        counts[r.kind] += 1
    doc = {
        "version": METRICS_VERSION,
        "meta": dict(trace.meta),
        "records": len(trace.records),
        "record_kinds": dict(sorted(counts.items())),
        "misses": sum(s.misses for s in stats.values()),
        "tasks": [s.to_dict() for s in stats.values()],
    }
    if n_events is not None:
        doc["events"] = n_events
    return doc


def dumps_metrics(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
