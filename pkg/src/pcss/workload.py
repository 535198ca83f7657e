"""Task-set files, seeded task-set generation, arrivals and per-job execution
demand.  Everything here is a pure function of its arguments."""

from __future__ import annotations

import functools
import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .model import (
    ArrivalModel, JobTemplate, Segment, SpecError, TaskSet, TaskSpec, template_problems,
)

FORMAT_VERSION = 1


class TaskSetError(SpecError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _rng(*parts) -> random.Random:
    return random.Random(":".join(str(p) for p in parts))


# ------------------------------------------------------------------ file format


def load_spec(text: str) -> TaskSet:
    """Parse a JSON task-set document; every offending field is reported."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise TaskSetError([f"line {e.lineno} column {e.colno}: {e.msg}"]) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("tasks"), list):
        raise TaskSetError(["top level: expected an object with a 'tasks' list"])
    version = doc.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise TaskSetError([f"version: unsupported task-set format version {version!r}"])

    problems: list[str] = []
    tasks = []
    seen: dict = {}
    for i, raw in enumerate(doc["tasks"]):
        where = f"tasks[{i}]"
        if not isinstance(raw, dict):
            problems.append(f"{where}: expected an object")
            continue
        tid = raw.get("id")
        if tid is not None:
            where = f"task {tid}"
        local = []
        for key in ("id", "Q", "T"):
            v = raw.get(key)
            if not isinstance(v, int) or isinstance(v, bool):
                local.append(f"{where}.{key}: expected an integer, got {v!r}")
        iso = raw.get("isolated", True)
        if not isinstance(iso, bool):
            local.append(f"{where}.isolated: expected true/false")
        arr = raw.get("arrival", {"kind": "periodic"})
        if not isinstance(arr, dict):
            local.append(f"{where}.arrival: expected an object")
            arr = {}
        arrival = ArrivalModel(arr.get("kind", "periodic"), arr.get("min_gap"), arr.get("offset", 0))
        local += arrival.problems(where)
        segs_raw = raw.get("segments")
        segments = []
        if segs_raw is None and isinstance(raw.get("Q"), int):
            segs_raw = [{"cost": raw["Q"]}]
        if segs_raw is None:
            pass  # default body needs a valid Q, already reported
        elif not isinstance(segs_raw, list) or not segs_raw:
            local.append(f"{where}.segments: expected a non-empty list")
        else:
            for k, seg in enumerate(segs_raw):
                if not isinstance(seg, dict):
                    local.append(f"{where}.segments[{k}]: expected an object")
                    continue
                spawn = seg.get("spawn", [])
                if not isinstance(spawn, list):
                    local.append(f"{where}.segments[{k}].spawn: expected a list")
                    spawn = []
                segments.append(Segment(seg.get("cost", 0), tuple(spawn)))
            if segments:
                local += template_problems(segments, where)
        if isinstance(tid, int):
            if tid in seen:
                local.append(f"{where}: duplicate id (also tasks[{seen[tid]}])")
            else:
                seen[tid] = i
        if not local:
            if raw["Q"] > raw["T"] or raw["Q"] <= 0:
                local.append(f"{where}: need 0 < Q <= T (Q={raw['Q']}, T={raw['T']})")
        if local:
            problems += local
            continue
        tasks.append(TaskSpec(tid, raw["Q"], raw["T"], iso, arrival, JobTemplate(tuple(segments))))
    if problems:
        raise TaskSetError(problems)
    return TaskSet(tuple(tasks))


def dump_spec(taskset: TaskSet) -> str:
    tasks = []
    for t in taskset:
        entry = {"id": t.task_id, "Q": t.Q, "T": t.T, "isolated": t.isolated,
                 "arrival": {"kind": t.arrival.kind}}
        if t.arrival.min_gap is not None:
            entry["arrival"]["min_gap"] = t.arrival.min_gap
        if t.arrival.offset:
            entry["arrival"]["offset"] = t.arrival.offset
        entry["segments"] = [{"cost": s.cost, "spawn": list(s.spawn)} for s in t.body.segments]
        tasks.append(entry)
    return json.dumps({"version": FORMAT_VERSION, "tasks": tasks}, indent=2) + "\n"


def load_spec_file(path) -> TaskSet:
    with open(path) as fh:
        return load_spec(fh.read())


# ------------------------------------------------------------------- generator


@dataclass(frozen=True)
class GenParams:
    n_tasks: int
    total_U: Fraction
    m: int = 1
    parallelism: tuple[int, int] = (0, 3)
    seed: int = 0
    period_range: tuple[int, int] = (10, 100)
    p_isolated: Fraction = Fraction(1, 2)
    p_sporadic: Fraction = Fraction(1, 2)
    max_segments: int = 2


def parse_fraction(text) -> Fraction:
    """Accept ``3/2``, ``1.5`` or ``2``."""
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise SpecError(f"not a rational number: {text!r}") from None


def _uunifast(n: int, total: float, rng: random.Random) -> list[float]:
    left = total
    out = []
    for i in range(1, n):
        nxt = left * rng.random() ** (1.0 / (n - i))
        out.append(left - nxt)
        left = nxt
    return out + [left]


def _cap(shares: list[float], total: float) -> list[float]:
    """Clip shares at 1 and hand the excess out in proportion to headroom."""
    s = [min(x, 1.0) for x in shares]
    excess = total - sum(s)
    room = sum(1.0 - x for x in s)
    if excess > 0 and room > 0:
        s = [x + excess * (1.0 - x) / room for x in s]
    return s


def _split_utilization(n: int, total: Fraction, rng: random.Random) -> list[Fraction]:
    if n == 1:
        return [total]
    for attempt in range(2000):
        raw = _uunifast(n, float(total), rng)
        if attempt >= 100:
            # dense sets (total close to n) almost never pass the discard test
            raw = _cap(raw, float(total))
        # snap to small rationals; the last share absorbs the rounding
        shares = [Fraction(x).limit_denominator(1000) for x in raw[:-1]]
        shares.append(total - sum(shares))
        if all(0 < u <= 1 for u in shares):
            return shares
    raise SpecError(f"could not split U={total} over {n} tasks with every share in (0, 1]")


def _body(Q: int, params: GenParams, rng: random.Random) -> JobTemplate:
    lo, hi = params.parallelism
    k = min(rng.randint(lo, hi), Q - 1)
    cuts = sorted(rng.sample(range(1, Q), k)) if k else []
    parts = [b - a for a, b in zip([0] + cuts, cuts + [Q])]
    head, pjobs = parts[0], parts[1:]
    if k >= 2 and params.max_segments >= 2 and rng.random() < 0.5:
        j = rng.randint(1, k - 1)
        first = rng.randint(1, head)
        return JobTemplate((Segment(first, tuple(pjobs[:j])),
                            Segment(head - first, tuple(pjobs[j:]))))
    return JobTemplate((Segment(head, tuple(pjobs)),))


def generate(params: GenParams) -> TaskSet:
    """Random task set; same params (seed included) give the same set."""
    n, U, m = params.n_tasks, Fraction(params.total_U), params.m
    if n < 1:
        raise SpecError("n_tasks must be >= 1")
    if m < 1:
        raise SpecError("m must be >= 1")
    if not 0 < U <= m:
        raise SpecError(f"need 0 < total_U <= m, got total_U={U}, m={m}")
    if U > n:
        raise SpecError(f"total_U={U} needs at least {math.ceil(U)} tasks (each U <= 1), got {n}")
    lo, hi = params.parallelism
    if not 0 <= lo <= hi:
        raise SpecError(f"bad parallelism range {params.parallelism}")
    tmin, tmax = params.period_range
    if not 1 <= tmin <= tmax:
        raise SpecError(f"bad period range {params.period_range}")

    rng = _rng("gen", params.seed)
    shares = _split_utilization(n, U, rng)
    tasks = []
    kinds = []
    for i, u in enumerate(shares):
        T = round(math.exp(rng.uniform(math.log(tmin), math.log(tmax))))
        T = min(max(T, tmin), tmax)
        Q = min(T, max(1, math.floor(u * T + Fraction(1, 2))))
        isolated = rng.random() < params.p_isolated
        kinds.append(isolated)
        sporadic = rng.random() < params.p_sporadic
        arrival = ArrivalModel("sporadic" if sporadic else "periodic")
        tasks.append([i + 1, Q, T, isolated, arrival, _body(Q, params, rng)])
    if n >= 2 and 0 < params.p_isolated < 1 and len(set(kinds)) == 1:
        tasks[-1][3] = not tasks[-1][3]
    return TaskSet(tuple(TaskSpec(*t) for t in tasks), tuple(shares))


# -------------------------------------------------------------------- arrivals


def arrivals(task: TaskSpec, horizon: int, seed: int = 0,
             jitter: Fraction = Fraction(1, 2)) -> list[int]:
    """Arrival instants in [0, horizon).

    Periodic tasks arrive every ``min_gap`` from ``offset``; sporadic ones start
    at a random point after ``offset`` and wait ``min_gap`` plus up to ``jitter * min_gap`` between jobs.
    """
    if horizon <= 0:
        raise SpecError("horizon must be positive")
    gap = task.min_gap
    if task.arrival.kind == "periodic":
        return list(range(task.arrival.offset, horizon, gap))
    rng = _rng("arrivals", seed, task.task_id)
    extra = math.floor(gap * Fraction(jitter))
    out = []
    t = task.arrival.offset + rng.randint(0, extra)
    while t < horizon:
        out.append(t)
        t += gap + rng.randint(0, extra)
    return out


@functools.lru_cache(maxsize=4096)
def _budget_range(total: int, lo: Fraction, hi: Fraction) -> tuple[int, int]:
    if not 0 < lo <= hi <= 1:
        raise SpecError(f"bad execution range ({lo}, {hi})")
    return max(1, math.ceil(lo * total)), max(1, math.ceil(hi * total))


def job_body(task: TaskSpec, index: int, seed: int = 0,
             exec_range: tuple[Fraction, Fraction] = (Fraction(1, 2), Fraction(1))) -> JobTemplate:
    """Actual work of job ``index``: a seeded share of the template, cut at the end.

    The demand is uniform over the integers in ``[ceil(lo*C), ceil(hi*C)]``
    where C is the template's total cost.
    """
    total = task.body.total_cost
    lo, hi = _budget_range(total, Fraction(exec_range[0]), Fraction(exec_range[1]))
    if lo >= total:
        return task.body
    budget = _rng("exec", seed, task.task_id, index).randint(lo, hi)
    return _truncated(task.body, budget)


@functools.lru_cache(maxsize=65536)
def _truncated(body: JobTemplate, budget: int) -> JobTemplate:
    return body.truncated(budget)
