"""Domain types shared by the simulator: tasks, jobs, pjobs, servers, workers.

Time is an integer tick count.  Utilizations are exact ``Fraction`` values so
budget accounting can be compared with equality.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union


class SpecError(ValueError):
    """A task description or parameter violates a model invariant."""


class SimulationError(RuntimeError):
    """Internal invariant broken while simulating (over-charge, stale event...)."""


def utilization(Q: int, T: int) -> Fraction:
    if T <= 0 or Q <= 0 or Q > T:
        raise SpecError(f"need 0 < Q <= T, got Q={Q} T={T}")
    return Fraction(Q, T)


# --------------------------------------------------------------------------
# static description


@dataclass(frozen=True)
class Segment:
    """Run ``cost`` ticks sequentially, then spawn one pjob per entry of ``spawn``."""

    cost: int
    spawn: tuple[int, ...] = ()


def template_problems(segments, where: str = "template") -> list[str]:
    out = []
    if not segments:
        out.append(f"{where}: needs at least one segment")
    total = 0
    for i, seg in enumerate(segments):
        if not isinstance(seg.cost, int) or isinstance(seg.cost, bool) or seg.cost < 0:
            out.append(f"{where}.segments[{i}].cost must be an integer >= 0")
        else:
            total += seg.cost
        for k, p in enumerate(seg.spawn):
            if not isinstance(p, int) or isinstance(p, bool) or p <= 0:
                out.append(f"{where}.segments[{i}].spawn[{k}] must be an integer > 0")
            else:
                total += p
    if not out and total == 0:
        out.append(f"{where}: total cost must be positive")
    return out


@dataclass(frozen=True)
class JobTemplate:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise SpecError("; ".join(errors))

    def problems(self, where: str = "template") -> list[str]:
        return template_problems(self.segments, where)

    @property
    def total_cost(self) -> int:
        return sum(s.cost + sum(s.spawn) for s in self.segments)

    @property
    def sequential_cost(self) -> int:
        return sum(s.cost for s in self.segments)

    @property
    def n_pjobs(self) -> int:
        return sum(len(s.spawn) for s in self.segments)

    def truncated(self, budget: int) -> "JobTemplate":
        """Keep the first ``budget`` ticks of work in program order.

        Sequential costs and pjob costs are consumed in the order they would be
        created; whatever crosses the budget is shortened and the rest dropped.
        """
        if budget >= self.total_cost:
            return self
        if budget <= 0:
            raise SpecError("truncation budget must be positive")
        left = budget
        segs = []
        for seg in self.segments:
            cost = min(seg.cost, left)
            left -= cost
            spawn = []
            for p in seg.spawn:
                if left == 0:
                    break
                take = min(p, left)
                spawn.append(take)
                left -= take
            segs.append(Segment(cost, tuple(spawn)))
            if left == 0:
                break
        return JobTemplate(tuple(segs))


@dataclass(frozen=True)
class ArrivalModel:
    kind: str = "periodic"  # "periodic" | "sporadic"
    min_gap: Optional[int] = None  # defaults to the server period
    offset: int = 0  # first arrival

    def problems(self, where: str) -> list[str]:
        out = []
        if self.kind not in ("periodic", "sporadic"):
            out.append(f"{where}.arrival.kind must be 'periodic' or 'sporadic', got {self.kind!r}")
        if self.min_gap is not None and (not isinstance(self.min_gap, int) or self.min_gap <= 0):
            out.append(f"{where}.arrival.min_gap must be a positive integer")
        if not isinstance(self.offset, int) or isinstance(self.offset, bool) or self.offset < 0:
            out.append(f"{where}.arrival.offset must be an integer >= 0")
        return out


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    Q: int
    T: int
    isolated: bool = True
    arrival: ArrivalModel = field(default_factory=ArrivalModel)
    body: JobTemplate = None

    def __post_init__(self):
        if self.body is None:
            object.__setattr__(self, "body", JobTemplate((Segment(self.Q),)))
        errors = self.problems()
        if errors:
            raise SpecError("; ".join(errors))

    def problems(self) -> list[str]:
        where = f"task {self.task_id}"
        out = []
        if not isinstance(self.task_id, int) or isinstance(self.task_id, bool):
            out.append(f"{where}: id must be an integer")
        if not isinstance(self.Q, int) or not isinstance(self.T, int):
            out.append(f"{where}: Q and T must be integers")
        elif not 0 < self.Q <= self.T:
            out.append(f"{where}: need 0 < Q <= T (Q={self.Q}, T={self.T})")
        out += self.arrival.problems(where)
        return out

    @property
    def U(self) -> Fraction:
        return utilization(self.Q, self.T)

    @property
    def min_gap(self) -> int:
        return self.arrival.min_gap or self.T


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple[TaskSpec, ...]
    # utilization split a generator aimed for; server Q/T only approximates it
    target_utilizations: Optional[tuple[Fraction, ...]] = None

    def __post_init__(self):
        ids = [t.task_id for t in self.tasks]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise SpecError(f"duplicate task ids: {dup}")
        object.__setattr__(self, "tasks", tuple(sorted(self.tasks, key=lambda t: t.task_id)))

    def __len__(self):
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    @property
    def total_utilization(self) -> Fraction:
        return sum((t.U for t in self.tasks), Fraction(0))

    @property
    def max_utilization(self) -> Fraction:
        return max((t.U for t in self.tasks), default=Fraction(0))

    def by_id(self, task_id: int) -> TaskSpec:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)


# --------------------------------------------------------------------------
# dynamic state


class Job:
    """One released job of a task.  The sequential part is the job's *main* unit."""

    __slots__ = (
        "task_id", "index", "arrival", "release", "deadline", "template", "seg_idx",
        "seg_left", "executed", "remaining", "pending_pjobs", "spawned", "finish",
        "main_done", "uid",
    )

    def __init__(self, task_id: int, index: int, arrival: int, template: JobTemplate, period: int):
        self.task_id = task_id
        self.index = index
        self.arrival = arrival
        self.release = arrival
        self.deadline = arrival + period
        self.template = template
        self.seg_idx = 0
        self.seg_left = template.segments[0].cost
        self.executed = 0
        self.remaining = template.total_cost
        self.pending_pjobs = 0
        self.spawned = 0
        self.finish: Optional[int] = None
        self.main_done = False
        self.uid = f"J{task_id}.{index}"

    @property
    def finished(self) -> bool:
        return self.finish is not None

    def __repr__(self):
        return f"<{self.uid} rem={self.remaining} pj={self.pending_pjobs}>"


class PJob:
    __slots__ = ("job", "k", "cost", "remaining", "spawn_time", "origin", "uid")

    def __init__(self, job: Job, k: int, cost: int, spawn_time: int, origin: int):
        self.job = job
        self.k = k
        self.cost = cost
        self.remaining = cost
        self.spawn_time = spawn_time
        self.origin = origin  # worker whose deque received it
        self.uid = f"P{job.task_id}.{job.index}.{k}"

    @property
    def task_id(self) -> int:
        return self.job.task_id

    def __repr__(self):
        return f"<{self.uid} rem={self.remaining}>"


Unit = Union[Job, PJob]


class SourceKind(str, enum.Enum):
    OWN = "Own"
    RESIDUAL = "Residual"
    STOLEN = "Stolen"


class ServerState:
    """p-CSS server of one task.

    ``r > 0`` implies ``c == 0``: residual is only ever produced by moving the
    whole remaining capacity out of ``c``.
    """

    __slots__ = ("task_id", "Q", "T", "U", "d", "c", "r", "isolated", "jobs", "links")

    def __init__(self, task: TaskSpec, phantom: bool = True):
        self.task_id = task.task_id
        self.Q = task.Q
        self.T = task.T
        self.U = task.U
        self.isolated = task.isolated
        self.r = 0
        if phantom and not task.isolated:
            # unused reservation of an idle best-effort server is stealable
            self.d, self.c = task.T, task.Q
        else:
            self.d, self.c = 0, 0
        self.jobs: deque[Job] = deque()  # released, unfinished, FIFO
        self.links: list[CapacitySource] = []

    @property
    def h(self) -> int:
        return self.d

    @property
    def pending(self) -> bool:
        return bool(self.jobs)

    @property
    def active(self) -> bool:
        return bool(self.jobs) or self.r > 0

    def check(self):
        if not (0 <= self.c <= self.Q) or self.r < 0 or (self.r > 0 and self.c != 0):
            raise SimulationError(
                f"server {self.task_id} invariant broken: c={self.c} r={self.r} Q={self.Q}"
            )

    def __repr__(self):
        return f"<S{self.task_id} d={self.d} c={self.c} r={self.r} jobs={len(self.jobs)}>"


def has_pending_work(server: ServerState, t: int) -> bool:
    """True iff a served job with release <= t is unfinished (pjobs included)."""
    return any(j.release <= t and j.finish is None for j in server.jobs)


class CapacitySource:
    __slots__ = ("kind", "server", "deadline")

    def __init__(self, kind: SourceKind, server: ServerState, deadline: int):
        self.kind = kind
        self.server = server
        self.deadline = deadline

    @property
    def amount(self) -> int:
        return self.server.r if self.kind is SourceKind.RESIDUAL else self.server.c

    @property
    def key(self) -> tuple[bool, int]:
        # own/stolen draw on c, residual on r: at most one consumer per key
        return (self.kind is SourceKind.RESIDUAL, self.server.task_id)

    def __eq__(self, other):
        return (
            isinstance(other, CapacitySource)
            and self.kind is other.kind
            and self.server is other.server
            and self.deadline == other.deadline
        )

    def __hash__(self):
        return hash((self.kind, self.server.task_id, self.deadline))

    def __repr__(self):
        return f"{self.kind.value}(S{self.server.task_id}, d={self.deadline})"


class WorkerState:
    __slots__ = ("wid", "current", "source", "deque")

    def __init__(self, wid: int):
        self.wid = wid
        self.current: Optional[Unit] = None
        self.source: Optional[CapacitySource] = None
        # left end = top (thieves), right end = bottom (owner)
        self.deque: deque[PJob] = deque()

    @property
    def idle(self) -> bool:
        return self.current is None

    def __repr__(self):
        return f"<W{self.wid} run={self.current} deque={list(self.deque)}>"
