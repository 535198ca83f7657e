"""Server lifecycle: CBS deadline/budget handling plus capacity release,
reclaiming, consumption and stealing.

All functions mutate the ``ServerState`` they receive; the engine is the
only caller and serializes every call.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .model import CapacitySource, Job, ServerState, SimulationError, SourceKind

#: policies understood by this module
POLICIES = ("cbs", "css", "pcss")


def sharing(policy: str) -> bool:
    """Residual release/reclaim and stealing are off for the plain CBS baseline."""
    return policy != "cbs"


def on_job_arrival(server: ServerState, job: Job, t: int) -> bool:
    """Admit ``job``; return True when a fresh reservation (d, c) was issued."""
    busy = bool(server.jobs)
    server.jobs.append(job)
    if busy:
        return False
    if server.r:
        # the server's own leftover comes back before the admission test
        server.c, server.r = server.r, 0
    # c >= (d - t) * Q / T, kept in integers
    if t >= server.d or server.c * server.T >= (server.d - t) * server.Q:
        server.d = t + server.T
        server.c = server.Q
        return True
    return False


def on_job_completion(server: ServerState, t: int, policy: str = "pcss") -> int:
    """Retire the head job.  Returns the residual released (0 if none)."""
    server.jobs.popleft()
    if server.jobs or server.c == 0 or not sharing(policy):
        return 0
    if t >= server.d:
        return 0
    server.r, server.c = server.c, 0
    return server.r


def reclaim_set(servers: Iterable[ServerState], consumer: ServerState, t: int,
                claimed: Optional[set] = None) -> list[ServerState]:
    """Servers whose residual ``consumer`` may reclaim, earliest deadline first."""
    out = [
        s for s in servers
        if s.r > 0 and t < s.d and s.d >= consumer.d and s is not consumer
        and (claimed is None or (True, s.task_id) not in claimed)
    ]
    out.sort(key=lambda s: (s.d, s.task_id))
    return out


def steal_set(servers: Iterable[ServerState], consumer: ServerState, t: int,
              claimed: Optional[set] = None) -> list[ServerState]:
    """Inactive non-isolated servers whose capacity ``consumer`` may steal."""
    out = [
        s for s in servers
        if not s.isolated and not s.active and s.c > 0 and s.d <= consumer.d
        and s is not consumer
        and (claimed is None or (False, s.task_id) not in claimed)
    ]
    out.sort(key=lambda s: (s.d, s.task_id))
    return out


def select_capacity_source(server: ServerState, t: int, servers: Iterable[ServerState],
                           claimed: Optional[set] = None,
                           policy: str = "pcss") -> Optional[CapacitySource]:
    """Residual first, then own capacity, then stolen capacity.

    ``claimed`` holds keys of capacities already bound to another running or
    offered unit at this instant; each capacity feeds at most one unit.
    """
    share = sharing(policy)
    if share:
        best = None
        for s in servers:
            if (s.r > 0 and t < s.d and s.d >= server.d and s is not server
                    and (claimed is None or (True, s.task_id) not in claimed)):
                if best is None or (s.d, s.task_id) < (best.d, best.task_id):
                    best = s
        if best is not None:
            return CapacitySource(SourceKind.RESIDUAL, best, best.d)
    if server.c > 0 and (claimed is None or (False, server.task_id) not in claimed):
        return CapacitySource(SourceKind.OWN, server, server.d)
    if share:
        best = None
        for s in servers:
            if (not s.isolated and s.c > 0 and s.d <= server.d and not s.jobs and s.r == 0
                    and s is not server
                    and (claimed is None or (False, s.task_id) not in claimed)):
                if best is None or (s.d, s.task_id) < (best.d, best.task_id):
                    best = s
        if best is not None:
            return CapacitySource(SourceKind.STOLEN, best, server.d)
    return None


def keep_source(server: ServerState, source: CapacitySource, t: int,
                policy: str = "pcss") -> Optional[CapacitySource]:
    """The running unit's link, refreshed, or None once it must re-select.

    A link is kept while its capacity lasts and it stays eligible; a cheaper
    or earlier source appearing meanwhile does not cause a switch.
    """
    s = source.server
    if source.kind is SourceKind.OWN:
        return CapacitySource(SourceKind.OWN, server, server.d) if server.c > 0 else None
    if not sharing(policy):
        return None
    if source.kind is SourceKind.RESIDUAL:
        if s.r > 0 and t < s.d and s.d >= server.d:
            return CapacitySource(SourceKind.RESIDUAL, s, s.d)
        return None
    if not s.isolated and not s.jobs and s.r == 0 and s.c > 0 and s.d <= server.d:
        return CapacitySource(SourceKind.STOLEN, s, server.d)
    return None


def charge(source: CapacitySource, delta: int, t: int) -> int:
    """Consume ``delta`` ticks from ``source``; returns what is left."""
    s = source.server
    if source.kind is SourceKind.RESIDUAL:
        if delta > s.r or t > s.d:
            raise SimulationError(f"over-charge of residual on S{s.task_id}: {delta} > {s.r} at t={t}")
        s.r -= delta
        return s.r
    if delta > s.c:
        raise SimulationError(f"over-charge of {source} by {delta} (c={s.c}) at t={t}")
    s.c -= delta
    return s.c


def on_capacity_exhausted(server: ServerState, t: int) -> bool:
    """Own capacity hit zero.  True if the server keeps waiting (deadline kept)."""
    return bool(server.jobs)


def replenish(server: ServerState, t: int) -> None:
    """Recharge at the replenishment instant; no carry-over of unused budget."""
    if t != server.h:
        raise SimulationError(f"replenish of S{server.task_id} at t={t}, h={server.h}")
    server.c = server.Q
    server.d += server.T
    server.r = 0


def deadline_event(server: ServerState, t: int, policy: str = "pcss") -> Optional[str]:
    """Handle ``t == server.d``.  Returns what happened, or None.

    ``"replenish"`` with pending work; ``"expire"`` when an unreclaimed
    residual dies; ``"phantom"`` when an idle best-effort server opens its next
    (unused, stealable) period.
    """
    if t != server.d:
        return None
    if server.jobs:
        replenish(server, t)
        return "replenish"
    what = None
    if server.r:
        server.r = 0
        what = "expire"
    if not server.isolated and sharing(policy):
        server.c = server.Q
        server.d += server.T
        return "phantom" if what is None else "expire+phantom"
    return what


def needs_deadline_event(server: ServerState, policy: str = "pcss") -> bool:
    return bool(server.jobs) or server.r > 0 or (not server.isolated and sharing(policy))
