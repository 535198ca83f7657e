from fractions import Fraction

import pytest

from pcss import (
    ArrivalModel, GenParams, JobTemplate, Segment, SimConfig, Simulation, TaskSet, TaskSpec,
    generate, run,
)
from pcss.engine import Event, EventKind, next_exhaustion_time
from pcss.model import (
    CapacitySource, Job, PJob, ServerState, SimulationError, SourceKind, SpecError, WorkerState,
)

FULL = (Fraction(1), Fraction(1))


def kinds(trace, *which):
    return [(r.t_start, r.kind, r.unit) for r in trace if r.kind in which]


def test_single_task_runs_once_and_completes_at_horizon():
    ts = TaskSet((TaskSpec(1, 10, 10),))
    trace = run(ts, SimConfig(m=1, horizon=10, exec_range=FULL))
    assert kinds(trace, "DISPATCH", "COMPLETE") == [(0, "DISPATCH", "J1.0"), (10, "COMPLETE", "J1.0")]
    assert [(r.t_start, r.t_end) for r in trace.of_kind("RUN")] == [(0, 10)]


def test_empty_task_set_gives_empty_trace():
    trace = run(TaskSet(()), SimConfig(m=2, horizon=50))
    assert len(trace) == 0
    assert trace.horizon == 50


def test_pjobs_spread_over_workers():
    body = JobTemplate((Segment(1, (2, 2)), Segment(1)))
    ts = TaskSet((TaskSpec(1, 6, 20, body=body), TaskSpec(2, 4, 20, isolated=False,
                                                          arrival=ArrivalModel(offset=10**6))))
    trace = run(ts, SimConfig(m=2, horizon=20, exec_range=FULL))
    # the main unit keeps running its second segment while W2 steals on the
    # idle best-effort server's capacity
    assert kinds(trace, "SPAWN", "LOCAL", "STEAL", "END", "COMPLETE") == [
        (1, "SPAWN", "P1.0.0"), (1, "SPAWN", "P1.0.1"), (1, "STEAL", "P1.0.0"),
        (2, "END", "J1.0"), (2, "LOCAL", "P1.0.1"), (3, "END", "P1.0.0"),
        (4, "END", "P1.0.1"), (4, "COMPLETE", "J1.0"),
    ]
    steal = trace.of_kind("STEAL")[0]
    assert (steal.source_kind, steal.source_server, steal.deadline) == ("Stolen", 2, 20)


def test_residual_expires_and_server_deactivates():
    ts = TaskSet((TaskSpec(1, 4, 10, body=JobTemplate((Segment(2),))),))
    trace = run(ts, SimConfig(m=1, horizon=15, exec_range=FULL))
    assert kinds(trace, "RELEASE", "EXPIRE", "DEACTIVATE") == [
        (2, "RELEASE", None), (10, "EXPIRE", None), (10, "DEACTIVATE", None), (12, "RELEASE", None),
    ]


def test_overrun_exhausts_and_waits_for_the_deadline():
    body = JobTemplate((Segment(3),))  # demand above Q
    ts = TaskSet((TaskSpec(1, 2, 10, body=body, arrival=ArrivalModel("sporadic", 50)),))
    trace = run(ts, SimConfig(m=1, horizon=30, exec_range=FULL, jitter=Fraction(0)))
    assert kinds(trace, "EXHAUST", "COMPLETE") == [(2, "EXHAUST", "J1.0"), (11, "COMPLETE", "J1.0")]
    assert [(r.t_start, r.t_end) for r in trace.of_kind("RUN")] == [(0, 2), (10, 11)]


def test_determinism_and_seed_sensitivity():
    ts = generate(GenParams(5, Fraction(3, 2), 2, (0, 3), 4, (5, 20)))
    a = run(ts, SimConfig(m=2, horizon=2000, seed=1))
    assert a.dumps() == run(ts, SimConfig(m=2, horizon=2000, seed=1)).dumps()
    assert a.dumps() != run(ts, SimConfig(m=2, horizon=2000, seed=2)).dumps()
    assert a.meta["taskset"] == run(ts, SimConfig(m=2, horizon=10, seed=2)).meta["taskset"]


def test_event_order_settles_capacity_before_admission():
    order = sorted([Event(5, EventKind.ARRIVAL, 1), Event(5, EventKind.REPLENISH, 2),
                    Event(5, EventKind.COMPLETION, 3), Event(4, EventKind.ARRIVAL, 9)])
    assert [e.kind for e in order] == [EventKind.ARRIVAL, EventKind.COMPLETION,
                                      EventKind.REPLENISH, EventKind.ARRIVAL]


def _worker(wid, unit, amount):
    w = WorkerState(wid)
    s = ServerState(TaskSpec(1, 10, 10), phantom=False)
    s.c = amount
    w.current, w.source = unit, CapacitySource(SourceKind.OWN, s, 10)
    return w


def test_next_exhaustion_time():
    job = Job(1, 0, 0, JobTemplate((Segment(4, (2,)),)), 10)
    job.seg_left = 4
    assert next_exhaustion_time([_worker(1, job, 10)], 3, 100) == 7   # spawn point
    assert next_exhaustion_time([_worker(1, job, 2)], 3, 100) == 5    # capacity runs out
    assert next_exhaustion_time([_worker(1, job, 10)], 3, 6) == 6     # bounded
    p = PJob(job, 0, 3, 0, 1)
    assert next_exhaustion_time([_worker(1, job, 10), _worker(2, p, 10), WorkerState(3)], 0, 100) == 3
    assert next_exhaustion_time([WorkerState(1)], 0, 42) == 42


@pytest.mark.parametrize("cfg", [
    SimConfig(m=0), SimConfig(horizon=0), SimConfig(policy="gedf"),
    SimConfig(m=4, policy="cbs"), SimConfig(m=2, policy="css"), SimConfig(steal="sometimes"),
])
def test_config_validation(cfg):
    with pytest.raises(SpecError):
        Simulation(TaskSet(()), cfg)


def test_simulation_error_carries_trace_prefix(monkeypatch):
    ts = TaskSet((TaskSpec(1, 2, 5),))
    sim = Simulation(ts, SimConfig(m=1, horizon=100, exec_range=FULL))

    def broken():
        if sim.t >= 20:
            raise SimulationError("boom")
    monkeypatch.setattr(sim, "_check", broken)
    with pytest.raises(SimulationError) as e:
        sim.run()
    prefix = e.value.trace
    assert len(prefix) > 0
    assert max(r.t_start for r in prefix) <= 20
