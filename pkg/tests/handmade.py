"""Hand-derived uniprocessor schedules for the capacity-sharing rules.

Each fixture has one job per task (``min_gap`` far beyond the horizon) with
full-budget execution, so the schedule follows from the rules alone.  The
expected text is the canonical schedule projection: merged RUN intervals and
COMPLETE instants, ``t0,t1,worker,kind,unit,server,source,source_server,deadline``.
"""

from fractions import Fraction

from pcss import ArrivalModel, JobTemplate, Segment, SimConfig, TaskSet, TaskSpec

FULL = (Fraction(1), Fraction(1))


def task(tid, Q, T, cost, offset=0, isolated=True):
    return TaskSpec(tid, Q, T, isolated, ArrivalModel("periodic", 1000, offset),
                    JobTemplate((Segment(cost),)))


def config(horizon, policy="pcss"):
    return SimConfig(m=1, horizon=horizon, seed=0, policy=policy, exec_range=FULL)


FIXTURES = {
    # S1 finishes early and frees 2 ticks (d=12); S2 exhausted its own budget
    # and, with d=11 <= 12, reclaims them instead of waiting for t=11.
    "residual-release": (
        TaskSet((task(1, 4, 12, 2), task(2, 2, 10, 4, offset=1))), 11,
        """\
0,1,1,RUN,J1.0,1,Own,1,12
1,3,1,RUN,J2.0,2,Own,2,11
3,4,1,RUN,J1.0,1,Own,1,12
4,4,-,COMPLETE,J1.0,1,-,-,12
4,6,1,RUN,J2.0,2,Residual,1,12
6,6,-,COMPLETE,J2.0,2,-,-,11
"""),
    # S3 reclaims S1's residual, then S2's, then spends its own budget, then
    # waits for its replenishment at t=10.
    "reclaim-chaining": (
        TaskSet((task(1, 3, 12, 1), task(2, 3, 14, 1), task(3, 2, 8, 7, offset=2))), 12,
        """\
0,1,1,RUN,J1.0,1,Own,1,12
1,1,-,COMPLETE,J1.0,1,-,-,12
1,2,1,RUN,J2.0,2,Own,2,14
2,2,-,COMPLETE,J2.0,2,-,-,14
2,4,1,RUN,J3.0,3,Residual,1,12
4,6,1,RUN,J3.0,3,Residual,2,14
6,8,1,RUN,J3.0,3,Own,3,10
10,11,1,RUN,J3.0,3,Own,3,18
11,11,-,COMPLETE,J3.0,3,-,-,18
"""),
    # Hard reservation: S1 runs Q=2 ticks per period of 6 and the processor
    # idles in between; S2 ends with c=0 so nothing is released.
    "exhaustion-wait": (
        TaskSet((task(1, 2, 6, 5), task(2, 1, 10, 1, offset=3))), 20,
        """\
0,2,1,RUN,J1.0,1,Own,1,6
3,4,1,RUN,J2.0,2,Own,2,13
4,4,-,COMPLETE,J2.0,2,-,-,13
6,8,1,RUN,J1.0,1,Own,1,12
12,13,1,RUN,J1.0,1,Own,1,18
13,13,-,COMPLETE,J1.0,1,-,-,18
"""),
    # S2 and S3 are idle best-effort servers (d=10); S1 drains its own budget,
    # then S2's capacity, then S3's, all at its own deadline 10.
    "steal-chaining": (
        TaskSet((task(1, 2, 10, 6), task(2, 2, 10, 1, offset=999, isolated=False),
                 task(3, 3, 10, 1, offset=999, isolated=False))), 12,
        """\
0,2,1,RUN,J1.0,1,Own,1,10
2,4,1,RUN,J1.0,1,Stolen,2,10
4,6,1,RUN,J1.0,1,Stolen,3,10
6,6,-,COMPLETE,J1.0,1,-,-,10
"""),
    # S1 frees 5 ticks valid until t=10; S2 uses 3 of them, the other 2 die at
    # t=10 and S2 falls back to one tick per period of 3.
    "residual-expiry": (
        TaskSet((task(1, 6, 10, 1), task(2, 1, 3, 6, offset=7))), 20,
        """\
0,1,1,RUN,J1.0,1,Own,1,10
1,1,-,COMPLETE,J1.0,1,-,-,10
7,10,1,RUN,J2.0,2,Residual,1,10
10,11,1,RUN,J2.0,2,Own,2,13
13,14,1,RUN,J2.0,2,Own,2,16
16,17,1,RUN,J2.0,2,Own,2,19
17,17,-,COMPLETE,J2.0,2,-,-,19
"""),
}
