from dataclasses import replace
from fractions import Fraction

import pytest

from pcss import GenParams, SimConfig, TaskSet, TaskSpec, generate, run
from pcss.analysis import (
    DeadlineTimeline, check_all, check_deques, check_edf, check_isolation, check_monotone,
    check_rules, check_work_conservation, gfb_sufficient_test, metrics_document, oracle_cbs_uniproc,
    oracle_css_uniproc, response_times, schedule_projection, speedup, tardiness, total_misses,
)
from pcss.model import SpecError
from pcss.trace import Trace

FULL = (Fraction(1), Fraction(1))


def synthetic(m, horizon, *rows, steal="deadline-compare"):
    """Trace from (t0, t1, worker, kind, unit, server, skind, ssrc, deadline) rows."""
    tr = Trace({"m": m, "horizon": horizon, "steal": steal})
    for row in rows:
        tr.add(*row)
    return tr


TWO = TaskSet((TaskSpec(1, 2, 10), TaskSpec(2, 3, 10, isolated=False)))


# ------------------------------------------------------------ real traces pass


@pytest.mark.parametrize("seed", range(6))
def test_engine_traces_pass_every_check(seed):
    m = (1, 2, 4)[seed % 3]
    ts = generate(GenParams(m + 2, Fraction(m * 7, 10), m, (0, 3), seed, (4, 20)))
    trace = run(ts, SimConfig(m=m, horizon=1500, seed=seed))
    for rep in check_all(trace, ts):
        assert rep.ok, str(rep)


# -------------------------------------------------------------- isolation


def test_budget_window_respected():
    tr = synthetic(1, 20, (0, 0, None, "RECHARGE", None, 1, None, None, 10),
                   (0, 2, 1, "RUN", "J1.0", 1, "Own", 1, 10))
    assert check_isolation(tr, TWO).ok


def test_q_plus_one_ticks_flagged():
    tr = synthetic(1, 20, (0, 0, None, "RECHARGE", None, 1, None, None, 10),
                   (0, 3, 1, "RUN", "J1.0", 1, "Own", 1, 10))
    rep = check_isolation(tr, TWO)
    assert [v.what for v in rep.violations] == ["window [0,20) charged 3 > Q=2"]


def test_split_interval_counts_in_both_windows():
    # windows run from one recharge to the next
    tr = synthetic(1, 30, (0, 0, None, "RECHARGE", None, 1, None, None, 10),
                   (8, 8, None, "RECHARGE", None, 1, None, None, 18),
                   (6, 11, 1, "RUN", "J1.0", 1, "Own", 1, 10))
    rep = check_isolation(tr, TWO)
    assert len(rep.violations) == 1 and "[8,30) charged 3" in rep.violations[0].what


def test_charge_before_any_recharge_flagged():
    tr = synthetic(1, 20, (0, 1, 1, "RUN", "J1.0", 1, "Own", 1, 10))
    assert not check_isolation(tr, TWO).ok


def test_isolated_steal_victim_flagged():
    tr = synthetic(1, 20, (0, 0, None, "RECHARGE", None, 1, None, None, 10),
                   (0, 0, None, "RECHARGE", None, 2, None, None, 10),
                   (0, 1, 1, "RUN", "J2.0", 2, "Stolen", 1, 10))
    assert any("steal victim" in v.what for v in check_isolation(tr, TWO).violations)
    assert any("isolated" in v.what for v in check_rules(tr, TWO).violations)


# ------------------------------------------------------------------ rules


def test_residual_for_later_consumer_flagged():
    tr = synthetic(2, 30, (0, 0, None, "RECHARGE", None, 1, None, None, 10),
                   (0, 0, None, "RECHARGE", None, 2, None, None, 20),
                   (1, 3, 1, "RUN", "J2.0", 2, "Residual", 1, 10))
    assert any("earlier-deadline consumer" in v.what for v in check_rules(tr, TWO).violations)


def test_capacity_shared_by_two_units_flagged():
    tr = synthetic(2, 30, (0, 0, None, "RECHARGE", None, 2, None, None, 10),
                   (0, 2, 1, "RUN", "J2.0", 2, "Own", 2, 10),
                   (1, 2, 2, "RUN", "P2.0.0", 2, "Own", 2, 10))
    assert any("capacity" in v.what for v in check_rules(tr, TWO).violations)


def test_steal_from_busy_server_flagged():
    tr = synthetic(2, 30, (0, 0, None, "RECHARGE", None, 1, None, None, 10),
                   (0, 0, None, "RECHARGE", None, 2, None, None, 10),
                   (0, 0, None, "ARRIVAL", "J2.0", 2, None, None, 10),
                   (0, 1, 1, "RUN", "J1.0", 1, "Stolen", 2, 10))
    assert any("pending work" in v.what for v in check_rules(tr, TWO).violations)


def test_deadline_timeline():
    tr = synthetic(1, 50, (0, 0, None, "RECHARGE", None, 1, None, None, 10),
                   (10, 10, None, "RECHARGE", None, 1, None, None, 20))
    tl = DeadlineTimeline(tr)
    assert [tl.at(1, t) for t in (0, 9, 10, 30)] == [10, 10, 20, 20]
    assert tl.windows(1, 50) == [(0, 10), (10, 50)]


# ---------------------------------------------------------------- EDF, deques


def test_earlier_waiting_unit_flagged():
    tr = synthetic(1, 20, (0, 5, 1, "RUN", "J1.0", 1, "Own", 1, 10),
                   (2, 2, None, "WAIT", "J2.0", 2, "Own", 2, 8))
    rep = check_edf(tr)
    assert len(rep.violations) == 1 and "waits while worker 1 runs J1.0" in rep.violations[0].what
    assert check_work_conservation(tr).ok


def test_idle_worker_flagged():
    tr = synthetic(2, 20, (0, 5, 1, "RUN", "J1.0", 1, "Own", 1, 10),
                   (2, 2, None, "WAIT", "J2.0", 2, "Own", 2, 12))
    assert [v.what for v in check_work_conservation(tr).violations] == [
        "worker 2 idle while J2.0 waits"]


@pytest.mark.parametrize("steal,ok", [("deadline-compare", False), ("off", True)])
def test_unreachable_pjob_not_flagged(steal, ok):
    # a pjob in W1's deque while W1 is busy: only a thief could run it
    tr = synthetic(2, 20, (0, 5, 1, "RUN", "J1.0", 1, "Own", 1, 10),
                   (2, 2, 1, "WAIT", "P1.0.0", 1, "Residual", 3, 12), steal=steal)
    assert check_edf(tr).ok is ok


def test_deque_replay():
    good = synthetic(2, 20, (1, 1, 1, "SPAWN", "P1.0.0", 1), (1, 1, 1, "SPAWN", "P1.0.1", 1),
                     (1, 1, 2, "STEAL", "P1.0.0", 1), (2, 2, 1, "LOCAL", "P1.0.1", 1))
    assert check_deques(good).ok
    bad = synthetic(2, 20, (1, 1, 1, "SPAWN", "P1.0.0", 1), (1, 1, 1, "SPAWN", "P1.0.1", 1),
                    (2, 2, 1, "LOCAL", "P1.0.0", 1))
    assert [v.what for v in check_deques(bad).violations] == ["worker 1 took P1.0.0, not its bottom"]
    own_top = synthetic(2, 20, (1, 1, 1, "SPAWN", "P1.0.0", 1), (1, 1, 1, "STEAL", "P1.0.0", 1))
    assert not check_deques(own_top).ok
    queued = synthetic(1, 20, (1, 1, 1, "DISPATCH", "P1.0.0", 1))
    assert not check_deques(queued).ok


def test_monotone():
    assert check_monotone(synthetic(1, 9, (0, 3, 1, "RUN", "J1.0", 1, "Own", 1, 5),
                                    (3, 3, 1, "END", "J1.0", 1))).ok
    assert not check_monotone(synthetic(1, 9, (3, 3, 1, "END", "J1.0", 1),
                                        (0, 2, None, "COMPLETE", "J1.0", 1))).ok


# ------------------------------------------------------------------ metrics


def test_tardiness_counts_late_and_unfinished_jobs():
    tr = synthetic(1, 25,
                   (0, 0, None, "ARRIVAL", "J1.0", 1, None, None, 10),
                   (12, 12, None, "COMPLETE", "J1.0", 1, None, None, 20),
                   (10, 10, None, "ARRIVAL", "J1.1", 1, None, None, 20),
                   (20, 20, None, "ARRIVAL", "J1.2", 1, None, None, 30))
    st = tardiness(tr)[1]
    assert (st.released, st.finished, st.misses, st.unfinished_misses) == (3, 1, 2, 1)
    assert st.job_tardiness == [2] and st.server_tardiness == [0]
    assert st.mean_response == 12
    assert total_misses(tr) == 2
    doc = metrics_document(tr, n_events=7)
    assert doc["misses"] == 2 and doc["events"] == 7 and doc["record_kinds"]["ARRIVAL"] == 3


def test_speedup_needs_same_task_set():
    a = run(TWO, SimConfig(m=1, horizon=50))
    b = run(TaskSet((TaskSpec(1, 2, 10),)), SimConfig(m=1, horizon=50))
    with pytest.raises(SpecError):
        speedup(a, b, 1)


def test_speedup_is_one_without_parallel_hardware():
    ts = generate(GenParams(3, Fraction(4, 5), 1, (1, 3), 5, (5, 20)))
    on = run(ts, SimConfig(m=1, horizon=500, seed=5))
    off = run(ts, SimConfig(m=1, horizon=500, seed=5, steal="off"))
    for t in ts:
        if response_times(on, t.task_id):
            assert speedup(on, off, t.task_id) == 1


def test_speedup_is_one_when_stealing_is_off_in_both():
    ts = generate(GenParams(4, Fraction(3, 2), 2, (1, 3), 8, (5, 20)))
    a = run(ts, SimConfig(m=2, horizon=500, seed=8, steal="off"))
    assert speedup(a, a, ts.tasks[0].task_id) == 1


@pytest.mark.parametrize("us,m,ok", [
    ((Fraction(1, 2), Fraction(1, 2)), 2, True),
    ((Fraction(1), Fraction(1, 2)), 2, False),
    ((Fraction(1, 2), Fraction(1, 2)), 1, True),
    ((Fraction(3, 5), Fraction(1, 2)), 1, False),
])
def test_gfb(us, m, ok):
    ts = TaskSet(tuple(TaskSpec(i + 1, int(u * 10), 10) for i, u in enumerate(us)))
    assert gfb_sufficient_test(ts, m) is ok


# ------------------------------------------------------------------- oracle


def test_oracle_single_task():
    ts = TaskSet((TaskSpec(1, 3, 10),))
    assert schedule_projection(oracle_cbs_uniproc(ts, 20, 0, FULL)) == (
        "0,3,1,RUN,J1.0,1,Own,1,10\n3,3,-,COMPLETE,J1.0,1,-,-,10\n"
        "10,13,1,RUN,J1.1,1,Own,1,20\n13,13,-,COMPLETE,J1.1,1,-,-,20\n")
    engine = run(ts, SimConfig(m=1, horizon=20, exec_range=FULL))
    assert schedule_projection(engine) == schedule_projection(oracle_cbs_uniproc(ts, 20, 0, FULL))


def test_overload_full_budget_can_release_residual():
    # target utilization 1, but rounding Q up makes the set overloaded
    g = generate(GenParams(6, Fraction(1), 1, (0, 0), 89, (3, 40), p_sporadic=Fraction(1)))
    ts = TaskSet(tuple(replace(t, isolated=True) for t in g))
    assert sum(g.target_utilizations) == 1 and ts.total_utilization == Fraction(169751, 120120)
    assert all(t.body.total_cost == t.Q for t in ts)
    horizon = 50 * max(t.T for t in ts)
    css = run(ts, SimConfig(m=1, horizon=horizon, seed=89, exec_range=FULL))
    cbs = run(ts, SimConfig(m=1, horizon=horizon, seed=89, exec_range=FULL, policy="cbs"))
    assert [(r.t_start, r.server) for r in css.of_kind("RELEASE")] == [(103, 6), (104, 1)]
    assert schedule_projection(cbs) == schedule_projection(oracle_cbs_uniproc(ts, horizon, 89, FULL))
    assert schedule_projection(css) == schedule_projection(oracle_css_uniproc(ts, horizon, 89, FULL))
    assert schedule_projection(css) != schedule_projection(cbs)
