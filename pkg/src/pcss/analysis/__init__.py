"""Trace checkers, metrics and reference schedulers."""

from .checks import (
    DeadlineTimeline, Report, Violation, check_all, check_deques, check_edf, check_isolation,
    check_monotone, check_rules, check_work_conservation,
)
from .metrics import (
    METRICS_VERSION, TaskStats, dumps_metrics, gfb_sufficient_test, metrics_document,
    response_times, speedup, tardiness, total_misses,
)
from .oracle import oracle_cbs_uniproc, oracle_css_uniproc, schedule_projection

__all__ = [
    "DeadlineTimeline", "Report", "Violation", "check_all", "check_deques", "check_edf",
    "check_isolation", "check_monotone", "check_rules", "check_work_conservation",
    "METRICS_VERSION", "TaskStats", "dumps_metrics", "gfb_sufficient_test", "metrics_document",
    "response_times", "speedup", "tardiness", "total_misses",
    "oracle_cbs_uniproc", "oracle_css_uniproc", "schedule_projection",
]
