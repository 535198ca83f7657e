"""Execution trace: one record per line, comma separated.

    t_start,t_end,worker,kind,unit_id,server_id,source_kind,source_server_id,effective_deadline

``RUN`` records are execution intervals; every other kind is an instant
(``t_start == t_end``).  Empty fields are written as ``-``.  Records appear in
emission order, so ``t_end`` never decreases along the file.
"""

from __future__ import annotations

import hashlib
from typing import NamedTuple, Optional

MAGIC = "# pcss-trace"
VERSION = 1
COLUMNS = ("t_start", "t_end", "worker", "kind", "unit_id", "server_id",
           "source_kind", "source_server_id", "effective_deadline")

#: record kinds the engine emits
KINDS = frozenset({
    "RUN", "ARRIVAL", "RECHARGE", "DISPATCH", "LOCAL", "STEAL", "PREEMPT", "REQUEUE",
    "SPAWN", "END", "COMPLETE", "RELEASE", "EXHAUST", "EXPIRE", "DEACTIVATE", "WAIT", "IDLE",
})


class TraceFormatError(ValueError):
    pass


class Record(NamedTuple):
    t_start: int
    t_end: int
    worker: Optional[int]
    kind: str
    unit: Optional[str]
    server: Optional[int]
    source_kind: Optional[str] = None
    source_server: Optional[int] = None
    deadline: Optional[int] = None

    def line(self) -> str:
        return ",".join("-" if v is None else str(v) for v in self)


def _int(field: str, name: str, lineno: int) -> Optional[int]:
    if field == "-":
        return None
    try:
        return int(field)
    except ValueError:
        raise TraceFormatError(f"line {lineno}: {name} is not an integer: {field!r}") from None


class Trace:
    def __init__(self, meta: Optional[dict] = None, records: Optional[list] = None):
        self.meta = dict(meta or {})
        self.records: list[Record] = records if records is not None else []

    def add(self, t0, t1, worker, kind, unit=None, server=None, skind=None, ssrc=None, deadline=None):
        self.records.append(Record(t0, t1, worker, kind, unit, server, skind, ssrc, deadline))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other):
        return isinstance(other, Trace) and self.dumps() == other.dumps()

    def of_kind(self, *kinds) -> list[Record]:
        return [r for r in self.records if r.kind in kinds]

    @property
    def horizon(self) -> int:
        return int(self.meta["horizon"])

    @property
    def m(self) -> int:
        return int(self.meta["m"])

    # ------------------------------------------------------------ serialization

    def header(self) -> str:
        parts = [f"{MAGIC} v{VERSION}"] + [f"{k}={v}" for k, v in self.meta.items()]
        return " ".join(parts)

    def dumps(self) -> str:
        lines = [self.header(), ",".join(COLUMNS)]
        lines += [r.line() for r in self.records]
        return "\n".join(lines) + "\n"

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(MAGIC):
            raise TraceFormatError("line 1: missing trace header")
        head = lines[0][len(MAGIC):].split()
        if not head or head[0] != f"v{VERSION}":
            raise TraceFormatError(f"line 1: unsupported trace version {head[:1]}")
        meta = {}
        for kv in head[1:]:
            k, sep, v = kv.partition("=")
            if not sep:
                raise TraceFormatError(f"line 1: bad header field {kv!r}")
            meta[k] = v
        if len(lines) < 2 or lines[1] != ",".join(COLUMNS):
            raise TraceFormatError("line 2: column header mismatch")
        records = []
        for n, line in enumerate(lines[2:], start=3):
            if not line:
                continue
            f = line.split(",")
            if len(f) != len(COLUMNS):
                raise TraceFormatError(f"line {n}: expected {len(COLUMNS)} fields, got {len(f)}")
            if f[3] not in KINDS:
                raise TraceFormatError(f"line {n}: unknown record kind {f[3]!r}")
            t0, t1 = _int(f[0], "t_start", n), _int(f[1], "t_end", n)
            if t0 is None or t1 is None or t1 < t0:
                raise TraceFormatError(f"line {n}: bad interval {f[0]}..{f[1]}")
            records.append(Record(
                t0, t1, _int(f[2], "worker", n), f[3],
                None if f[4] == "-" else f[4], _int(f[5], "server_id", n),
                None if f[6] == "-" else f[6], _int(f[7], "source_server_id", n),
                _int(f[8], "effective_deadline", n),
            ))
        return cls(meta, records)

    @classmethod
    def load(cls, path) -> "Trace":
        with open(path) as fh:
            return cls.loads(fh.read())

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()
