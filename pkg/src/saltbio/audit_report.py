"""Append-only audit log, end-of-day summaries and cross-server consolidation.

Counting rules used by :func:`eod_report`:

* login events are the non-EAM events whose outcome is a login outcome;
  ``Accept`` counts as an acceptance, ``UnknownUser`` as an unknown attempt,
  every ``Reject*``, ``LockedOut`` and ``ReferralFailed`` as a rejection;
* EAM events are the events flagged ``is_eam``; ``EamDenied`` and
  ``EamOpFailed`` (and any non-Accept self-check login) are invalid, all
  others valid.

``pct_acceptance`` is ``(accepts - rejects) / total_logins`` and is negative
whenever rejections outnumber acceptances.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import asdict, dataclass, field, replace
from datetime import date as Date
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .errors import DomainError, ParameterError


class Outcome(str, Enum):
    ACCEPT = "Accept"
    REJECT_SALT = "RejectSalt"
    REJECT_BIOMETRIC = "RejectBiometric"
    REJECT_TEMPLATE = "RejectTemplate"
    UNKNOWN_USER = "UnknownUser"
    LOCKED_OUT = "LockedOut"
    REFERRAL_FAILED = "ReferralFailed"
    ENROLL = "Enroll"
    RESTORE = "Restore"
    EAM_OPEN = "EamOpen"
    EAM_DENIED = "EamDenied"
    EAM_UPDATE = "EamUpdate"
    EAM_RESET = "EamReset"
    EAM_ADD_PROFILE = "EamAddProfile"
    EAM_OP_FAILED = "EamOpFailed"

    def __str__(self):
        return self.value


LOGIN_REJECTS = frozenset(
    {
        Outcome.REJECT_SALT,
        Outcome.REJECT_BIOMETRIC,
        Outcome.REJECT_TEMPLATE,
        Outcome.LOCKED_OUT,
        Outcome.REFERRAL_FAILED,
    }
)
LOGIN_OUTCOMES = LOGIN_REJECTS | {Outcome.ACCEPT, Outcome.UNKNOWN_USER}
EAM_INVALID = frozenset(LOGIN_OUTCOMES - {Outcome.ACCEPT}) | {Outcome.EAM_DENIED, Outcome.EAM_OP_FAILED}

EVENT_KEYS = ("seq", "ts", "server", "user", "outcome", "source", "is_eam", "home_server")


def to_rfc3339(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def from_rfc3339(text: str) -> int:
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def utc_date(ts: int) -> Date:
    return datetime.fromtimestamp(ts, tz=timezone.utc).date()


@dataclass(frozen=True)
class AuthEvent:
    timestamp: int
    server_id: str
    user_id: str
    outcome: Outcome
    source: str = "local"
    is_eam: bool = False
    home_server: Optional[str] = None
    seq: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "outcome", Outcome(self.outcome))

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "ts": to_rfc3339(self.timestamp),
                "server": self.server_id,
                "user": self.user_id,
                "outcome": self.outcome.value,
                "source": self.source,
                "is_eam": self.is_eam,
                "home_server": self.home_server,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> AuthEvent:
        obj = json.loads(line)
        if set(obj) != set(EVENT_KEYS):
            raise DomainError(f"audit line has keys {sorted(obj)}, expected {sorted(EVENT_KEYS)}")
        return cls(
            timestamp=from_rfc3339(obj["ts"]),
            server_id=obj["server"],
            user_id=obj["user"],
            outcome=Outcome(obj["outcome"]),
            source=obj["source"],
            is_eam=bool(obj["is_eam"]),
            home_server=obj["home_server"],
            seq=obj["seq"],
        )


class AuditLog:
    """JSON-lines audit log; in memory when ``path`` is None.

    Appends are serialized, sequence numbers strictly increase, and existing
    lines are never rewritten. ``fsync=True`` forces each line to disk.
    """

    def __init__(self, path: str | os.PathLike | None = None, fsync: bool = False):
        self.path = Path(path) if path is not None else None
        self.fsync = fsync
        self._lock = threading.Lock()
        self._events: list[AuthEvent] = []
        if self.path is not None and self.path.exists():
            self._events = read_events(self.path)
        self._seq = self._events[-1].seq if self._events else 0
        self._last_ts = self._events[-1].timestamp if self._events else None

    def append(self, event: AuthEvent) -> int:
        with self._lock:
            if self._last_ts is not None and event.timestamp < self._last_ts:
                raise DomainError(
                    f"audit timestamps must not decrease ({event.timestamp} < {self._last_ts})"
                )
            seq = self._seq + 1
            stamped = replace(event, seq=seq)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(stamped.to_json() + "\n")
                    fh.flush()
                    if self.fsync:
                        os.fsync(fh.fileno())
            self._events.append(stamped)
            self._seq = seq
            self._last_ts = event.timestamp
            return seq

    def events(self) -> list[AuthEvent]:
        with self._lock:
            return list(self._events)

    def __len__(self):
        return len(self._events)


def read_events(path: str | os.PathLike) -> list[AuthEvent]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(AuthEvent.from_json(line))
            except (ValueError, KeyError) as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
    return out


@dataclass
class ReportSummary:
    server_id: str
    date: str
    accepts: int = 0
    rejects: int = 0
    unknown_attempts: int = 0
    total_logins: int = 0
    eam_valid: int = 0
    eam_invalid: int = 0
    eam_total: int = 0
    pct_acceptance: float = 0.0
    pct_eam: float = 0.0
    # not one of the management formulas: plain accepts / total_logins
    acceptance_rate: float = 0.0
    unmatched_sources: list = field(default_factory=list)

    def recompute(self) -> ReportSummary:
        self.total_logins = self.accepts + self.rejects + self.unknown_attempts
        self.eam_total = self.eam_valid + self.eam_invalid
        t = self.total_logins
        self.pct_acceptance = (self.accepts - self.rejects) / t if t else 0.0
        self.acceptance_rate = self.accepts / t if t else 0.0
        et = self.eam_total
        self.pct_eam = (self.eam_valid - self.eam_invalid) / et if et else 0.0
        self.unmatched_sources.sort()
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def render(self) -> str:
        rows = [
            ("server", self.server_id),
            ("date", self.date),
            ("accepts", self.accepts),
            ("rejects", self.rejects),
            ("unknown_attempts", self.unknown_attempts),
            ("total_logins", self.total_logins),
            ("pct_acceptance", f"{self.pct_acceptance:.6f}"),
            ("acceptance_rate (accepts/total, non-formula)", f"{self.acceptance_rate:.6f}"),
            ("eam_valid", self.eam_valid),
            ("eam_invalid", self.eam_invalid),
            ("eam_total", self.eam_total),
            ("pct_eam", f"{self.pct_eam:.6f}"),
        ]
        width = max(len(k) for k, _ in rows)
        header = [
            "# EOD authentication report",
            "# UnknownUser attempts count toward total_logins but not accepts/rejects",
        ]
        body = [f"{k.ljust(width)}  {v}" for k, v in rows]
        for src in self.unmatched_sources:
            body.append(f"{'unmatched'.ljust(width)}  {src}")
        return "\n".join(header + body) + "\n\n" + json.dumps(self.to_dict(), sort_keys=True) + "\n"


def eod_report(events: Iterable[AuthEvent], server_id: str, date: Date | str) -> ReportSummary:
    day = date.isoformat() if isinstance(date, Date) else str(date)
    rep = ReportSummary(server_id=server_id, date=day)
    for ev in events:
        if ev.server_id != server_id or utc_date(ev.timestamp).isoformat() != day:
            continue
        if ev.is_eam:
            if ev.outcome in EAM_INVALID:
                rep.eam_invalid += 1
            else:
                rep.eam_valid += 1
        elif ev.outcome == Outcome.ACCEPT:
            rep.accepts += 1
        elif ev.outcome == Outcome.UNKNOWN_USER:
            rep.unknown_attempts += 1
            rep.unmatched_sources.append(f"{ev.user_id}@{ev.source}")
        elif ev.outcome in LOGIN_REJECTS:
            rep.rejects += 1
    return rep.recompute()


def consolidate(reports: Iterable[ReportSummary], server_id: str = "ALL") -> ReportSummary:
    """Sum counts across servers and recompute the percentages from the sums."""
    reports = list(reports)
    dates = {r.date for r in reports}
    if len(dates) > 1:
        raise ParameterError(f"cannot consolidate reports from different dates: {sorted(dates)}")
    out = ReportSummary(server_id=server_id, date=dates.pop() if dates else "")
    for r in reports:
        out.accepts += r.accepts
        out.rejects += r.rejects
        out.unknown_attempts += r.unknown_attempts
        out.eam_valid += r.eam_valid
        out.eam_invalid += r.eam_invalid
        out.unmatched_sources.extend(r.unmatched_sources)
    return out.recompute()


def pct_redundancy(images_enrolled: int, technique_capacity: int) -> float:
    if technique_capacity <= 0:
        raise ParameterError("technique capacity must be positive")
    if not 0 <= images_enrolled <= technique_capacity:
        raise ParameterError("images_enrolled must lie in [0, capacity]")
    return 100.0 * images_enrolled / technique_capacity


def write_report(report: ReportSummary, path: str | os.PathLike) -> Path:
    """Deliver a report by writing it to ``path`` (the management drop location)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.render(), encoding="utf-8")
    return path
