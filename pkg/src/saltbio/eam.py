"""Emergency Access Mode: a narrow recovery session.

A session is opened with the EAM password, the current salt code and an
approved change record. It permits exactly three operations (update one
reference, reset all references, add a profile). Each operation ends with a
self-check login and is rolled back if that login does not accept.
Operations return acknowledgments only, never record contents.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .audit_report import AuthEvent, Outcome
from .auth_core import ACTIVE, TemplateStore, enroll, verify
from .biometric import BiometricSample, feature_bits
from .errors import DomainError, EamDenied, FormatError, ParameterError, SelfCheckError
from .salt_token import SaltDevice, code_at, validate
from .tier_cipher import PipelineConfig, ascii_digits

UPDATE_REFERENCE = "UpdateReference"
RESET_REFERENCES = "ResetReferences"
ADD_PROFILE = "AddProfile"
ALLOWED_OPS = frozenset({UPDATE_REFERENCE, RESET_REFERENCES, ADD_PROFILE})
DEFAULT_TTL = 600

APPROVED, REJECTED, PENDING = "Approved", "Rejected", "Pending"


@dataclass(frozen=True)
class ChangeApproval:
    change_id: str
    approvers: tuple[str, ...]
    status: str = PENDING

    def __post_init__(self):
        object.__setattr__(self, "approvers", tuple(self.approvers))
        if not self.approvers:
            raise ParameterError("a change approval needs at least one approver")
        if self.status not in (APPROVED, REJECTED, PENDING):
            raise ParameterError(f"bad approval status {self.status!r}")


@dataclass
class EamSession:
    user_id: str
    opened_at: int
    approval: ChangeApproval
    ttl: int = DEFAULT_TTL
    allowed_ops: frozenset = field(default=ALLOWED_OPS, init=False)
    token: str = field(default_factory=lambda: secrets.token_hex(8))
    closed: bool = False

    def expired(self, unix_time: int) -> bool:
        return unix_time > self.opened_at + self.ttl


@dataclass(frozen=True)
class EamAck:
    op: str
    user_id: str
    references: int
    change_id: str


def _audit(store: TemplateStore, t: int, user: str, outcome: Outcome, source: str) -> None:
    store.log.append(AuthEvent(t, store.server_id, user, outcome, source, is_eam=True))


def eam_open(
    store: TemplateStore,
    user_id: str,
    eam_password: str,
    salt_code,
    unix_time: int,
    approval: ChangeApproval,
    *,
    ttl: int = DEFAULT_TTL,
    source: str = "local",
) -> EamSession:
    """Open a recovery session; works for Locked users too.

    Raises :class:`EamDenied` with reason ``unknown_user``, ``bad_password``,
    ``bad_code`` or ``unapproved``. Every attempt is audited.
    """
    with store.lock:
        rec = store.get(user_id)
        reason = None
        if rec is None:
            reason = "unknown_user"
        else:
            try:
                pw_ok = ascii_digits(eam_password) == rec.eam_password_digits
            except DomainError:
                pw_ok = False
            try:
                code_ok = validate(rec.device, salt_code, unix_time, store.skew_steps)[0]
            except FormatError:
                code_ok = False
            if not pw_ok:
                reason = "bad_password"
            elif not code_ok:
                reason = "bad_code"
            elif approval.status != APPROVED:
                reason = "unapproved"
        if reason is not None:
            _audit(store, unix_time, user_id, Outcome.EAM_DENIED, source)
            raise EamDenied(reason, f"emergency access denied: {reason}")
        session = EamSession(user_id=user_id, opened_at=unix_time, approval=approval, ttl=ttl)
        # one live session per user; a new one supersedes the old
        old = store.eam_sessions.get(user_id)
        if old is not None:
            old.closed = True
        store.eam_sessions[user_id] = session
        _audit(store, unix_time, user_id, Outcome.EAM_OPEN, source)
        return session


def _check_session(session: EamSession, store: TemplateStore, op: str, unix_time: int, source: str) -> None:
    reason = None
    if op not in session.allowed_ops:
        reason = "operation_not_allowed"
    elif session.closed or store.eam_sessions.get(session.user_id) is not session:
        reason = "session_closed"
    elif session.expired(unix_time):
        reason = "expired"
    if reason is not None:
        _audit(store, unix_time, session.user_id, Outcome.EAM_OP_FAILED, source)
        raise EamDenied(reason, f"emergency operation refused: {reason}")


def _self_check(store, user_id, sample, unix_time, cfg, source) -> bool:
    rec = store.get(user_id)
    probe = feature_bits(sample, store.feature_length)
    salt = code_at(rec.device, unix_time)
    result = verify(
        store, user_id, probe, rec.password_digits, salt, unix_time, cfg,
        source=f"{source}:self-check", is_eam=True,
    )
    return result.accepted


def _commit_or_rollback(store, session, previous, target_user, sample, op_outcome, unix_time, cfg, source):
    if not _self_check(store, target_user, sample, unix_time, cfg, source):
        if previous is None:
            store.remove(target_user)
        else:
            store.put(previous)
        _audit(store, unix_time, target_user, Outcome.EAM_OP_FAILED, source)
        raise SelfCheckError(f"post-change login for {target_user!r} did not accept; change rolled back")
    _audit(store, unix_time, target_user, op_outcome, source)
    rec = store.get(target_user)
    return EamAck(op_outcome.value, target_user, len(rec.references), session.approval.change_id)


def eam_update_reference(
    session: EamSession,
    store: TemplateStore,
    index: int,
    new_sample: BiometricSample,
    unix_time: int,
    cfg: PipelineConfig | None = None,
    *,
    source: str = "local",
) -> EamAck:
    with store.lock:
        _check_session(session, store, UPDATE_REFERENCE, unix_time, source)
        previous = store.get(session.user_id)
        if not 0 <= index < len(previous.references):
            _audit(store, unix_time, session.user_id, Outcome.EAM_OP_FAILED, source)
            raise ParameterError(f"reference index {index} out of range")
        refs = list(previous.references)
        refs[index] = feature_bits(new_sample, store.feature_length)
        store.put(replace(previous, references=tuple(refs), status=ACTIVE, failed_count=0))
        return _commit_or_rollback(
            store, session, previous, session.user_id, new_sample, Outcome.EAM_UPDATE, unix_time, cfg, source
        )


def eam_reset_references(
    session: EamSession,
    store: TemplateStore,
    samples: Sequence[BiometricSample],
    unix_time: int,
    cfg: PipelineConfig | None = None,
    *,
    source: str = "local",
) -> EamAck:
    samples = list(samples)
    with store.lock:
        _check_session(session, store, RESET_REFERENCES, unix_time, source)
        if not samples or len(samples) > store.max_refs:
            _audit(store, unix_time, session.user_id, Outcome.EAM_OP_FAILED, source)
            raise ParameterError(f"reset needs 1..{store.max_refs} samples")
        previous = store.get(session.user_id)
        refs = tuple(feature_bits(s, store.feature_length) for s in samples)
        store.put(replace(previous, references=refs, status=ACTIVE, failed_count=0))
        return _commit_or_rollback(
            store, session, previous, session.user_id, samples[0], Outcome.EAM_RESET, unix_time, cfg, source
        )


def eam_add_profile(
    session: EamSession,
    store: TemplateStore,
    user_id: str,
    samples: Sequence[BiometricSample],
    password: str,
    eam_password: str,
    unix_time: int,
    cfg: PipelineConfig | None = None,
    *,
    seed: Optional[int] = None,
    source: str = "local",
) -> EamAck:
    """Enroll a new profile with a freshly registered salt device."""
    samples = list(samples)
    with store.lock:
        _check_session(session, store, ADD_PROFILE, unix_time, source)
        try:
            enroll(
                store, user_id, samples, password, eam_password,
                seed=secrets.randbits(64) if seed is None else seed,
                unix_time=unix_time, source=source, audit_is_eam=True,
            )
        except Exception:
            _audit(store, unix_time, user_id, Outcome.EAM_OP_FAILED, source)
            raise
        return _commit_or_rollback(
            store, session, None, user_id, samples[0], Outcome.EAM_ADD_PROFILE, unix_time, cfg, source
        )


def close(session: EamSession, store: TemplateStore) -> None:
    with store.lock:
        session.closed = True
        if store.eam_sessions.get(session.user_id) is session:
            del store.eam_sessions[session.user_id]


def device_for(store: TemplateStore, user_id: str) -> SaltDevice:
    """The salt device registered to ``user_id`` (what a provisioned token holds)."""
    rec = store.get(user_id)
    if rec is None:
        raise EamDenied("unknown_user")
    return rec.device
