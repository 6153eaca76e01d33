"""Enrollment, template refresh and the login decision procedure.

A :class:`TemplateStore` is the single owner of enrollment records for one
server. Every mutation and every login runs under its lock, and records
leave the store only as copies.

Login checks run in a fixed order::

    user lookup -> lockout -> salt code -> biometric match -> template compare

and each call appends exactly one audit event, whatever the outcome.
"""

from __future__ import annotations

import os
import secrets
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .audit_report import AuditLog, AuthEvent, Outcome
from .biometric import (
    DEFAULT_LENGTH,
    MODALITIES,
    BiometricSample,
    FeatureTemplate,
    credential_bits_from_digits,
    distance,
    feature_bits,
    fuse,
)
from .bitcodec import BitString
from .errors import (
    CapacityError,
    ComparisonError,
    ConflictError,
    DomainError,
    FormatError,
    NotFoundError,
    ParameterError,
    SaltbioError,
)
from .salt_token import SaltDevice, code_at, code_for_step, validate
from .tier_cipher import PipelineConfig, ascii_digits, template_from_bits

ACTIVE = "Active"
LOCKED = "Locked"
STORE_VERSION = "1"


@dataclass(frozen=True)
class EnrollmentRecord:
    user_id: str
    home_server: str
    references: tuple[FeatureTemplate, ...]
    password_digits: int
    device: SaltDevice
    status: str = ACTIVE
    failed_count: int = 0
    eam_password_digits: int = 0


@dataclass(frozen=True)
class AuthResult:
    outcome: Outcome
    distance: Optional[float] = None
    matched_reference: Optional[int] = None
    template_value: Optional[int] = None

    @property
    def accepted(self) -> bool:
        return self.outcome == Outcome.ACCEPT


class StoreIOError(SaltbioError, OSError):
    pass


# --- store file format --------------------------------------------------------


def _encode_reference(ref: FeatureTemplate) -> str:
    text = f"{ref.length}:{ref.bits.to_hex()}"
    # modality suffix only when it differs from the default, so plain
    # fingerprint records keep the two-field "<L>:<hex>" form
    return text if ref.modality == "fingerprint" else f"{text}:{ref.modality}"


def _decode_reference(text: str) -> FeatureTemplate:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise DomainError(f"bad reference field {text!r}")
    length = int(parts[0])
    if length % 4 or len(parts[1]) != length // 4:
        raise DomainError(f"reference hex width does not match L={length}")
    modality = parts[2] if len(parts) == 3 else "fingerprint"
    if modality not in MODALITIES:
        raise DomainError(f"unknown modality {modality!r}")
    return FeatureTemplate(BitString.from_hex(parts[1], length), modality)


def format_record(rec: EnrollmentRecord) -> str:
    return "\t".join(
        [
            STORE_VERSION,
            rec.user_id,
            rec.home_server,
            ";".join(_encode_reference(r) for r in rec.references),
            str(rec.password_digits),
            format(rec.device.seed, "016x"),
            str(rec.device.digits),
            rec.status,
            str(rec.failed_count),
            str(rec.eam_password_digits),
        ]
    )


def parse_record(line: str) -> EnrollmentRecord:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 10:
        raise DomainError(f"expected 10 tab-separated fields, got {len(fields)}")
    version, user, home, refs, pw, seed, digits, status, failed, eam_pw = fields
    if version != STORE_VERSION:
        raise DomainError(f"unsupported store record version {version!r}")
    if status not in (ACTIVE, LOCKED):
        raise DomainError(f"bad status {status!r}")
    if len(seed) != 16:
        raise DomainError("device seed must be 16 hex characters")
    try:
        return EnrollmentRecord(
            user_id=user,
            home_server=home,
            references=tuple(_decode_reference(r) for r in refs.split(";")),
            password_digits=int(pw),
            device=SaltDevice(seed=int(seed, 16), digits=int(digits)),
            status=status,
            failed_count=int(failed),
            eam_password_digits=int(eam_pw),
        )
    except ValueError as exc:
        raise DomainError(str(exc)) from None


class TemplateStore:
    """Enrollment records for one server, plus the audit log they report to.

    With ``path`` set, the store loads from that file and rewrites it
    atomically after each mutation.
    """

    def __init__(
        self,
        server_id: str = "local",
        path: str | os.PathLike | None = None,
        log: AuditLog | None = None,
        *,
        max_users: int = 100,
        max_refs: int = 4,
        max_failures: int = 3,
        tau: float = 0.15,
        feature_length: int = DEFAULT_LENGTH,
        skew_steps: int = 1,
    ):
        if max_users < 1 or max_refs < 1 or max_failures < 1:
            raise ParameterError("store limits must be positive")
        if not 0.0 <= tau <= 1.0:
            raise ParameterError("tau must lie in [0, 1]")
        self.server_id = server_id
        self.path = Path(path) if path is not None else None
        self.log = log if log is not None else AuditLog()
        self.max_users = max_users
        self.max_refs = max_refs
        self.max_failures = max_failures
        self.tau = tau
        self.feature_length = feature_length
        self.skew_steps = skew_steps
        self.lock = threading.RLock()
        self._records: dict[str, EnrollmentRecord] = {}
        self._cache: dict[tuple, tuple[int, int]] = {}
        self.eam_sessions: dict = {}
        if self.path is not None and self.path.exists():
            self.load_text(self.path.read_text(encoding="utf-8"))

    # record access

    def get(self, user_id: str) -> Optional[EnrollmentRecord]:
        with self.lock:
            return self._records.get(user_id)

    def __contains__(self, user_id: str) -> bool:
        return user_id in self._records

    def __len__(self) -> int:
        return len(self._records)

    def user_ids(self) -> list[str]:
        with self.lock:
            return sorted(self._records)

    def put(self, rec: EnrollmentRecord) -> None:
        with self.lock:
            old = self._records.get(rec.user_id)
            self._records[rec.user_id] = rec
            if old is None or (old.references, old.password_digits, old.device) != (
                rec.references,
                rec.password_digits,
                rec.device,
            ):
                self.invalidate(rec.user_id)
            self.save()

    def remove(self, user_id: str) -> None:
        with self.lock:
            self._records.pop(user_id, None)
            self.invalidate(user_id)
            self.save()

    def invalidate(self, user_id: str) -> None:
        for key in [k for k in self._cache if k[0] == user_id]:
            del self._cache[key]

    # persistence

    def dump_text(self) -> str:
        with self.lock:
            return "".join(format_record(self._records[u]) + "\n" for u in sorted(self._records))

    def load_text(self, text: str) -> int:
        """Replace all records from store-file text; nothing changes on error."""
        records = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = parse_record(line)
            except SaltbioError as exc:
                raise DomainError(f"store line {lineno}: {exc}") from None
            records[rec.user_id] = rec
        self.replace_all(records.values(), persist=False)
        return len(records)

    def replace_all(self, records, persist: bool = True) -> None:
        records = {r.user_id: r for r in records}
        with self.lock:
            self._records = records
            self._cache.clear()
            self.eam_sessions.clear()
            if persist:
                self.save()

    def save(self) -> None:
        if self.path is None:
            return
        tmp = self.path.with_name(self.path.name + ".tmp")
        try:
            tmp.write_text(self.dump_text(), encoding="utf-8")
            os.replace(tmp, self.path)
        except OSError as exc:
            raise StoreIOError(f"cannot write store {self.path}: {exc}") from exc


# --- operations ---------------------------------------------------------------


def _now(unix_time: Optional[int]) -> int:
    return int(time.time()) if unix_time is None else int(unix_time)


def enroll(
    store: TemplateStore,
    user_id: str,
    samples: Sequence[BiometricSample],
    password: str,
    eam_password: str,
    seed: Optional[int] = None,
    *,
    home_server: Optional[str] = None,
    unix_time: Optional[int] = None,
    source: str = "local",
    audit_is_eam: bool = False,
) -> EnrollmentRecord:
    samples = list(samples)
    if not samples:
        raise ParameterError("at least one biometric sample is required")
    if len(samples) > store.max_refs:
        raise CapacityError(f"{len(samples)} samples exceed the {store.max_refs}-reference capacity")
    pw = ascii_digits(password)
    eam_pw = ascii_digits(eam_password)
    device = SaltDevice(seed=secrets.randbits(64) if seed is None else seed)
    t = _now(unix_time)
    with store.lock:
        if user_id in store:
            raise ConflictError(f"user {user_id!r} is already enrolled")
        if len(store) >= store.max_users:
            raise CapacityError(f"store is full ({store.max_users} users)")
        rec = EnrollmentRecord(
            user_id=user_id,
            home_server=home_server or store.server_id,
            references=tuple(feature_bits(s, store.feature_length) for s in samples),
            password_digits=pw,
            device=device,
            eam_password_digits=eam_pw,
        )
        store.put(rec)
        store.log.append(
            AuthEvent(t, store.server_id, user_id, Outcome.ENROLL, source, is_eam=audit_is_eam)
        )
    return rec


def _template_for(ref: FeatureTemplate, password_digits: int, salt_code, cfg: PipelineConfig) -> int:
    fused = fuse(ref.bits, credential_bits_from_digits(password_digits, salt_code), cfg.gate)
    return template_from_bits(fused, cfg)[1]


def expected_template(rec: EnrollmentRecord, reference_index: int, unix_time: int, cfg: PipelineConfig | None = None) -> int:
    """Template the server expects for ``rec`` at ``unix_time``'s salt step."""
    cfg = cfg or PipelineConfig()
    if not 0 <= reference_index < len(rec.references):
        raise ParameterError(f"reference index {reference_index} out of range")
    salt = code_at(rec.device, unix_time)
    return _template_for(rec.references[reference_index], rec.password_digits, salt, cfg)


def _stored_template(store: TemplateStore, rec: EnrollmentRecord, idx: int, step: int, cfg: PipelineConfig) -> int:
    key = (rec.user_id, idx, cfg)
    hit = store._cache.get(key)
    if hit is not None and hit[0] == step:
        return hit[1]
    value = _template_for(rec.references[idx], rec.password_digits, code_for_step(rec.device, step), cfg)
    store._cache[key] = (step, value)
    return value


def refresh_templates(store: TemplateStore, unix_time: int, cfg: PipelineConfig | None = None) -> int:
    """Precompute every expected template for the current salt step.

    Returns how many cache entries were (re)computed; a second call within
    the same step returns 0.
    """
    cfg = cfg or PipelineConfig()
    refreshed = 0
    with store.lock:
        for rec in store._records.values():
            step = rec.device.step(unix_time)
            for idx in range(len(rec.references)):
                hit = store._cache.get((rec.user_id, idx, cfg))
                if hit is None or hit[0] != step:
                    _stored_template(store, rec, idx, step, cfg)
                    refreshed += 1
    return refreshed


def cached_template(store: TemplateStore, user_id: str, idx: int, cfg: PipelineConfig | None = None) -> Optional[int]:
    hit = store._cache.get((user_id, idx, cfg or PipelineConfig()))
    return None if hit is None else hit[1]


def verify(
    store: TemplateStore,
    user_id: str,
    probe: FeatureTemplate,
    password_digits: Optional[int],
    salt_code,
    unix_time: int,
    cfg: PipelineConfig | None = None,
    *,
    source: str = "local",
    is_eam: bool = False,
) -> AuthResult:
    """Login decision from derived quantities (feature bits, password digits).

    ``password_digits=None`` stands for a password that could not be
    converted; it can never produce Accept.
    """
    cfg = cfg or PipelineConfig()
    with store.lock:
        result, update = _decide(store, user_id, probe, password_digits, salt_code, unix_time, cfg)
        try:
            if update is not None:
                store.put(update)
        finally:
            store.log.append(
                AuthEvent(unix_time, store.server_id, user_id, result.outcome, source, is_eam=is_eam)
            )
    return result


def _decide(store, user_id, probe, password_digits, salt_code, unix_time, cfg):
    """Return the login result and the record update it implies (or None)."""
    rec = store.get(user_id)
    if rec is None:
        return AuthResult(Outcome.UNKNOWN_USER), None
    if rec.status == LOCKED:
        return AuthResult(Outcome.LOCKED_OUT), None

    try:
        ok, offset = validate(rec.device, salt_code, unix_time, store.skew_steps)
    except FormatError:
        ok, offset = False, None
    if not ok:
        return AuthResult(Outcome.REJECT_SALT), None
    step = rec.device.step(unix_time) + offset

    best_idx, best_d = None, None
    for idx, ref in enumerate(rec.references):
        try:
            d = distance(ref, probe)
        except ComparisonError:
            continue
        if best_d is None or d < best_d:
            best_idx, best_d = idx, d
    if best_d is None or best_d > store.tau:
        return AuthResult(Outcome.REJECT_BIOMETRIC, distance=best_d), _failed(store, rec)

    stored = _stored_template(store, rec, best_idx, step, cfg)
    submitted = None
    if password_digits is not None:
        submitted = _template_for(rec.references[best_idx], password_digits, salt_code, cfg)
    if submitted != stored:
        result = AuthResult(Outcome.REJECT_TEMPLATE, distance=best_d, matched_reference=best_idx)
        return result, _failed(store, rec)

    result = AuthResult(Outcome.ACCEPT, distance=best_d, matched_reference=best_idx, template_value=stored)
    return result, (replace(rec, failed_count=0) if rec.failed_count else None)


def _failed(store: TemplateStore, rec: EnrollmentRecord) -> EnrollmentRecord:
    failed = min(rec.failed_count + 1, store.max_failures)
    status = LOCKED if failed >= store.max_failures else rec.status
    return replace(rec, failed_count=failed, status=status)


def login(
    store: TemplateStore,
    user_id: str,
    sample: BiometricSample,
    password: str,
    salt_code,
    unix_time: int,
    cfg: PipelineConfig | None = None,
    *,
    source: str = "local",
) -> AuthResult:
    probe = feature_bits(sample, store.feature_length)
    try:
        digits = ascii_digits(password)
    except DomainError:
        digits = None
    return verify(store, user_id, probe, digits, salt_code, unix_time, cfg, source=source)


def unlock(store: TemplateStore, user_id: str) -> EnrollmentRecord:
    """Clear the failure counter and lock; reserved for the EAM recovery path."""
    with store.lock:
        rec = store.get(user_id)
        if rec is None:
            raise NotFoundError(user_id)
        rec = replace(rec, status=ACTIVE, failed_count=0)
        store.put(rec)
        return rec
