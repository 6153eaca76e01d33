"""Cross-server referral logins, the line-delimited JSON wire protocol, and
store backup/restore.

A referral is verified on the user's home server: the serving node sends
only derived quantities (feature bits, password digits, salt code, time) and
relays the home server's decision. Both nodes audit the attempt.

Wire format, one JSON object per line::

    request  {"v": 1, "op": "ping" | "verify_remote", "args": {...}}
    response {"v": 1, "ok": true, "result": {...}}
             {"v": 1, "ok": false, "error": {"code": ..., "msg": ...}}
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Protocol

import jsonschema

from .audit_report import AuthEvent, Outcome, to_rfc3339
from .auth_core import AuthResult, TemplateStore, login, parse_record, verify
from .biometric import BiometricSample, FeatureTemplate, feature_bits
from .bitcodec import BitString
from .errors import BackupError, DomainError, ReferralError, SaltbioError, TransportError
from .tier_cipher import PipelineConfig, ascii_digits

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
BACKUP_VERSION = "1"
BACKUP_MAGIC = "#saltbio-backup"
BACKUP_END = "#end"

VERIFY_ARGS_SCHEMA = {
    "type": "object",
    "properties": {
        "user": {"type": "string", "minLength": 1},
        "feature_bits": {"type": "string", "pattern": "^[01]+$"},
        "bits_len": {"type": "integer", "minimum": 1},
        "password_digits": {"type": ["integer", "null"], "minimum": 0},
        "salt_code": {"type": "string"},
        "time": {"type": "integer", "minimum": 0},
        "modality": {"enum": ["fingerprint", "iris", "voice", "other"]},
        "origin": {"type": "string"},
    },
    "required": ["user", "feature_bits", "bits_len", "password_digits", "salt_code", "time"],
    "additionalProperties": False,
}

REQUEST_SCHEMA = {
    "type": "object",
    "properties": {
        "v": {"const": PROTOCOL_VERSION},
        "op": {"enum": ["ping", "verify_remote"]},
        "args": {"type": "object"},
    },
    "required": ["v", "op", "args"],
    "additionalProperties": False,
}

RESPONSE_SCHEMA = {
    "type": "object",
    "properties": {
        "v": {"const": PROTOCOL_VERSION},
        "ok": {"type": "boolean"},
        "result": {"type": "object"},
        "error": {
            "type": "object",
            "properties": {"code": {"type": "string"}, "msg": {"type": "string"}},
            "required": ["code", "msg"],
        },
    },
    "required": ["v", "ok"],
    "additionalProperties": False,
}


class Transport(Protocol):
    def request(self, message: dict) -> dict: ...


@dataclass
class ServerNode:
    server_id: str
    store: TemplateStore
    peers: dict = field(default_factory=dict)
    cfg: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        if self.server_id in self.peers:
            raise DomainError("a node cannot list itself as a peer")

    @property
    def log(self):
        return self.store.log

    def add_peer(self, server_id: str, transport: Transport) -> None:
        if server_id == self.server_id:
            raise DomainError("a node cannot list itself as a peer")
        self.peers[server_id] = transport


# --- protocol -----------------------------------------------------------------


def _error(code: str, msg: str) -> dict:
    return {"v": PROTOCOL_VERSION, "ok": False, "error": {"code": code, "msg": msg}}


def result_to_wire(result: AuthResult) -> dict:
    return {
        "outcome": result.outcome.value,
        "distance": result.distance,
        "matched_reference": result.matched_reference,
        # decimal string: templates are far wider than 64 bits
        "template_value": None if result.template_value is None else str(result.template_value),
    }


def result_from_wire(obj: dict) -> AuthResult:
    tv = obj.get("template_value")
    return AuthResult(
        outcome=Outcome(obj["outcome"]),
        distance=obj.get("distance"),
        matched_reference=obj.get("matched_reference"),
        template_value=None if tv is None else int(tv),
    )


def handle_request(node: ServerNode, message: dict) -> dict:
    try:
        jsonschema.validate(message, REQUEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        code = "bad_version" if list(exc.path) == ["v"] else "bad_request"
        return _error(code, exc.message)
    if message["op"] == "ping":
        return {"v": PROTOCOL_VERSION, "ok": True, "result": {"server": node.server_id}}
    args = message["args"]
    try:
        jsonschema.validate(args, VERIFY_ARGS_SCHEMA)
    except jsonschema.ValidationError as exc:
        return _error("bad_request", exc.message)
    if len(args["feature_bits"]) != args["bits_len"]:
        return _error("bad_request", "bits_len does not match feature_bits")
    probe = FeatureTemplate(BitString(args["feature_bits"]), args.get("modality", "fingerprint"))
    origin = args.get("origin", "peer")
    try:
        result = verify(
            node.store, args["user"], probe, args["password_digits"], args["salt_code"],
            args["time"], node.cfg, source=f"referral:{origin}",
        )
    except SaltbioError as exc:
        return _error("internal", str(exc))
    return {"v": PROTOCOL_VERSION, "ok": True, "result": result_to_wire(result)}


def handle_line(node: ServerNode, line: str | bytes) -> str:
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        return json.dumps(_error("bad_request", f"invalid JSON: {exc.msg}"))
    return json.dumps(handle_request(node, message), separators=(",", ":"))


def _decode_response(line: str) -> dict:
    try:
        resp = json.loads(line)
        jsonschema.validate(resp, RESPONSE_SCHEMA)
    except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
        raise TransportError(f"malformed response: {exc}") from None
    return resp


class LoopbackTransport:
    """In-process transport that still round-trips every message through JSON text."""

    def __init__(self, node: ServerNode):
        self.node = node
        self.online = True

    def request(self, message: dict) -> dict:
        if not self.online:
            raise TransportError(f"peer {self.node.server_id} is unreachable")
        return _decode_response(handle_line(self.node, json.dumps(message)))


class SocketTransport:
    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.host, self.port, self.timeout = host, port, timeout

    def request(self, message: dict) -> dict:
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
                sock.sendall((json.dumps(message) + "\n").encode("utf-8"))
                with sock.makefile("r", encoding="utf-8") as fh:
                    line = fh.readline()
        except OSError as exc:
            raise TransportError(f"{self.host}:{self.port}: {exc}") from exc
        if not line:
            raise TransportError(f"{self.host}:{self.port}: connection closed without a response")
        return _decode_response(line)


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise DomainError(f"address must look like host:port, got {addr!r}")
    return host, int(port)


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            if not raw.strip():
                continue
            reply = handle_line(self.server.node, raw)
            self.wfile.write((reply + "\n").encode("utf-8"))
            self.wfile.flush()


class NodeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, node: ServerNode, addr: tuple[str, int]):
        super().__init__(addr, _LineHandler)
        self.node = node

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, name=f"node-{self.node.server_id}", daemon=True)
        t.start()
        return t


# --- referral -----------------------------------------------------------------


def remote_login(
    node: ServerNode,
    home_server_name: str,
    user_id: str,
    sample: BiometricSample,
    password: str,
    salt_code,
    unix_time: int,
    *,
    source: str = "local",
) -> AuthResult:
    """Authenticate at ``node`` a user whose record lives on ``home_server_name``."""
    if home_server_name == node.server_id:
        return login(node.store, user_id, sample, password, salt_code, unix_time, node.cfg, source=source)

    def failed(exc_type, msg):
        node.log.append(
            AuthEvent(unix_time, node.server_id, user_id, Outcome.REFERRAL_FAILED, source,
                      home_server=home_server_name)
        )
        return exc_type(msg)

    transport = node.peers.get(home_server_name)
    if transport is None:
        raise failed(ReferralError, f"unknown home server {home_server_name!r}")
    probe = feature_bits(sample, node.store.feature_length)
    try:
        digits = ascii_digits(password)
    except DomainError:
        digits = None
    request = {
        "v": PROTOCOL_VERSION,
        "op": "verify_remote",
        "args": {
            "user": user_id,
            "feature_bits": probe.bits.bits,
            "bits_len": probe.length,
            "password_digits": digits,
            "salt_code": str(salt_code),
            "time": unix_time,
            "modality": probe.modality,
            "origin": node.server_id,
        },
    }
    try:
        resp = transport.request(request)
    except TransportError as exc:
        raise failed(TransportError, str(exc)) from exc
    if not resp["ok"]:
        err = resp.get("error", {})
        raise failed(ReferralError, f"{home_server_name}: {err.get('code')}: {err.get('msg')}")
    result = result_from_wire(resp["result"])
    node.log.append(
        AuthEvent(unix_time, node.server_id, user_id, result.outcome, source, home_server=home_server_name)
    )
    return result


# --- backup -------------------------------------------------------------------


def export_store(node: ServerNode, unix_time: Optional[int] = None) -> str:
    """Serialize every record: a header, the store-file lines, an end marker."""
    body = node.store.dump_text()
    count = len(body.splitlines())
    ts = to_rfc3339(int(time.time()) if unix_time is None else unix_time)
    header = f"{BACKUP_MAGIC}\tv={BACKUP_VERSION}\tserver={node.server_id}\texported={ts}\trecords={count}\n"
    return header + body + f"{BACKUP_END}\t{count}\n"


def strip_backup_header(artifact: str) -> str:
    lines = artifact.splitlines(keepends=True)
    return "".join(lines[1:-1])


def import_store(node: ServerNode, artifact: str) -> int:
    """Replace the node's store from a backup; all-or-nothing."""
    lines = artifact.splitlines()
    if not lines or not lines[0].startswith(BACKUP_MAGIC):
        raise BackupError("missing backup header", line=1)
    try:
        meta = dict(f.split("=", 1) for f in lines[0].split("\t")[1:])
        declared = int(meta["records"])
    except (ValueError, KeyError):
        raise BackupError("malformed backup header", line=1) from None
    if meta.get("v") != BACKUP_VERSION:
        raise BackupError(f"unsupported backup version {meta.get('v')!r}", line=1)
    if len(lines) < 2 or lines[-1] != f"{BACKUP_END}\t{declared}":
        raise BackupError("backup is truncated (end marker missing)", line=len(lines))
    body = lines[1:-1]
    if len(body) != declared:
        raise BackupError(f"header declares {declared} records, found {len(body)}", line=len(lines))
    records, seen = [], set()
    for lineno, line in enumerate(body, 2):
        try:
            rec = parse_record(line)
        except SaltbioError as exc:
            raise BackupError(str(exc), line=lineno) from None
        if rec.user_id in seen:
            raise BackupError(f"duplicate user {rec.user_id!r}", line=lineno)
        seen.add(rec.user_id)
        records.append(rec)
    node.store.replace_all(records)
    return len(records)
