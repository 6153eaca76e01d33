"""Command-line entry point: ``saltbio <subcommand> ...``.

Exit codes: 0 success (a rejected login is still a success), 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import warnings
from pathlib import Path

from . import eam as eam_mod
from .audit_report import AuditLog, AuthEvent, Outcome, consolidate, eod_report, from_rfc3339, read_events, write_report
from .auth_core import TemplateStore, enroll, login
from .biometric import MODALITIES, BiometricSample
from .errors import SaltbioError, WeakKeyWarning
from .eval_metrics import det_points, eer, parse_scores, roc_points
from .federation import (
    NodeServer,
    ServerNode,
    SocketTransport,
    export_store,
    import_store,
    parse_addr,
    remote_login,
)
from .salt_token import SaltDevice, code_at
from .tier_cipher import PipelineConfig, encrypt_password, keygen

DEFAULT_STORE = "saltbio_store.tsv"
DEFAULT_LOG = "saltbio_audit.jsonl"

log = logging.getLogger("saltbio")


def parse_time(text: str) -> int:
    if text.isdigit():
        return int(text)
    try:
        return from_rfc3339(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a unix time or RFC 3339 timestamp: {text!r}") from None


def parse_hex(text: str) -> int:
    try:
        return int(text, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex number: {text!r}") from None


def parse_peer(text: str) -> tuple[str, tuple[str, int]]:
    name, sep, addr = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"peer must look like name=host:port, got {text!r}")
    try:
        return name, parse_addr(addr)
    except SaltbioError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _pipeline_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline")
    g.add_argument("--p", type=int, default=11, help="first RSA prime")
    g.add_argument("--q", type=int, default=13, help="second RSA prime")
    g.add_argument("--d", type=int, default=7, help="RSA decryption exponent")
    g.add_argument("--e", type=int, default=None, help="scaling factor (defaults to the RSA e)")
    g.add_argument("--combine", choices=("multiply", "concat_digits"), default="multiply")
    g.add_argument("--radix", type=int, choices=(2, 8, 16), default=2)
    g.add_argument("--k", type=int, default=3, help="sine series terms after the first")
    g.add_argument("--gate", choices=("OR", "AND", "XOR"), default="OR")
    return p


def _time_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--at", type=parse_time, default=None, help="unix seconds or RFC 3339 (default: now)")
    return p


def build_parser() -> argparse.ArgumentParser:
    pipe, when = _pipeline_parent(), _time_parent()
    parser = argparse.ArgumentParser(prog="saltbio", description=__doc__.splitlines()[0])
    parser.add_argument("--store", default=os.environ.get("SALTBIO_STORE", DEFAULT_STORE))
    parser.add_argument("--log", default=DEFAULT_LOG, help="audit log (JSON lines)")
    parser.add_argument("--server-id", default="local")
    parser.add_argument("--max-refs", type=int, default=4)
    parser.add_argument("--max-users", type=int, default=100)
    parser.add_argument("--tau", type=float, default=0.15)
    parser.add_argument("--dry-run", action="store_true", help="compute and print, write nothing")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("keygen", help="RSA parameters for primes p, q and exponent d")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--d", type=int, required=True)

    p = sub.add_parser("pipeline", parents=[pipe], help="print the stage trace for a password")
    p.add_argument("--password", required=True)
    p.add_argument("--salt", type=int, required=True)

    p = sub.add_parser("salt", parents=[when], help="salt code of a device at a time")
    p.add_argument("--seed", type=parse_hex, required=True, help="64-bit seed in hex")
    p.add_argument("--digits", type=int, default=6)
    p.add_argument("--step-seconds", type=int, default=60)

    p = sub.add_parser("enroll", parents=[when], help="enroll a user")
    p.add_argument("--user", required=True)
    p.add_argument("--sample", action="append", required=True, help="raw sample file (repeatable)")
    p.add_argument("--modality", choices=MODALITIES, default="fingerprint")
    p.add_argument("--password", required=True)
    p.add_argument("--eam-password", required=True)
    p.add_argument("--seed", type=parse_hex, default=None)

    p = sub.add_parser("login", parents=[pipe, when], help="attempt a login")
    p.add_argument("--user", required=True)
    p.add_argument("--sample", required=True)
    p.add_argument("--modality", choices=MODALITIES, default="fingerprint")
    p.add_argument("--password", required=True)
    p.add_argument("--code", required=True)
    p.add_argument("--home", default=None, help="home server of the user (referral login)")
    p.add_argument("--peer", type=parse_peer, action="append", default=[])

    p = sub.add_parser("eam", parents=[pipe, when], help="emergency access operations")
    p.add_argument("--user", required=True)
    p.add_argument("--eam-password", required=True)
    p.add_argument("--code", required=True)
    p.add_argument("--change-id", required=True)
    p.add_argument("--approver", action="append", required=True)
    p.add_argument("--approval-status", choices=("Approved", "Rejected", "Pending"), default="Approved")
    p.add_argument("--action", choices=("update", "reset", "add"), required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--sample", action="append", default=[])
    p.add_argument("--modality", choices=MODALITIES, default="fingerprint")
    p.add_argument("--new-user")
    p.add_argument("--new-password")
    p.add_argument("--new-eam-password")
    p.add_argument("--new-seed", type=parse_hex, default=None)

    p = sub.add_parser("report", help="end-of-day report from audit logs")
    p.add_argument("--date", required=True, help="UTC date YYYY-MM-DD")
    p.add_argument("--input", action="append", default=[], help="extra audit logs to consolidate")
    p.add_argument("--server", action="append", default=[], help="restrict to these servers")
    p.add_argument("--out", default=None, help="write the consolidated report here")

    p = sub.add_parser("metrics", help="FAR/FRR/ROC/DET/EER from a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--grid-step", type=float, default=0.05)

    p = sub.add_parser("serve", help="run a node speaking the line protocol")
    p.add_argument("--id", required=True)
    p.add_argument("--listen", required=True)
    p.add_argument("--peer", type=parse_peer, action="append", default=[])

    p = sub.add_parser("backup", parents=[when], help="export the store")
    p.add_argument("--out", required=True)

    p = sub.add_parser("restore", parents=[when], help="replace the store from a backup")
    p.add_argument("--in", dest="infile", required=True)
    return parser


def _config(args) -> PipelineConfig:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakKeyWarning)
        rsa = keygen(args.p, args.q, args.d)
    return PipelineConfig(
        rsa=rsa, e=args.e, salt_combine_mode=args.combine, radix=args.radix,
        series_terms=args.k, gate=args.gate,
    )


def _open_store(args, server_id=None) -> TemplateStore:
    server_id = server_id or args.server_id
    limits = dict(max_refs=args.max_refs, max_users=args.max_users, tau=args.tau)
    if args.dry_run:
        store = TemplateStore(server_id, None, AuditLog(None), **limits)
        path = Path(args.store)
        if path.exists():
            store.load_text(path.read_text(encoding="utf-8"))
        return store
    return TemplateStore(server_id, args.store, AuditLog(args.log), **limits)


def _now(args) -> int:
    return int(time.time()) if getattr(args, "at", None) is None else args.at


def _sample(path: str, modality: str) -> BiometricSample:
    return BiometricSample(modality, Path(path).read_bytes())


def cmd_keygen(args, out):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", WeakKeyWarning)
        rsa = keygen(args.p, args.q, args.d)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for name in ("p", "q", "n", "m", "d", "e"):
        print(f"{name}: {getattr(rsa, name)}", file=out)
    return 0


def cmd_pipeline(args, out):
    for line in encrypt_password(args.password, args.salt, _config(args)).lines():
        print(line, file=out)
    return 0


def cmd_salt(args, out):
    dev = SaltDevice(seed=args.seed, digits=args.digits, step_seconds=args.step_seconds)
    t = _now(args)
    print(code_at(dev, t), file=out)
    return 0


def cmd_enroll(args, out):
    store = _open_store(args)
    rec = enroll(
        store, args.user, [_sample(p, args.modality) for p in args.sample],
        args.password, args.eam_password, seed=args.seed, unix_time=_now(args),
    )
    print(f"enrolled: {rec.user_id}", file=out)
    print(f"references: {len(rec.references)}", file=out)
    print(f"seed: {rec.device.seed:016x}", file=out)
    return 0


def cmd_login(args, out):
    store = _open_store(args)
    sample = _sample(args.sample, args.modality)
    cfg, t = _config(args), _now(args)
    if args.home and args.home != store.server_id:
        node = ServerNode(store.server_id, store, cfg=cfg)
        for name, (host, port) in args.peer:
            node.add_peer(name, SocketTransport(host, port))
        result = remote_login(node, args.home, args.user, sample, args.password, args.code, t)
    else:
        result = login(store, args.user, sample, args.password, args.code, t, cfg)
    print(result.outcome.value, file=out)
    if result.distance is not None:
        print(f"distance: {result.distance:.6f}", file=out)
    if result.matched_reference is not None:
        print(f"matched_reference: {result.matched_reference}", file=out)
    return 0


def cmd_eam(args, out):
    store = _open_store(args)
    cfg, t = _config(args), _now(args)
    approval = eam_mod.ChangeApproval(args.change_id, tuple(args.approver), args.approval_status)
    session = eam_mod.eam_open(store, args.user, args.eam_password, args.code, t, approval)
    samples = [_sample(p, args.modality) for p in args.sample]
    if args.action in ("update", "reset") and not samples:
        raise SaltbioError(f"--sample is required for {args.action}")
    if args.action == "update":
        ack = eam_mod.eam_update_reference(session, store, args.index, samples[0], t, cfg)
    elif args.action == "reset":
        ack = eam_mod.eam_reset_references(session, store, samples, t, cfg)
    else:
        if not (args.new_user and args.new_password and args.new_eam_password and samples):
            raise SaltbioError("add needs --new-user, --new-password, --new-eam-password and --sample")
        ack = eam_mod.eam_add_profile(
            session, store, args.new_user, samples, args.new_password, args.new_eam_password, t, cfg,
            seed=args.new_seed,
        )
    eam_mod.close(session, store)
    print(f"{ack.op}: {ack.user_id}", file=out)
    print(f"references: {ack.references}", file=out)
    print(f"change_id: {ack.change_id}", file=out)
    return 0


def cmd_report(args, out):
    events = []
    for path in [args.log, *args.input]:
        if Path(path).exists():
            events.extend(read_events(path))
    servers = args.server or sorted({e.server_id for e in events})
    reports = [eod_report(events, s, args.date) for s in servers]
    for rep in reports:
        out.write(rep.render())
        out.write("\n")
    total = consolidate(reports) if reports else consolidate([], "ALL")
    total.date = total.date or args.date
    out.write(total.render())
    if args.out and not args.dry_run:
        write_report(total, args.out)
    return 0


def cmd_metrics(args, out):
    with open(args.scores, encoding="utf-8") as fh:
        scores = parse_scores(fh)
    n = int(round(1.0 / args.grid_step))
    grid = [round(i * args.grid_step, 10) for i in range(n + 1)]
    print("# tau far frr", file=out)
    for t, a, r in roc_points(scores, grid):
        print(f"roc {t:.6f} {a:.6f} {r:.6f}", file=out)
    for t, a, r, pa, pr in det_points(scores, grid):
        print(f"det {t:.6f} {pa:.6f} {pr:.6f}", file=out)
    tau_star, value = eer(scores)
    print(f"eer {value:.6f} at {tau_star:.6f}", file=out)
    return 0


def cmd_serve(args, out):
    store = _open_store(args, server_id=args.id)
    node = ServerNode(args.id, store)
    for name, (host, port) in args.peer:
        node.add_peer(name, SocketTransport(host, port))
    server = NodeServer(node, parse_addr(args.listen))
    print(f"serving {args.id} on {args.listen}", file=out)
    out.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_backup(args, out):
    store = _open_store(args)
    artifact = export_store(ServerNode(store.server_id, store), _now(args))
    if not args.dry_run:
        Path(args.out).write_text(artifact, encoding="utf-8")
    print(f"exported: {len(store)} records", file=out)
    return 0


def cmd_restore(args, out):
    store = _open_store(args)
    n = import_store(ServerNode(store.server_id, store), Path(args.infile).read_text(encoding="utf-8"))
    store.log.append(AuthEvent(_now(args), store.server_id, "*", Outcome.RESTORE, f"file:{args.infile}"))
    print(f"restored: {n} records", file=out)
    return 0


COMMANDS = {
    "keygen": cmd_keygen,
    "pipeline": cmd_pipeline,
    "salt": cmd_salt,
    "enroll": cmd_enroll,
    "login": cmd_login,
    "eam": cmd_eam,
    "report": cmd_report,
    "metrics": cmd_metrics,
    "serve": cmd_serve,
    "backup": cmd_backup,
    "restore": cmd_restore,
}


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args, out)
    except (SaltbioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
