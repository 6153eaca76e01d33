import io
import json

import pytest

import oracles
from conftest import ALICE_BLOB, MALLORY_BLOB, T0
from saltbio.cli import run
from saltbio.salt_token import SaltDevice, code_at, code_for_step

SEED = "00000000000000aa"
DEV = SaltDevice(seed=0xAA)


def cli(*argv):
    out = io.StringIO()
    return run(list(argv), out), out.getvalue()


@pytest.fixture
def env(tmp_path):
    (tmp_path / "alice.bin").write_bytes(ALICE_BLOB)
    (tmp_path / "mallory.bin").write_bytes(MALLORY_BLOB)
    base = ["--store", str(tmp_path / "store.tsv"), "--log", str(tmp_path / "audit.jsonl"), "--server-id", "A"]
    rc, _ = cli(*base, "enroll", "--user", "alice", "--sample", str(tmp_path / "alice.bin"),
                "--password", "s3cret!", "--eam-password", "break-glass", "--seed", SEED, "--at", str(T0))
    assert rc == 0
    return tmp_path, base


def test_pipeline_trace():
    rc, out = cli("pipeline", "--password", "HELLO", "--salt", "34", "--e", "40")
    assert rc == 0
    fields = dict(line.split(": ", 1) for line in out.splitlines())
    expected = oracles.pipeline("HELLO", 34, 40, "multiply", 2, 3)
    assert fields["combined_value"] == "247172101086"
    assert fields["scaled_value"] == "9886884043440"
    assert fields["pre_code_bits"] == expected["pre_code_bits"]
    assert int(fields["template"]) == expected["template"]


def test_usage_errors():
    assert cli()[0] == 2
    assert cli("pipeline", "--password", "x")[0] == 2
    assert cli("salt", "--seed", "zz")[0] == 2


def test_keygen():
    rc, out = cli("keygen", "--p", "11", "--q", "13", "--d", "7")
    assert rc == 0 and "e: 103" in out
    assert cli("keygen", "--p", "11", "--q", "13", "--d", "3")[0] == 1


def test_salt():
    rc, out = cli("salt", "--seed", SEED, "--at", str(T0))
    assert out.strip() == code_at(DEV, T0)


def test_login_outcomes(env):
    tmp, base = env
    good = code_at(DEV, T0)
    rc, out = cli(*base, "login", "--user", "alice", "--sample", str(tmp / "alice.bin"),
                  "--password", "s3cret!", "--code", good, "--at", str(T0))
    assert rc == 0 and out.splitlines()[0] == "Accept"
    stale = code_for_step(DEV, T0 // 60 - 4)
    rc, out = cli(*base, "login", "--user", "alice", "--sample", str(tmp / "alice.bin"),
                  "--password", "s3cret!", "--code", stale, "--at", str(T0))
    assert rc == 0 and out.splitlines()[0] == "RejectSalt"
    lines = (tmp / "audit.jsonl").read_text().splitlines()
    assert [json.loads(l)["outcome"] for l in lines] == ["Enroll", "Accept", "RejectSalt"]


def test_eam_recovery(env):
    tmp, base = env
    code = code_at(DEV, T0)
    for _ in range(3):
        cli(*base, "login", "--user", "alice", "--sample", str(tmp / "mallory.bin"),
            "--password", "s3cret!", "--code", code, "--at", str(T0))
    rc, out = cli(*base, "login", "--user", "alice", "--sample", str(tmp / "alice.bin"),
                  "--password", "s3cret!", "--code", code, "--at", str(T0))
    assert out.startswith("LockedOut")
    rc, out = cli(*base, "eam", "--user", "alice", "--eam-password", "break-glass", "--code", code,
                  "--change-id", "CHG-9", "--approver", "mgr", "--action", "reset",
                  "--sample", str(tmp / "mallory.bin"), "--at", str(T0 + 5))
    assert rc == 0 and "EamReset: alice" in out
    rc, out = cli(*base, "login", "--user", "alice", "--sample", str(tmp / "mallory.bin"),
                  "--password", "s3cret!", "--code", code, "--at", str(T0 + 6))
    assert out.startswith("Accept")
    rc, _ = cli(*base, "eam", "--user", "alice", "--eam-password", "nope", "--code", code,
                "--change-id", "CHG-9", "--approver", "mgr", "--action", "reset",
                "--sample", str(tmp / "mallory.bin"), "--at", str(T0 + 7))
    assert rc == 1


def test_report(env):
    tmp, base = env
    code = code_at(DEV, T0)
    cli(*base, "login", "--user", "alice", "--sample", str(tmp / "alice.bin"),
        "--password", "s3cret!", "--code", code, "--at", str(T0))
    cli(*base, "login", "--user", "bob", "--sample", str(tmp / "alice.bin"),
        "--password", "s3cret!", "--code", code, "--at", str(T0))
    rc, out = cli(*base, "report", "--date", "2026-10-03", "--out", str(tmp / "eod.txt"))
    assert rc == 0
    summary = json.loads((tmp / "eod.txt").read_text().strip().splitlines()[-1])
    assert summary["accepts"] == 1 and summary["unknown_attempts"] == 1


def test_metrics(tmp_path):
    scores = tmp_path / "scores.txt"
    scores.write_text("genuine 0.05\ngenuine 0.1\nimpostor 0.4\nimpostor 0.5\n")
    rc, out = cli("metrics", "--scores", str(scores), "--grid-step", "0.25")
    assert rc == 0
    assert "roc 0.250000 0.000000 0.000000" in out
    assert out.splitlines()[-1] == "eer 0.000000 at 0.100000"


def test_backup_restore(env):
    tmp, base = env
    rc, out = cli(*base, "backup", "--out", str(tmp / "b.txt"), "--at", str(T0))
    assert rc == 0 and "exported: 1" in out
    other = ["--store", str(tmp / "s2.tsv"), "--log", str(tmp / "a2.jsonl"), "--server-id", "B"]
    rc, out = cli(*other, "restore", "--in", str(tmp / "b.txt"), "--at", str(T0))
    assert rc == 0 and "restored: 1" in out
    assert (tmp / "s2.tsv").read_text() == (tmp / "store.tsv").read_text()
    assert json.loads((tmp / "a2.jsonl").read_text())["outcome"] == "Restore"
    (tmp / "bad.txt").write_text("garbage\n")
    assert cli(*other, "restore", "--in", str(tmp / "bad.txt"))[0] == 1


def test_dry_run_writes_nothing(tmp_path):
    (tmp_path / "a.bin").write_bytes(ALICE_BLOB)
    rc, out = cli("--dry-run", "--store", str(tmp_path / "s.tsv"), "--log", str(tmp_path / "l.jsonl"),
                  "enroll", "--user", "u", "--sample", str(tmp_path / "a.bin"),
                  "--password", "p", "--eam-password", "q", "--at", str(T0))
    assert rc == 0 and "enrolled: u" in out
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.bin"]


def test_missing_file_is_domain_error(tmp_path):
    assert cli("metrics", "--scores", str(tmp_path / "nope"))[0] == 1
