from dataclasses import replace

import pytest

import oracles
from conftest import ALICE_ALT_BLOB, ALICE_BLOB, ALICE_SEED, MALLORY_BLOB, T0, flip_bits
from saltbio.audit_report import AuditLog, Outcome
from saltbio.auth_core import (
    LOCKED,
    TemplateStore,
    cached_template,
    enroll,
    expected_template,
    format_record,
    login,
    parse_record,
    refresh_templates,
)
from saltbio.biometric import BiometricSample
from saltbio.errors import CapacityError, ConflictError, DomainError, ParameterError
from saltbio.eval_metrics import store_capacity
from saltbio.salt_token import code_at, code_for_step
from saltbio.tier_cipher import PipelineConfig, ascii_digits

FP = "fingerprint"
CFG = PipelineConfig()


def sample(blob):
    return BiometricSample(FP, blob)


def oracle_template(ref_bits: str, password: str, code: str, k=3) -> int:
    cred = oracles.binary_by_division(oracles.ascii_concat(password)) + oracles.binary_by_division(int(code))
    return oracles.fused_template(oracles.bitwise(ref_bits, cred, "OR"), k)[1]


def test_enroll_basic(store, alice):
    assert len(alice.references) == 2
    assert alice.status == "Active" and alice.failed_count == 0
    assert alice.password_digits == ascii_digits("s3cret!")
    assert [e.outcome for e in store.log.events()] == [Outcome.ENROLL]


def test_enroll_errors(store, alice):
    with pytest.raises(ConflictError):
        enroll(store, "alice", [sample(ALICE_BLOB)], "x", "y", unix_time=T0)
    with pytest.raises(ParameterError):
        enroll(store, "bob", [], "x", "y", unix_time=T0)
    with pytest.raises(CapacityError):
        enroll(store, "bob", [sample(ALICE_BLOB)] * 5, "x", "y", unix_time=T0)


def test_capacity_fill():
    store = TemplateStore("A", max_users=3, max_refs=2)
    stored = 0
    with pytest.raises(CapacityError):
        for i in range(10):
            enroll(store, f"u{i}", [sample(bytes([i]) * 4)] * 2, "pw", "eam", seed=i, unix_time=T0)
            stored += 2
    assert stored == store_capacity(store) == 6


def test_expected_template_oracle(alice):
    code = code_at(alice.device, T0)
    ref = str(alice.references[0].bits)
    assert expected_template(alice, 0, T0, CFG) == oracle_template(ref, "s3cret!", code)
    assert expected_template(alice, 0, T0, CFG) == expected_template(alice, 0, T0, CFG)


def test_expected_template_step_boundaries(alice):
    base = expected_template(alice, 0, T0, CFG)
    for dt in (1, 30, 59):
        assert expected_template(alice, 0, T0 + dt, CFG) == base
    changed = sum(expected_template(alice, 0, T0 + 60 * s, CFG) != base for s in range(1, 21))
    assert changed == 20


def test_truth_table(store, alice):
    dev = alice.device
    code = code_at(dev, T0)
    n0 = len(store.log)

    r = login(store, "alice", sample(ALICE_BLOB), "s3cret!", code, T0, CFG)
    assert r.outcome == Outcome.ACCEPT and r.matched_reference == 0 and r.distance == 0.0
    ref = str(alice.references[0].bits)
    assert r.template_value == oracle_template(ref, "s3cret!", code)

    noisy = flip_bits(ALICE_ALT_BLOB, range(0, 256, 32))
    r = login(store, "alice", sample(noisy), "s3cret!", code, T0, CFG)
    assert r.outcome == Outcome.ACCEPT and r.matched_reference == 1 and r.distance == 8 / 256

    stale = code_for_step(dev, T0 // 60 - 2)
    assert login(store, "alice", sample(ALICE_BLOB), "s3cret!", stale, T0, CFG).outcome == Outcome.REJECT_SALT
    assert login(store, "alice", sample(ALICE_BLOB), "s3cret!", "12ab", T0, CFG).outcome == Outcome.REJECT_SALT
    assert login(store, "nobody", sample(ALICE_BLOB), "s3cret!", code, T0, CFG).outcome == Outcome.UNKNOWN_USER

    assert login(store, "alice", sample(ALICE_BLOB), "wrong-pw", code, T0, CFG).outcome == Outcome.REJECT_TEMPLATE
    assert store.get("alice").failed_count == 1
    assert login(store, "alice", sample(ALICE_BLOB), "s3cret!", code, T0, CFG).outcome == Outcome.ACCEPT
    assert store.get("alice").failed_count == 0

    for i in range(3):
        assert login(store, "alice", sample(MALLORY_BLOB), "s3cret!", code, T0, CFG).outcome == Outcome.REJECT_BIOMETRIC
    assert store.get("alice").status == LOCKED
    assert login(store, "alice", sample(ALICE_BLOB), "s3cret!", code, T0, CFG).outcome == Outcome.LOCKED_OUT
    assert store.get("alice").failed_count == 3
    assert len(store.log) - n0 == 11


def test_previous_step_code_is_accepted(store, alice):
    prev = code_at(alice.device, T0)
    r = login(store, "alice", sample(ALICE_BLOB), "s3cret!", prev, T0 + 60, CFG)
    assert r.outcome == Outcome.ACCEPT
    assert r.template_value == expected_template(alice, 0, T0, CFG)


def test_non_ascii_password_is_rejected_not_raised(store, alice):
    code = code_at(alice.device, T0)
    assert login(store, "alice", sample(ALICE_BLOB), "pässword", code, T0, CFG).outcome == Outcome.REJECT_TEMPLATE


def test_accept_impossible_without_salt(store, alice):
    dev = alice.device
    window = {code_for_step(dev, T0 // 60 + o) for o in (-1, 0, 1)}
    for i in range(200):
        c = f"{i:06d}"
        if c in window:
            continue
        assert login(store, "alice", sample(ALICE_BLOB), "s3cret!", c, T0, CFG).outcome == Outcome.REJECT_SALT
    assert store.get("alice").failed_count == 0


def test_refresh_templates(store, alice):
    enroll(store, "bob", [sample(MALLORY_BLOB)], "hunter2", "eam", seed=5, unix_time=T0)
    assert refresh_templates(store, T0, CFG) == 3
    assert refresh_templates(store, T0 + 30, CFG) == 0
    assert refresh_templates(store, T0 + 60, CFG) == 3
    for user, idx in (("alice", 0), ("alice", 1), ("bob", 0)):
        assert cached_template(store, user, idx, CFG) == expected_template(store.get(user), idx, T0 + 60, CFG)


def test_store_file_round_trip(tmp_path, alice, store):
    path = tmp_path / "store.tsv"
    disk = TemplateStore("A", path)
    enroll(disk, "alice", [sample(ALICE_BLOB), BiometricSample("iris", ALICE_ALT_BLOB)], "s3cret!", "eam",
           seed=ALICE_SEED, unix_time=T0)
    text = path.read_text()
    fields = text.rstrip("\n").split("\t")
    assert fields[0] == "1" and fields[1] == "alice" and fields[5] == "0123456789abcdef"
    assert fields[3].split(";")[0] == "256:" + bytes(range(32)).hex()
    again = TemplateStore("A", path)
    assert again.get("alice") == disk.get("alice")
    assert again.dump_text() == text


def test_parse_record_errors(alice):
    line = format_record(alice)
    assert parse_record(line) == alice
    for bad in [line.replace("\tActive\t", "\tZombie\t"), "2" + line[1:], line + "\textra",
                line.replace("256:", "256:0")]:
        with pytest.raises(DomainError):
            parse_record(bad)


def test_records_are_copies(store, alice):
    rec = store.get("alice")
    replaced = replace(rec, failed_count=2)
    assert store.get("alice").failed_count == 0
    assert replaced is not store.get("alice")


def test_noiseless_probes_never_rejected(store):
    import random
    rng = random.Random(11)
    for i in range(10):
        blob = bytes(rng.randrange(256) for _ in range(32))
        enroll(store, f"u{i}", [sample(blob)], f"pw{i}", "eam", seed=i + 1, unix_time=T0)
        rec = store.get(f"u{i}")
        r = login(store, f"u{i}", sample(blob), f"pw{i}", code_at(rec.device, T0), T0, CFG)
        assert r.outcome == Outcome.ACCEPT
