import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from saltbio.audit_report import AuditLog  # noqa: E402
from saltbio.auth_core import TemplateStore, enroll  # noqa: E402
from saltbio.biometric import BiometricSample  # noqa: E402

T0 = 1_791_000_000  # 2026-10-03T02:40:00Z, start of a 60 s step
ALICE_BLOB = bytes(range(32))
ALICE_ALT_BLOB = bytes((7 * i + 3) % 256 for i in range(32))
MALLORY_BLOB = bytes((37 * i + 101) % 256 for i in range(32))
ALICE_SEED = 0x0123456789ABCDEF

ACCEPTANCE_RESULTS = []


def flip_bits(blob: bytes, positions) -> bytes:
    b = bytearray(blob)
    for p in positions:
        b[p // 8] ^= 0x80 >> (p % 8)
    return bytes(b)


@pytest.fixture
def store():
    return TemplateStore("A", log=AuditLog())


@pytest.fixture
def alice(store):
    enroll(
        store, "alice",
        [BiometricSample("fingerprint", ALICE_BLOB), BiometricSample("fingerprint", ALICE_ALT_BLOB)],
        "s3cret!", "break-glass", seed=ALICE_SEED, unix_time=T0,
    )
    return store.get("alice")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
