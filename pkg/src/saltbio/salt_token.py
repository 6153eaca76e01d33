"""Rotating numeric salt codes, one per fixed time step.

The generator is a pinned 64-bit mixer over the step index, so codes are
reproducible bit-for-bit. Callers always pass the time explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import FormatError, ParameterError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


@dataclass(frozen=True)
class SaltDevice:
    seed: int
    digits: int = 6
    step_seconds: int = 60

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if not 4 <= self.digits <= 9:
            raise ParameterError("digits must be between 4 and 9")
        if self.step_seconds < 1:
            raise ParameterError("step_seconds must be >= 1")

    def step(self, unix_time: int) -> int:
        return unix_time // self.step_seconds


def mix(seed: int, step: int) -> int:
    u = (seed ^ (step * _GOLDEN)) & _MASK64
    u = ((u ^ (u >> 33)) * _MIX1) & _MASK64
    u = ((u ^ (u >> 29)) * _MIX2) & _MASK64
    return u ^ (u >> 32)


def code_for_step(dev: SaltDevice, step: int) -> str:
    return str(mix(dev.seed, step) % 10 ** dev.digits).zfill(dev.digits)


def code_at(dev: SaltDevice, unix_time: int) -> str:
    if unix_time < 0:
        raise ParameterError("unix_time must be non-negative")
    return code_for_step(dev, dev.step(unix_time))


def check_format(dev: SaltDevice, code) -> str:
    if not isinstance(code, str) or len(code) != dev.digits or not code.isascii() or not code.isdigit():
        raise FormatError(f"salt code must be exactly {dev.digits} decimal digits, got {code!r}")
    return code


def validate(dev: SaltDevice, code: str, unix_time: int, skew_steps: int = 1) -> tuple[bool, Optional[int]]:
    """Check ``code`` against the steps within ``skew_steps`` of ``unix_time``.

    Returns ``(accepted, offset)`` where ``offset`` is the code's step minus
    the current step (``None`` when rejected). Offsets are tried nearest
    first, past before future.
    """
    check_format(dev, code)
    if unix_time < 0:
        raise ParameterError("unix_time must be non-negative")
    current = dev.step(unix_time)
    offsets = [0]
    for k in range(1, skew_steps + 1):
        offsets += [-k, k]
    for off in offsets:
        if current + off >= 0 and code_for_step(dev, current + off) == code:
            return True, off
    return False, None
