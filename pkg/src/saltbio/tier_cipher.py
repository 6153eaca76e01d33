"""Three-tier template encoding.

Stage chain for a password::

    ascii digits -> salt combine -> scale by e -> radix bits
        -> 4B/5B substitution -> back to integer -> truncated sine series

Every integer stage is exact; the only rounding is the final one in
:func:`sine_tail`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .bitcodec import BitString, encode_4b5b, from_bits, to_bits
from .errors import (
    ConfigurationError,
    DomainError,
    NoInverseError,
    ParameterError,
    WeakKeyWarning,
)

COMBINE_MODES = ("multiply", "concat_digits")
GATES = ("OR", "AND", "XOR")
RADIXES = (2, 8, 16)
RECOMMENDED_PRIME_BITS = 2048


def is_prime(n: int) -> bool:
    """Miller-Rabin over the first 13 prime bases (deterministic below 3.3e24)."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for p in small:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """Extended Euclid: returns (g, x, y) with a*x + b*y == g == gcd(a, b)."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def modinv(a: int, m: int) -> int:
    g, x, _ = egcd(a % m, m)
    if g != 1:
        raise NoInverseError(f"{a} has no inverse modulo {m} (gcd = {g})")
    return x % m


@dataclass(frozen=True)
class RsaParams:
    p: int
    q: int
    n: int
    m: int
    d: int
    e: int

    def __post_init__(self):
        if self.n != self.p * self.q or self.m != (self.p - 1) * (self.q - 1):
            raise ParameterError("inconsistent RSA modulus/totient")
        if (self.d * self.e) % self.m != 1:
            raise ParameterError("d*e is not 1 modulo the totient")


def keygen(p: int, q: int, d: int) -> RsaParams:
    """Build the key pair for primes ``p``, ``q`` and chosen decryption exponent ``d``.

    ``e`` is the inverse of ``d`` modulo ``(p-1)(q-1)``. Primes below 2048 bits
    are accepted but raise a :class:`WeakKeyWarning`.
    """
    if not (is_prime(p) and is_prime(q)):
        raise ParameterError(f"p and q must be prime, got {p}, {q}")
    if p == q:
        raise ParameterError("p and q must be distinct")
    m = (p - 1) * (q - 1)
    if not 1 < d < m:
        raise ParameterError(f"d must satisfy 1 < d < {m}")
    e = modinv(d, m)
    if min(p.bit_length(), q.bit_length()) < RECOMMENDED_PRIME_BITS:
        warnings.warn(
            f"RSA primes of {min(p.bit_length(), q.bit_length())} bits are below "
            f"the recommended {RECOMMENDED_PRIME_BITS}",
            WeakKeyWarning,
            stacklevel=2,
        )
    return RsaParams(p=p, q=q, n=p * q, m=m, d=d, e=e)


def _default_rsa() -> RsaParams:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakKeyWarning)
        return keygen(11, 13, 7)


@dataclass(frozen=True)
class PipelineConfig:
    """Tunables for the template pipeline.

    ``e`` overrides the scaling factor; when ``None`` the RSA encryption
    exponent is used.
    """

    rsa: RsaParams = field(default_factory=_default_rsa)
    e: Optional[int] = None
    salt_combine_mode: str = "multiply"
    radix: int = 2
    series_terms: int = 3
    gate: str = "OR"

    def __post_init__(self):
        if self.salt_combine_mode not in COMBINE_MODES:
            raise ConfigurationError(f"salt_combine_mode must be one of {COMBINE_MODES}")
        if self.radix not in RADIXES:
            raise ConfigurationError(f"radix must be one of {RADIXES}")
        if self.gate not in GATES:
            raise ConfigurationError(f"gate must be one of {GATES}")
        if not isinstance(self.series_terms, int) or self.series_terms < 0:
            raise ConfigurationError("series_terms must be a non-negative integer")
        if self.e is not None and self.e < 1:
            raise ConfigurationError("e must be >= 1")

    @property
    def scale(self) -> int:
        return self.e if self.e is not None else self.rsa.e


@dataclass(frozen=True)
class StageTrace:
    ascii_value: int
    combined_value: int
    scaled_value: int
    pre_code_bits: BitString
    coded_bits: BitString
    recoded_value: int
    series_sum: Fraction
    template: int

    def lines(self) -> list[str]:
        return [
            f"ascii_value: {self.ascii_value}",
            f"combined_value: {self.combined_value}",
            f"scaled_value: {self.scaled_value}",
            f"pre_code_bits: {self.pre_code_bits}",
            f"coded_bits: {self.coded_bits}",
            f"recoded_value: {self.recoded_value}",
            f"series_sum: {self.series_sum.numerator}/{self.series_sum.denominator}",
            f"template: {self.template}",
        ]


def ascii_digits(password: str) -> int:
    """Concatenate the decimal ASCII codes of ``password`` into one integer.

    >>> ascii_digits("HELLO")
    7269767679
    """
    if not isinstance(password, str) or not password:
        raise DomainError("password must be a non-empty string")
    codes = [ord(c) for c in password]
    if any(c < 32 or c > 126 for c in codes):
        raise DomainError("password must be printable ASCII (codes 32-126)")
    return int("".join(str(c) for c in codes))


def salt_combine(value: int, salt: int, mode: str = "multiply") -> int:
    if value < 0 or salt < 0:
        raise DomainError("salt_combine operands must be non-negative")
    if mode == "multiply":
        return value * salt
    if mode == "concat_digits":
        return int(f"{value}{salt}")
    raise ConfigurationError(f"unknown salt combine mode {mode!r}")


def scale_by_e(value: int, e: int) -> int:
    if value < 0 or e < 1:
        raise DomainError("scale_by_e needs value >= 0 and e >= 1")
    return value * e


def round_half_away(q: Fraction) -> int:
    r = math.floor(abs(q) + Fraction(1, 2))
    return r if q >= 0 else -r


def sine_tail(x: int, k: int) -> tuple[Fraction, int]:
    """Exact Maclaurin sine through the x**(2k+1) term.

    Returns the rational sum and ``|round(sum)|`` with half-away-from-zero
    rounding.
    """
    if x < 0 or k < 0:
        raise DomainError("sine_tail needs x >= 0 and k >= 0")
    total = Fraction(0)
    term = Fraction(x)  # x**(2i+1) / (2i+1)!
    x2 = x * x
    for i in range(k + 1):
        if i:
            term = term * x2 / ((2 * i) * (2 * i + 1))
        total += -term if i % 2 else term
    return total, abs(round_half_away(total))


def encrypt_password(password: str, salt: int, cfg: PipelineConfig | None = None) -> StageTrace:
    cfg = cfg or PipelineConfig()
    a = ascii_digits(password)
    c = salt_combine(a, salt, cfg.salt_combine_mode)
    s = scale_by_e(c, cfg.scale)
    pre = to_bits(s, cfg.radix)
    coded = encode_4b5b(pre)
    recoded = from_bits(coded)
    total, template = sine_tail(recoded, cfg.series_terms)
    return StageTrace(a, c, s, pre, coded, recoded, total, template)


def template_from_bits(fused: BitString, cfg: PipelineConfig | None = None) -> tuple[int, int]:
    """Run fused biometric/credential bits through substitution and the series."""
    cfg = cfg or PipelineConfig()
    if not len(fused):
        raise DomainError("fused bits must be non-empty")
    recoded = from_bits(encode_4b5b(fused))
    return recoded, sine_tail(recoded, cfg.series_terms)[1]


def validate_trace(trace: StageTrace, password: str, salt: int, cfg: PipelineConfig) -> list[str]:
    """Recompute each stage from its predecessor; return names of inconsistent fields."""
    bad = []
    if trace.ascii_value != ascii_digits(password):
        bad.append("ascii_value")
    if trace.combined_value != salt_combine(trace.ascii_value, salt, cfg.salt_combine_mode):
        bad.append("combined_value")
    if trace.scaled_value != scale_by_e(trace.combined_value, cfg.scale):
        bad.append("scaled_value")
    if trace.pre_code_bits != to_bits(trace.scaled_value, cfg.radix):
        bad.append("pre_code_bits")
    if trace.coded_bits != encode_4b5b(trace.pre_code_bits):
        bad.append("coded_bits")
    if trace.recoded_value != from_bits(trace.coded_bits):
        bad.append("recoded_value")
    total, template = sine_tail(trace.recoded_value, cfg.series_terms)
    if trace.series_sum != total:
        bad.append("series_sum")
    if trace.template != template:
        bad.append("template")
    return bad
