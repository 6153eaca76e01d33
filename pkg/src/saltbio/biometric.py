"""Simulated biometric capture, feature bits, fusion and Hamming matching."""

from __future__ import annotations

from dataclasses import dataclass

from .bitcodec import BitString, to_bits
from .errors import ComparisonError, DomainError, ParameterError
from .tier_cipher import GATES, ascii_digits

MODALITIES = ("fingerprint", "iris", "voice", "other")
DEFAULT_LENGTH = 256


@dataclass(frozen=True)
class BiometricSample:
    modality: str
    blob: bytes

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ParameterError(f"unknown modality {self.modality!r}")
        if not self.blob:
            raise DomainError("biometric blob must be non-empty")


@dataclass(frozen=True)
class FeatureTemplate:
    bits: BitString
    modality: str = "fingerprint"

    @property
    def length(self) -> int:
        return len(self.bits)

    def dumps(self) -> str:
        return f"L={self.length} modality={self.modality}\n{self.bits}\n"

    @classmethod
    def loads(cls, text: str) -> FeatureTemplate:
        lines = text.splitlines()
        if len(lines) < 2:
            raise DomainError("template file needs a header line and a bits line")
        try:
            fields = dict(part.split("=", 1) for part in lines[0].split())
            length = int(fields["L"])
            modality = fields["modality"]
        except (KeyError, ValueError):
            raise DomainError(f"bad template header {lines[0]!r}") from None
        bits = BitString(lines[1].strip())
        if len(bits) != length:
            raise DomainError(f"template declares L={length} but has {len(bits)} bits")
        return cls(bits, modality)


def feature_bits(sample: BiometricSample, length: int = DEFAULT_LENGTH) -> FeatureTemplate:
    """Expand the blob MSB-first and repeat it cyclically to exactly ``length`` bits."""
    if length <= 0 or length % 8:
        raise ParameterError("template length must be a positive multiple of 8")
    raw = "".join(format(b, "08b") for b in sample.blob)
    reps = -(-length // len(raw))
    return FeatureTemplate(BitString((raw * reps)[:length]), sample.modality)


def credential_bits_from_digits(password_digits: int, salt_code) -> BitString:
    return to_bits(password_digits, 2) + to_bits(int(salt_code), 2)


def credential_bits(password: str, salt_code) -> BitString:
    """Binary of the password's ASCII digits followed by binary of the salt code."""
    return credential_bits_from_digits(ascii_digits(password), salt_code)


_OPS = {
    "OR": lambda a, b: a | b,
    "AND": lambda a, b: a & b,
    "XOR": lambda a, b: a ^ b,
}


def fuse(bio: BitString, cred: BitString, gate: str = "OR") -> BitString:
    """Bitwise gate after left-padding the shorter operand with zeros."""
    if gate not in GATES:
        raise ParameterError(f"gate must be one of {GATES}")
    if not len(bio) or not len(cred):
        raise DomainError("fuse operands must be non-empty")
    width = max(len(bio), len(cred))
    value = _OPS[gate](int(bio.bits, 2), int(cred.bits, 2))
    return BitString(format(value, "b").rjust(width, "0"))


def hamming(a: BitString, b: BitString) -> int:
    if len(a) != len(b):
        raise ComparisonError(f"length mismatch: {len(a)} vs {len(b)}")
    return sum(x != y for x, y in zip(a.bits, b.bits))


def distance(ref: FeatureTemplate, probe: FeatureTemplate) -> float:
    if ref.modality != probe.modality:
        raise ComparisonError(f"modality mismatch: {ref.modality} vs {probe.modality}")
    if ref.length != probe.length or ref.length == 0:
        raise ComparisonError(f"length mismatch: {ref.length} vs {probe.length}")
    return hamming(ref.bits, probe.bits) / ref.length


def match(ref: FeatureTemplate, probe: FeatureTemplate, tau: float = 0.15) -> tuple[bool, float]:
    if not 0.0 <= tau <= 1.0:
        raise ParameterError("tau must lie in [0, 1]")
    d = distance(ref, probe)
    return d <= tau, d
