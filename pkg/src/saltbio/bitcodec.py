"""Radix conversion and block substitution coding on bit strings.

Bit strings are most-significant-bit first and keep their leading zeros, so
``BitString("0001") != BitString("1")``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .errors import ConfigurationError, DomainError, FramingError, InvalidSymbolError

__all__ = [
    "BitString",
    "SubstitutionTable",
    "BlockCodec",
    "TABLE_4B5B",
    "DEFAULT_CODEC",
    "to_bits",
    "from_bits",
    "encode_4b5b",
    "decode_4b5b",
]

_BITS = frozenset("01")


@dataclass(frozen=True)
class BitString:
    bits: str = ""

    def __post_init__(self):
        if not isinstance(self.bits, str):
            raise DomainError(f"BitString expects a str of 0/1, got {type(self.bits).__name__}")
        if not _BITS.issuperset(self.bits):
            raise DomainError(f"BitString may only contain '0' and '1': {self.bits!r}")

    @classmethod
    def from_iterable(cls, values: Iterable[int]) -> BitString:
        return cls("".join("1" if v else "0" for v in values))

    @classmethod
    def zeros(cls, n: int) -> BitString:
        return cls("0" * n)

    def __str__(self) -> str:
        return self.bits

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[int]:
        return (1 if c == "1" else 0 for c in self.bits)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return BitString(self.bits[item])
        return 1 if self.bits[item] == "1" else 0

    def __add__(self, other: BitString) -> BitString:
        if not isinstance(other, BitString):
            return NotImplemented
        return BitString(self.bits + other.bits)

    def lpad(self, width: int) -> BitString:
        """Left-pad with zeros to ``width`` (no-op if already that long)."""
        return BitString(self.bits.rjust(width, "0"))

    def count(self) -> int:
        return self.bits.count("1")

    def to_hex(self) -> str:
        """Hex rendering for lengths that are a multiple of 4 (width preserved)."""
        if len(self.bits) % 4:
            raise FramingError("hex rendering needs a length divisible by 4")
        if not self.bits:
            return ""
        return format(int(self.bits, 2), f"0{len(self.bits) // 4}x")

    @classmethod
    def from_hex(cls, text: str, length: int) -> BitString:
        try:
            value = int(text, 16) if text else 0
        except ValueError:
            raise DomainError(f"not a hex string: {text!r}") from None
        if value.bit_length() > length:
            raise DomainError(f"hex value does not fit in {length} bits")
        return cls(format(value, "b").rjust(length, "0") if length else "")


def _as_bits(b) -> BitString:
    return b if isinstance(b, BitString) else BitString(b)


_GROUP_WIDTH = {8: 3, 16: 4}


def to_bits(n: int, radix: int = 2) -> BitString:
    """Render ``n`` as bits.

    Radix 2 gives the minimal binary expansion ("0" for zero). Radix 8 and 16
    emit every base-8/16 digit as a fixed 3- or 4-bit group.
    """
    if radix not in (2, 8, 16):
        raise ConfigurationError(f"unsupported radix {radix}; expected 2, 8 or 16")
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise DomainError(f"to_bits needs a non-negative integer, got {n!r}")
    if radix == 2:
        return BitString(format(n, "b"))
    width = _GROUP_WIDTH[radix]
    digits = format(n, "o" if radix == 8 else "x")
    return BitString("".join(format(int(d, radix), f"0{width}b") for d in digits))


def from_bits(b) -> int:
    b = _as_bits(b)
    if not len(b):
        raise DomainError("from_bits needs a non-empty bit string")
    return int(b.bits, 2)


class SubstitutionTable:
    """Fixed-width block substitution: ``in_width``-bit words to ``out_width``-bit symbols."""

    def __init__(self, forward: Mapping[str, str], name: str = "custom"):
        if not forward:
            raise ConfigurationError("substitution table is empty")
        in_widths = {len(k) for k in forward}
        out_widths = {len(v) for v in forward.values()}
        if len(in_widths) != 1 or len(out_widths) != 1:
            raise ConfigurationError("substitution table entries must have uniform widths")
        self.in_width = in_widths.pop()
        self.out_width = out_widths.pop()
        if len(forward) != 2 ** self.in_width:
            raise ConfigurationError("substitution table must cover every input word")
        for k, v in forward.items():
            if not (_BITS.issuperset(k) and _BITS.issuperset(v)):
                raise ConfigurationError(f"non-binary table entry {k!r} -> {v!r}")
        reverse = {v: k for k, v in forward.items()}
        if len(reverse) != len(forward):
            raise ConfigurationError("substitution table is not injective")
        self.name = name
        self.forward = dict(forward)
        self.reverse = reverse

    def __repr__(self):
        return f"SubstitutionTable({self.name!r}, {self.in_width}B/{self.out_width}B)"


# Transcribed table; kept verbatim rather than re-derived from any line-coding standard.
TABLE_4B5B = SubstitutionTable(
    {
        "0000": "11110",
        "0001": "01001",
        "0010": "10100",
        "0011": "10101",
        "0100": "01010",
        "0101": "01011",
        "0110": "01110",
        "0111": "01111",
        "1000": "10010",
        "1001": "10011",
        "1010": "10110",
        "1011": "10111",
        "1100": "11010",
        "1101": "11011",
        "1110": "11100",
        "1111": "11101",
    },
    name="4B/5B",
)


class BlockCodec:
    def __init__(self, table: SubstitutionTable = TABLE_4B5B):
        self.table = table

    def encode(self, b) -> BitString:
        b = _as_bits(b)
        w = self.table.in_width
        padded = b.lpad(-(-len(b) // w) * w).bits
        fwd = self.table.forward
        return BitString("".join(fwd[padded[i:i + w]] for i in range(0, len(padded), w)))

    def decode(self, b) -> BitString:
        b = _as_bits(b)
        w = self.table.out_width
        if len(b) % w:
            raise FramingError(f"input length {len(b)} is not a multiple of {w}")
        rev = self.table.reverse
        out = []
        for idx, i in enumerate(range(0, len(b), w)):
            sym = b.bits[i:i + w]
            try:
                out.append(rev[sym])
            except KeyError:
                raise InvalidSymbolError(idx, sym) from None
        return BitString("".join(out))


DEFAULT_CODEC = BlockCodec(TABLE_4B5B)


def encode_4b5b(b) -> BitString:
    """Left-pad to a nibble boundary, then substitute each nibble via TABLE_4B5B."""
    return DEFAULT_CODEC.encode(b)


def decode_4b5b(b) -> BitString:
    return DEFAULT_CODEC.decode(b)
