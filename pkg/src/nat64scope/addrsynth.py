"""IPv4-embedded IPv6 address synthesis and recovery (RFC 6052 layouts).

The embedded address occupies fixed bit windows that depend on the prefix
length; bits 64..71 are a reserved byte that must stay zero and is skipped
by the embedding::

    length  v4 bit windows (MSB = bit 0)
    /32     [32, 64)
    /40     [40, 64) + [72, 80)
    /48     [48, 64) + [72, 88)
    /56     [56, 64) + [72, 96)
    /64     [72, 104)
    /96     [96, 128)

All arithmetic below works on the address as a 128-bit integer.
"""

from __future__ import annotations

import ipaddress
from typing import Collection, Iterable

from .model import ALLOWED_PREFIX_LENGTHS, Nat64Prefix, PrefixKind

__all__ = [
    "NoEmbeddingFound",
    "PrefixMismatch",
    "synthesize",
    "extract_ipv4",
    "matches_prefix",
    "derive_prefix_from_answer",
]


class PrefixMismatch(ValueError):
    """The address does not fall under the given prefix."""


class NoEmbeddingFound(ValueError):
    """No supported layout embeds any of the expected IPv4 addresses."""


def _embed_bits(v4_int: int, length: int) -> int:
    """Return the 128-bit value contributed by the embedded IPv4 address."""
    if length == 96:
        return v4_int
    if length == 64:
        return v4_int << 24
    # Lengths 32..56 split around the reserved byte: the leading fragment
    # always ends at bit 64, the remainder resumes at bit 72.
    head_bits = 64 - length
    tail_bits = 32 - head_bits
    head = v4_int >> tail_bits
    tail = v4_int & ((1 << tail_bits) - 1)
    return (head << 64) | (tail << (56 - tail_bits))


def _extract_bits(addr_int: int, length: int) -> int:
    if length == 96:
        return addr_int & 0xFFFFFFFF
    if length == 64:
        return (addr_int >> 24) & 0xFFFFFFFF
    head_bits = 64 - length
    tail_bits = 32 - head_bits
    head = (addr_int >> 64) & ((1 << head_bits) - 1)
    tail = (addr_int >> (56 - tail_bits)) & ((1 << tail_bits) - 1)
    return (head << tail_bits) | tail


def synthesize(prefix: Nat64Prefix, v4: ipaddress.IPv4Address) -> ipaddress.IPv6Address:
    """Embed ``v4`` under ``prefix`` with all remaining bits zero."""
    if not isinstance(v4, ipaddress.IPv4Address):
        raise TypeError("v4 must be an IPv4Address")
    return ipaddress.IPv6Address(int(prefix.base) | _embed_bits(int(v4), prefix.length))


def matches_prefix(addr: ipaddress.IPv6Address, prefix: Nat64Prefix) -> bool:
    """True when the first ``prefix.length`` bits of ``addr`` equal the base."""
    shift = 128 - prefix.length
    return int(addr) >> shift == int(prefix.base) >> shift


def extract_ipv4(addr: ipaddress.IPv6Address, prefix: Nat64Prefix) -> ipaddress.IPv4Address:
    """Recover the embedded IPv4 address from an address under ``prefix``."""
    if not matches_prefix(addr, prefix):
        raise PrefixMismatch(f"{addr} is not under {prefix}")
    return ipaddress.IPv4Address(_extract_bits(int(addr), prefix.length))


def derive_prefix_from_answer(
    addr: ipaddress.IPv6Address,
    known_v4: Collection[ipaddress.IPv4Address],
    lengths: Iterable[int] = (),
) -> Nat64Prefix:
    """Recover the translation prefix from a synthesized AAAA answer.

    Tries every supported length, longest first, so /96 wins when several
    layouts embed a known address. A candidate only counts when rebuilding
    the address from the implied prefix reproduces it exactly, which forces
    the reserved byte and any suffix bits to zero.
    """
    known = {int(v4) for v4 in known_v4}
    addr_int = int(addr)
    order = tuple(lengths) or tuple(sorted(ALLOWED_PREFIX_LENGTHS, reverse=True))
    for length in order:
        candidate = _extract_bits(addr_int, length)
        if candidate not in known:
            continue
        base = ipaddress.IPv6Address(addr_int >> (128 - length) << (128 - length))
        standard = str(base) == "64:ff9b::" and length == 96
        prefix = Nat64Prefix(
            base, length, PrefixKind.STANDARD if standard else PrefixKind.CUSTOM
        )
        if int(synthesize(prefix, ipaddress.IPv4Address(candidate))) == addr_int:
            return prefix
    raise NoEmbeddingFound(f"{addr} embeds none of {len(known)} expected addresses")
