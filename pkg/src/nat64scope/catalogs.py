"""Loadable side tables: public resolvers, public gateways, AS categories.

Each loader reads a user-editable text file; with no path given it falls
back to the copy shipped inside the package.
"""

from __future__ import annotations

import ipaddress
from importlib import resources
from typing import List, Optional, Tuple

from .model import IPAddress, Nat64Prefix


def _packaged(name: str) -> str:
    return resources.files("nat64scope").joinpath("data", name).read_text("ascii")


def _data_lines(text: str) -> List[str]:
    lines = []
    for line in text.splitlines():
        stripped = line.split("#", 1)[0].strip()
        if stripped:
            lines.append(stripped)
    return lines


def load_public_resolvers(path: Optional[str] = None) -> Tuple[IPAddress, ...]:
    """Addresses of public resolvers that synthesize AAAA records."""
    if path is None:
        text = _packaged("public_resolvers.txt")
    else:
        with open(path, "r", encoding="ascii") as handle:
            text = handle.read()
    return tuple(ipaddress.ip_address(line) for line in _data_lines(text))


def load_public_prefixes(path: Optional[str] = None) -> Tuple[Nat64Prefix, ...]:
    """Translation prefixes of openly usable gateways."""
    if path is None:
        text = _packaged("public_nat64.txt")
    else:
        with open(path, "r", encoding="ascii") as handle:
            text = handle.read()
    return tuple(Nat64Prefix.from_cidr(line) for line in _data_lines(text))


def packaged_as_categories_path() -> str:
    """Filesystem path of the shipped AS category table."""
    return str(resources.files("nat64scope").joinpath("data", "as_categories.txt"))
