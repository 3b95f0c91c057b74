"""Line-delimited JSON dataset: one header, then probe/test/traceroute records.

Encoding is canonical (sorted keys, no whitespace), so writing the same
dataset twice produces identical bytes. Loading validates every record and
cross-checks that runs and paths reference known probes.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, List, Optional, Tuple, Union

from ..model import (
    Hop,
    Nat64Prefix,
    PathFamily,
    PrefixKind,
    ProbeRecord,
    RawOutcome,
    TestKind,
    TestRun,
    TraceroutePath,
    validate,
)

SCHEMA_VERSION = 1


class DatasetError(ValueError):
    """The file is not a well-formed dataset; details list the offenders."""

    def __init__(self, problems: List[str]):
        self.problems = problems
        shown = "; ".join(problems[:8])
        more = f" (+{len(problems) - 8} more)" if len(problems) > 8 else ""
        super().__init__(f"{len(problems)} problem(s): {shown}{more}")


@dataclass
class Dataset:
    """Everything one capture produced, keyed for the analysis stages."""

    probes: "dict[str, ProbeRecord]" = field(default_factory=dict)
    runs: List[TestRun] = field(default_factory=list)
    paths: List[TraceroutePath] = field(default_factory=list)
    capture_window: Optional[Tuple[int, int]] = None
    schema: int = SCHEMA_VERSION

    def add_probe(self, probe: ProbeRecord) -> None:
        if probe.probe_id in self.probes:
            raise DatasetError([f"duplicate probe {probe.probe_id}"])
        self.probes[probe.probe_id] = probe


def _encode_prefix(prefix: Optional[Nat64Prefix]):
    if prefix is None:
        return None
    return {"base": str(prefix.base), "length": prefix.length, "kind": prefix.kind.value}


def _decode_prefix(doc) -> Optional[Nat64Prefix]:
    if doc is None:
        return None
    return Nat64Prefix(
        ipaddress.IPv6Address(doc["base"]), doc["length"], PrefixKind(doc["kind"])
    )


def encode_record(record: object) -> dict:
    """Map one model record to its JSON document."""
    if isinstance(record, ProbeRecord):
        return {
            "record": "probe",
            "probe_id": record.probe_id,
            "asn_v4": record.asn_v4,
            "asn_v6": record.asn_v6,
            "resolvers": [str(r) for r in record.resolvers],
            "tags": list(record.tags),
            "network_prefix_v6": (
                str(record.network_prefix_v6) if record.network_prefix_v6 else None
            ),
        }
    if isinstance(record, TestRun):
        return {
            "record": "test_run",
            "probe_id": record.probe_id,
            "test_kind": record.test_kind.value,
            "timestamp": record.timestamp,
            "raw_outcome": record.raw_outcome.value,
            "observed_prefix": _encode_prefix(record.observed_prefix),
            "resolver_used": str(record.resolver_used) if record.resolver_used else None,
            "diagnostic": record.diagnostic,
        }
    if isinstance(record, TraceroutePath):
        return {
            "record": "traceroute",
            "probe_id": record.probe_id,
            "family": record.family.value,
            "prefix": _encode_prefix(record.prefix),
            "target_v4": str(record.target_v4),
            "round": record.round_index,
            "hops": [
                {
                    "index": hop.index,
                    "address": str(hop.address) if hop.address else None,
                    "rtts_ms": list(hop.rtts_ms),
                }
                for hop in record.hops
            ],
        }
    raise TypeError(f"cannot encode {type(record).__name__}")


def decode_record(doc: dict) -> object:
    kind = doc.get("record")
    if kind == "probe":
        return ProbeRecord(
            probe_id=doc["probe_id"],
            asn_v4=doc["asn_v4"],
            asn_v6=doc["asn_v6"],
            resolvers=tuple(ipaddress.ip_address(r) for r in doc["resolvers"]),
            tags=tuple(doc["tags"]),
            network_prefix_v6=(
                ipaddress.IPv6Network(doc["network_prefix_v6"])
                if doc["network_prefix_v6"]
                else None
            ),
        )
    if kind == "test_run":
        return TestRun(
            probe_id=doc["probe_id"],
            test_kind=TestKind(doc["test_kind"]),
            timestamp=doc["timestamp"],
            raw_outcome=RawOutcome(doc["raw_outcome"]),
            observed_prefix=_decode_prefix(doc["observed_prefix"]),
            resolver_used=(
                ipaddress.ip_address(doc["resolver_used"]) if doc["resolver_used"] else None
            ),
            diagnostic=doc.get("diagnostic"),
        )
    if kind == "traceroute":
        return TraceroutePath(
            probe_id=doc["probe_id"],
            family=PathFamily(doc["family"]),
            prefix=_decode_prefix(doc["prefix"]),
            target_v4=ipaddress.IPv4Address(doc["target_v4"]),
            round_index=doc["round"],
            hops=tuple(
                Hop(
                    index=h["index"],
                    address=ipaddress.ip_address(h["address"]) if h["address"] else None,
                    rtts_ms=tuple(h["rtts_ms"]),
                )
                for h in doc["hops"]
            ),
        )
    raise DatasetError([f"unknown record kind {kind!r}"])


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def write_dataset(dataset: Dataset, out: Union[str, IO[str]]) -> None:
    """Write the canonical line-delimited form; same dataset, same bytes."""
    own = isinstance(out, str)
    handle = open(out, "w", encoding="ascii") if own else out
    try:
        header = {
            "record": "header",
            "schema": dataset.schema,
            "capture_window": list(dataset.capture_window) if dataset.capture_window else None,
        }
        handle.write(_dump(header) + "\n")
        for probe in dataset.probes.values():
            handle.write(_dump(encode_record(probe)) + "\n")
        for run in dataset.runs:
            handle.write(_dump(encode_record(run)) + "\n")
        for path in dataset.paths:
            handle.write(_dump(encode_record(path)) + "\n")
    finally:
        if own:
            handle.close()


def load_dataset(source: Union[str, IO[str], Iterable[str]]) -> Dataset:
    """Parse and validate; raises DatasetError naming every offender found."""
    own = isinstance(source, str)
    handle = open(source, "r", encoding="ascii") if own else source
    problems: List[str] = []
    dataset = Dataset()
    try:
        lines = iter(enumerate(handle, start=1))
        try:
            _, first = next(lines)
        except StopIteration:
            raise DatasetError(["file is empty, expected a header line"])
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise DatasetError([f"line 1: {exc}"])
        if header.get("record") != "header":
            raise DatasetError(["line 1 is not a header record"])
        if header.get("schema") != SCHEMA_VERSION:
            raise DatasetError([f"unsupported schema {header.get('schema')!r}"])
        window = header.get("capture_window")
        dataset.capture_window = tuple(window) if window else None

        for lineno, line in lines:
            line = line.strip()
            if not line:
                continue
            try:
                record = decode_record(json.loads(line))
            except (DatasetError, KeyError, ValueError) as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            for violation in validate(record):
                problems.append(f"line {lineno}: {violation}")
            if isinstance(record, ProbeRecord):
                if record.probe_id in dataset.probes:
                    problems.append(f"line {lineno}: duplicate probe {record.probe_id}")
                else:
                    dataset.probes[record.probe_id] = record
            elif isinstance(record, TestRun):
                dataset.runs.append(record)
            elif isinstance(record, TraceroutePath):
                dataset.paths.append(record)
    finally:
        if own:
            handle.close()

    for run in dataset.runs:
        if run.probe_id not in dataset.probes:
            problems.append(f"test run references unknown probe {run.probe_id}")
    for path in dataset.paths:
        if path.probe_id not in dataset.probes:
            problems.append(f"traceroute references unknown probe {path.probe_id}")
    if problems:
        raise DatasetError(problems)
    return dataset
