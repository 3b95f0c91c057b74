"""Live measurement drivers: DNS queries, ICMP echo, UDP traceroute.

Everything here degrades cleanly when run without privileges or network:
errors surface as typed exceptions and never as partial records. The
traceroute and echo loops accept injected probe callables so the whole
pipeline can run against simulated topologies.
"""

from __future__ import annotations

import ipaddress
import os
import random
import select
import socket
import struct
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

from ..model import Hop, Nat64Prefix, PathFamily, TraceroutePath
from ..addrsynth import extract_ipv4
from .dnswire import (
    DnsResponse,
    DnsStatus,
    MalformedDns,
    build_query,
    canonical_name,
    parse_message,
)

IPAddress = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]


class ProbePermissionError(PermissionError):
    """The platform refused the socket type this measurement needs."""


class NoRouteError(OSError):
    """No route toward the target: the address family likely has no uplink."""


@dataclass(frozen=True, slots=True)
class EchoReply:
    """One echo attempt; rtt_ms is None when no reply arrived in time."""

    seq: int
    rtt_ms: Optional[float]


def dns_query(
    resolver: Union[IPAddress, str],
    qname: str,
    qtype: int,
    *,
    timeout_s: float = 3.0,
    port: int = 53,
    txid: Optional[int] = None,
    rng: random.Random = random,
) -> DnsResponse:
    """One UDP exchange with one resolver; wire errors become statuses."""
    address = ipaddress.ip_address(resolver)
    if txid is None:
        txid = rng.randrange(0, 0x10000)
    family = socket.AF_INET if address.version == 4 else socket.AF_INET6
    query = build_query(qname, qtype, txid)
    name = canonical_name(qname)
    with socket.socket(family, socket.SOCK_DGRAM) as sock:
        sock.settimeout(timeout_s)
        try:
            sock.sendto(query, (str(address), port))
            deadline = time.monotonic() + timeout_s
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return DnsResponse(address, name, qtype, DnsStatus.TIMEOUT)
                sock.settimeout(remaining)
                wire, _ = sock.recvfrom(4096)
                try:
                    message = parse_message(wire)
                except MalformedDns:
                    return DnsResponse(address, name, qtype, DnsStatus.MALFORMED)
                if message.txid != txid or not message.is_response:
                    continue  # stray datagram, keep waiting
                return DnsResponse(address, name, qtype, message.status, message.answers)
        except socket.timeout:
            return DnsResponse(address, name, qtype, DnsStatus.TIMEOUT)
        except OSError as exc:
            if exc.errno in (101, 113):  # ENETUNREACH, EHOSTUNREACH
                raise NoRouteError(str(exc)) from exc
            raise


def _open_icmp6_socket() -> socket.socket:
    try:
        return socket.socket(socket.AF_INET6, socket.SOCK_DGRAM, socket.IPPROTO_ICMPV6)
    except PermissionError:
        pass
    try:
        return socket.socket(socket.AF_INET6, socket.SOCK_RAW, socket.IPPROTO_ICMPV6)
    except PermissionError as exc:
        raise ProbePermissionError(
            "need an ICMPv6 socket; enable ping sockets or run privileged"
        ) from exc


def icmp_echo(
    target: ipaddress.IPv6Address,
    *,
    count: int = 3,
    timeout_s: float = 1.0,
    interval_s: float = 0.0,
) -> Tuple[EchoReply, ...]:
    """Send ``count`` echo requests; always returns one entry per request."""
    ident = os.getpid() & 0xFFFF
    replies: List[EchoReply] = []
    with _open_icmp6_socket() as sock:
        for seq in range(count):
            payload = struct.pack("!HHd", ident, seq, time.monotonic())
            packet = struct.pack("!BBH", 128, 0, 0) + payload  # echo request
            sent = time.monotonic()
            try:
                sock.sendto(packet, (str(target), 0))
            except OSError as exc:
                if exc.errno in (101, 113):
                    raise NoRouteError(str(exc)) from exc
                raise
            deadline = sent + timeout_s
            rtt: Optional[float] = None
            while rtt is None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                ready, _, _ = select.select([sock], [], [], remaining)
                if not ready:
                    break
                wire, _ = sock.recvfrom(2048)
                if len(wire) < 8 or wire[0] != 129:  # echo reply
                    continue
                r_ident, r_seq = struct.unpack_from("!HH", wire, 4)
                if r_seq == seq:
                    rtt = (time.monotonic() - sent) * 1000.0
            replies.append(EchoReply(seq, rtt))
            if interval_s and seq + 1 < count:
                time.sleep(interval_s)
    return tuple(replies)


#: A prober answers one (ttl, packet_index) probe with (hop address, rtt ms),
#: either of which may be None for silence or a missing timestamp.
Prober = Callable[[int, int], Tuple[Optional[IPAddress], Optional[float]]]


class _UdpProber:
    """Classic UDP high-port probing with a fixed flow identity.

    Source and destination ports stay constant across packets so per-flow
    load balancers keep every probe on one path.
    """

    def __init__(self, target: IPAddress, port: int, timeout_s: float):
        self.target = target
        self.port = port
        self.timeout_s = timeout_s
        if target.version == 4:
            send_family, icmp_proto = socket.AF_INET, socket.IPPROTO_ICMP
            self._ttl_opt = (socket.IPPROTO_IP, socket.IP_TTL)
        else:
            send_family, icmp_proto = socket.AF_INET6, socket.IPPROTO_ICMPV6
            self._ttl_opt = (socket.IPPROTO_IPV6, socket.IPV6_UNICAST_HOPS)
        try:
            self.send_sock = socket.socket(send_family, socket.SOCK_DGRAM)
            self.recv_sock = socket.socket(send_family, socket.SOCK_RAW, icmp_proto)
        except PermissionError as exc:
            raise ProbePermissionError(
                "raw ICMP receive socket required for traceroute"
            ) from exc
        self.send_sock.bind(("", 0))
        self.src_port = self.send_sock.getsockname()[1]

    def close(self) -> None:
        self.send_sock.close()
        self.recv_sock.close()

    def _match_v4(self, wire: bytes) -> Optional[ipaddress.IPv4Address]:
        """Return the reporting hop when an ICMP error quotes our flow."""
        if len(wire) < 20:
            return None
        ihl = (wire[0] & 0xF) * 4
        source = ipaddress.IPv4Address(wire[12:16])
        icmp = wire[ihl:]
        if len(icmp) < 8 or icmp[0] not in (11, 3):  # time exceeded, unreachable
            return None
        inner = icmp[8:]  # quoted IPv4 header + leading UDP bytes
        if len(inner) < 24:
            return None
        inner_ihl = (inner[0] & 0xF) * 4
        udp = inner[inner_ihl:]
        if len(udp) < 4:
            return None
        sport, dport = struct.unpack_from("!HH", udp, 0)
        return source if (sport, dport) == (self.src_port, self.port) else None

    def _quotes_flow_v6(self, wire: bytes) -> bool:
        # The kernel strips the outer IPv6 header on raw ICMPv6 sockets.
        if len(wire) < 8 or wire[0] not in (3, 1):  # time exceeded, unreachable
            return False
        inner = wire[8:]  # quoted IPv6 header + leading UDP bytes
        if len(inner) < 44:
            return False
        sport, dport = struct.unpack_from("!HH", inner, 40)
        return (sport, dport) == (self.src_port, self.port)

    def __call__(self, ttl: int, packet_index: int) -> Tuple[Optional[IPAddress], Optional[float]]:
        self.send_sock.setsockopt(*self._ttl_opt, ttl)
        sent = time.monotonic()
        try:
            self.send_sock.sendto(b"nat64scope", (str(self.target), self.port))
        except OSError as exc:
            if exc.errno in (101, 113):
                raise NoRouteError(str(exc)) from exc
            raise
        deadline = sent + self.timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None, None
            ready, _, _ = select.select([self.recv_sock], [], [], remaining)
            if not ready:
                return None, None
            wire, peer = self.recv_sock.recvfrom(4096)
            if self.target.version == 4:
                hop: Optional[IPAddress] = self._match_v4(wire)
            elif self._quotes_flow_v6(wire):
                hop = ipaddress.IPv6Address(peer[0])
            else:
                hop = None
            if hop is not None:
                return hop, (time.monotonic() - sent) * 1000.0


def udp_traceroute(
    target: IPAddress,
    *,
    probe_id: str,
    prefix: Optional[Nat64Prefix] = None,
    round_index: int = 0,
    max_ttl: int = 32,
    packets_per_hop: int = 3,
    timeout_s: float = 4.0,
    port: int = 33434,
    prober: Optional[Prober] = None,
) -> TraceroutePath:
    """Trace toward ``target``, stopping once a hop answers as the target.

    An IPv6 target must come with the translation prefix it was built
    from, so the resulting path knows its IPv4 destination. Hops are
    contiguous from TTL 1; silent TTLs become address-less hops.
    """
    if target.version == 6:
        if prefix is None:
            raise ValueError("an IPv6 target needs its translation prefix")
        family = PathFamily.NAT64
        target_v4 = extract_ipv4(target, prefix)
    else:
        family = PathFamily.IPV4
        target_v4 = target
        prefix = None

    own = None
    if prober is None:
        own = _UdpProber(target, port, timeout_s)
        prober = own
    hops: List[Hop] = []
    try:
        for ttl in range(1, max_ttl + 1):
            address: Optional[IPAddress] = None
            rtts: List[float] = []
            for packet in range(packets_per_hop):
                hop_addr, rtt = prober(ttl, packet)
                if hop_addr is not None and address is None:
                    address = hop_addr
                if rtt is not None:
                    rtts.append(rtt)
            hops.append(Hop(ttl, address, tuple(rtts) if address is not None else ()))
            if address == target:
                break
    finally:
        if own is not None:
            own.close()
    return TraceroutePath(
        probe_id=probe_id,
        family=family,
        prefix=prefix,
        target_v4=target_v4,
        round_index=round_index,
        hops=tuple(hops),
    )
