"""Live probing drivers, exercised against local mocks and scripted probers."""

import ipaddress
import socket
import threading

import pytest

from nat64scope.acquire.dnswire import (
    DnsStatus,
    TYPE_AAAA,
    answer_for,
    build_response,
    parse_message,
)
from nat64scope.acquire.live import (
    EchoReply,
    ProbePermissionError,
    _open_icmp6_socket,
    dns_query,
    icmp_echo,
    udp_traceroute,
)
from nat64scope.addrsynth import synthesize
from nat64scope.model import Nat64Prefix, PathFamily

PREFIX = Nat64Prefix.from_cidr("2001:db8:64::/96")
TARGET = ipaddress.IPv4Address("198.51.100.10")


class MockResolver:
    """A one-thread UDP DNS64 that answers from a scripted behavior."""

    def __init__(self, behavior):
        self.behavior = behavior
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind(("127.0.0.1", 0))
        self.sock.settimeout(5.0)
        self.address = self.sock.getsockname()
        self.thread = threading.Thread(target=self._serve, daemon=True)
        self._stop = threading.Event()

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        # Unblock the recv with a spare datagram.
        poke = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        poke.sendto(b"", self.address)
        poke.close()
        self.thread.join(timeout=5.0)
        self.sock.close()

    def _serve(self):
        while not self._stop.is_set():
            try:
                wire, peer = self.sock.recvfrom(4096)
            except socket.timeout:
                return
            if self._stop.is_set() or not wire:
                return
            for reply in self.behavior(wire):
                self.sock.sendto(reply, peer)


def synthesizing_behavior(wire):
    query = parse_message(wire)
    answer = answer_for(query.qname, synthesize(PREFIX, ipaddress.IPv4Address("192.0.0.170")))
    yield build_response(query.txid, query.qname, query.qtype, (answer,))


class TestDnsQuery:
    def test_synthesized_answer(self):
        with MockResolver(synthesizing_behavior) as server:
            response = dns_query(
                "127.0.0.1", "ipv4only.arpa", TYPE_AAAA,
                port=server.address[1], timeout_s=2.0,
            )
        assert response.status is DnsStatus.NOERROR
        assert response.qname == "ipv4only.arpa."
        assert response.addresses() == (synthesize(PREFIX, ipaddress.IPv4Address("192.0.0.170")),)

    def test_servfail(self):
        def behavior(wire):
            query = parse_message(wire)
            yield build_response(query.txid, query.qname, query.qtype, (), rcode=2)

        with MockResolver(behavior) as server:
            response = dns_query(
                "127.0.0.1", "example.net", TYPE_AAAA,
                port=server.address[1], timeout_s=2.0,
            )
        assert response.status is DnsStatus.SERVFAIL
        assert response.addresses() == ()

    def test_stray_txid_is_ignored(self):
        def behavior(wire):
            query = parse_message(wire)
            wrong = (query.txid + 1) & 0xFFFF
            yield build_response(wrong, query.qname, query.qtype, ())
            answer = answer_for(query.qname, ipaddress.ip_address("2001:db8::1"))
            yield build_response(query.txid, query.qname, query.qtype, (answer,))

        with MockResolver(behavior) as server:
            response = dns_query(
                "127.0.0.1", "example.net", TYPE_AAAA,
                port=server.address[1], timeout_s=2.0, txid=77,
            )
        assert response.status is DnsStatus.NOERROR
        assert len(response.answers) == 1

    def test_malformed_reply(self):
        def behavior(wire):
            yield b"\x00\x4d\x80"  # txid 0x004d, truncated header

        with MockResolver(behavior) as server:
            response = dns_query(
                "127.0.0.1", "example.net", TYPE_AAAA,
                port=server.address[1], timeout_s=2.0, txid=0x004D,
            )
        assert response.status is DnsStatus.MALFORMED

    def test_timeout(self):
        def behavior(wire):
            return ()

        with MockResolver(behavior) as server:
            response = dns_query(
                "127.0.0.1", "example.net", TYPE_AAAA,
                port=server.address[1], timeout_s=0.2,
            )
        assert response.status is DnsStatus.TIMEOUT
        assert response.answers == ()


def scripted_prober(script):
    """Map (ttl) -> (address string or None, rtt) lookups into a Prober."""

    def prober(ttl, packet_index):
        addr, rtt = script.get(ttl, (None, None))
        address = ipaddress.ip_address(addr) if addr else None
        return address, rtt

    return prober


class TestUdpTraceroute:
    def test_stops_at_target(self):
        script = {
            1: ("192.0.2.1", 0.5),
            2: (None, None),
            3: (str(TARGET), 8.0),
            4: ("192.0.2.99", 9.0),  # must never be asked
        }
        path = udp_traceroute(
            TARGET, probe_id="p1", prober=scripted_prober(script), packets_per_hop=2,
        )
        assert path.family is PathFamily.IPV4
        assert path.prefix is None
        assert len(path.hops) == 3
        assert path.hops[1].address is None and path.hops[1].rtts_ms == ()
        assert path.hops[2].address == TARGET
        assert path.hops[2].rtts_ms == (8.0, 8.0)

    def test_translated_target_carries_prefix(self):
        wanted = synthesize(PREFIX, TARGET)
        script = {1: (str(wanted), 3.0)}
        path = udp_traceroute(
            wanted, probe_id="p1", prefix=PREFIX, round_index=4,
            prober=scripted_prober(script),
        )
        assert path.family is PathFamily.NAT64
        assert path.prefix == PREFIX
        assert path.target_v4 == TARGET
        assert path.round_index == 4
        assert len(path.hops) == 1

    def test_v6_target_without_prefix_rejected(self):
        with pytest.raises(ValueError):
            udp_traceroute(
                ipaddress.ip_address("2001:db8::1"), probe_id="p1",
                prober=scripted_prober({}),
            )

    def test_max_ttl_exhaustion(self):
        path = udp_traceroute(
            TARGET, probe_id="p1", max_ttl=5, prober=scripted_prober({}),
        )
        assert len(path.hops) == 5
        assert all(h.address is None for h in path.hops)

    def test_first_address_wins_but_all_rtts_kept(self):
        answers = iter([("192.0.2.1", 1.0), ("192.0.2.2", 2.0), (str(TARGET), 3.0)])

        def prober(ttl, packet_index):
            addr, rtt = next(answers)
            return ipaddress.ip_address(addr), rtt

        path = udp_traceroute(
            TARGET, probe_id="p1", max_ttl=1, packets_per_hop=3, prober=prober,
        )
        hop = path.hops[0]
        assert str(hop.address) == "192.0.2.1"
        assert hop.rtts_ms == (1.0, 2.0, 3.0)

    def test_hop_indices_contiguous(self):
        script = {2: ("192.0.2.2", 1.0), 5: (str(TARGET), 2.0)}
        path = udp_traceroute(
            TARGET, probe_id="p1", prober=scripted_prober(script), packets_per_hop=1,
        )
        assert [h.index for h in path.hops] == [1, 2, 3, 4, 5]


class TestIcmpEcho:
    def test_loopback_echo_if_permitted(self):
        try:
            sock = _open_icmp6_socket()
        except (ProbePermissionError, OSError):
            pytest.skip("no ICMPv6 socket in this environment")
        sock.close()
        replies = icmp_echo(ipaddress.IPv6Address("::1"), count=2, timeout_s=1.0)
        assert len(replies) == 2
        assert all(isinstance(r, EchoReply) for r in replies)
        assert all(r.seq == i for i, r in enumerate(replies))

    def test_reply_shape(self):
        reply = EchoReply(0, 1.25)
        assert reply.rtt_ms == 1.25
        lost = EchoReply(1, None)
        assert lost.rtt_ms is None
