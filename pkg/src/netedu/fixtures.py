"""Built-in capture and exercise-bank fixtures.

`write_demo_bank(dir)` materializes a small self-contained exercise bank
(one question of each type plus the three-way-handshake capture) that the
HTTP service, the CLI and the test suite all share.

Run `python -m netedu.fixtures BANKDIR` to write the bank to disk.
"""

from __future__ import annotations

import json
import struct
import sys
from pathlib import Path

from .dissect import Capture, LinkType, TimedPacket, write_pcap

CLIENT_MAC = bytes.fromhex("02aabbcc0001")
SERVER_MAC = bytes.fromhex("02aabbcc0002")
CLIENT_IP = bytes([10, 0, 0, 1])
SERVER_IP = bytes([10, 0, 0, 2])
CLIENT_PORT = 49321
SERVER_PORT = 80
CLIENT_ISN = 0xABCDEF12  # 2882400018
SERVER_ISN = 0x1EE7C0DE  # 518898910


def _cksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f">{len(data) // 2}H", data))
    while total > 0xFFFF:
        total = (total & 0xFFFF) + (total >> 16)
    return total ^ 0xFFFF


def build_tcp_packet(src_ip: bytes, dst_ip: bytes, src_mac: bytes,
                     dst_mac: bytes, sport: int, dport: int, seq: int,
                     ack: int, flags: int, window: int = 65535,
                     payload: bytes = b"") -> bytes:
    """Ethernet/IPv4/TCP packet with valid checksums. flags: raw byte
    (0x02 SYN, 0x12 SYN+ACK, 0x10 ACK)."""
    tcp = struct.pack(">HHIIBBHHH", sport, dport, seq, ack, 5 << 4, flags,
                      window, 0, 0) + payload
    pseudo = src_ip + dst_ip + struct.pack(">BBH", 0, 6, len(tcp))
    tck = _cksum(pseudo + tcp)
    tcp = tcp[:16] + struct.pack(">H", tck) + tcp[18:]
    total_len = 20 + len(tcp)
    ip = struct.pack(">BBHHHBBH", 0x45, 0, total_len, 0x3157, 0x4000, 64, 6,
                     0) + src_ip + dst_ip
    ick = _cksum(ip)
    ip = ip[:10] + struct.pack(">H", ick) + ip[12:]
    eth = dst_mac + src_mac + struct.pack(">H", 0x0800)
    return eth + ip + tcp


def build_udp_packet(src_ip: bytes, dst_ip: bytes, sport: int, dport: int,
                     payload: bytes, checksum: bool = True) -> bytes:
    udp = struct.pack(">HHHH", sport, dport, 8 + len(payload), 0) + payload
    if checksum:
        pseudo = src_ip + dst_ip + struct.pack(">BBH", 0, 17, len(udp))
        ck = _cksum(pseudo + udp) or 0xFFFF
        udp = udp[:6] + struct.pack(">H", ck) + udp[8:]
    total_len = 20 + len(udp)
    ip = struct.pack(">BBHHHBBH", 0x45, 0, total_len, 0x7a2b, 0x4000, 64, 17,
                     0) + src_ip + dst_ip
    ick = _cksum(ip)
    ip = ip[:10] + struct.pack(">H", ick) + ip[12:]
    eth = SERVER_MAC + CLIENT_MAC + struct.pack(">H", 0x0800)
    return eth + ip + udp


def make_handshake_capture() -> Capture:
    """The TCP three-way handshake: SYN, SYN+ACK, ACK (chronological order)."""
    syn = build_tcp_packet(CLIENT_IP, SERVER_IP, CLIENT_MAC, SERVER_MAC,
                           CLIENT_PORT, SERVER_PORT, CLIENT_ISN, 0, 0x02,
                           window=64240)
    synack = build_tcp_packet(SERVER_IP, CLIENT_IP, SERVER_MAC, CLIENT_MAC,
                              SERVER_PORT, CLIENT_PORT, SERVER_ISN,
                              CLIENT_ISN + 1, 0x12, window=65160)
    ack = build_tcp_packet(CLIENT_IP, SERVER_IP, CLIENT_MAC, SERVER_MAC,
                           CLIENT_PORT, SERVER_PORT, CLIENT_ISN + 1,
                           SERVER_ISN + 1, 0x10, window=64240)
    base = 1_700_000_000_000_000
    return Capture(LinkType.ETHERNET, [
        TimedPacket(base, syn),
        TimedPacket(base + 180, synack),
        TimedPacket(base + 410, ack),
    ])


DEMO_EXERCISES = [
    {
        "id": "mcq-ack-meaning",
        "type": "mcq",
        "prompt": "A cumulative acknowledgment carrying number N tells the "
                  "sender that ...",
        "n": 3,
        "correct": [
            {"text": "all bytes/segments before N were received and N is "
                     "expected next",
             "comment": "Right: cumulative ACKs name the next expected "
                        "sequence number, implicitly confirming everything "
                        "before it."},
            {"text": "the receiver is still missing the data numbered N",
             "comment": "Correct: N has not arrived yet, which is exactly "
                        "why the receiver keeps asking for it."},
        ],
        "incorrect": [
            {"text": "only the segment numbered N was received",
             "comment": "No: that would be a selective acknowledgment. A "
                        "cumulative ACK covers the whole prefix before N."},
            {"text": "segment N arrived corrupted",
             "comment": "No: corrupted segments are usually discarded "
                        "silently; the ACK number never signals corruption."},
            {"text": "the sender must reduce its window to N",
             "comment": "No: flow control uses a separate window field, not "
                        "the acknowledgment number."},
            {"text": "the connection is being closed at sequence N",
             "comment": "No: teardown is signalled by FIN, not by an "
                        "acknowledgment number."},
        ],
    },
    {
        "id": "short-stuffing",
        "type": "short",
        "prompt": "A link uses character stuffing with flag byte 0x7E, "
                  "escape byte 0x7D and the escape-XOR-0x20 rule. Give the "
                  "frame (in hex) sent for the payload 12 7E 34.",
        "grader": "stuffing",
        "payload": "127e34",
        "feedback_wrong": "Remember: the payload is wrapped between two flag "
                          "bytes, and any in-payload 0x7E or 0x7D is "
                          "replaced by 0x7D followed by the byte XOR 0x20.",
    },
    {
        "id": "short-window",
        "type": "short",
        "prompt": "A sliding-window sender may keep at most W unacknowledged "
                  "frames in flight. With W = 4 and sequence numbers already "
                  "acknowledged up to 9 (next expected 10), how many new "
                  "frames may it send right now if nothing is in flight?",
        "grader": "integer",
        "expected": "4",
        "feedback_wrong": "The window counts unacknowledged frames: with "
                          "nothing outstanding, the whole window is usable.",
    },
    {
        "id": "trace-mask-handshake",
        "type": "trace_mask",
        "prompt": "Packet 2 of this trace is the SYN+ACK returned by the "
                  "server. Predict the masked TCP fields from the other "
                  "packets in the trace.",
        "capture": "handshake.pcap",
        "packet": 1,
        "mask": ["tcp.seq", "tcp.ack", "tcp.window"],
        "comments": {
            "tcp.ack": "The SYN+ACK acknowledges the client's SYN: its "
                       "acknowledgment number must equal the client's "
                       "initial sequence number plus one.",
            "tcp.seq": "The server picks its own initial sequence number; "
                       "you can read it from the ACK number of the third "
                       "packet minus one.",
            "tcp.window": "The advertised window is the server's receive "
                          "buffer; compare with the window it announces in "
                          "later packets.",
        },
    },
    {
        "id": "trace-reorder-handshake",
        "type": "trace_reorder",
        "prompt": "These packets of a TCP connection setup are shown in "
                  "random order. Drag them into the order in which they "
                  "were sent.",
        "capture": "handshake.pcap",
        "true_order": [0, 1, 2],
    },
]


def write_demo_bank(bank_dir: str | Path) -> Path:
    """Write the demo exercise bank (pcap + question files) to `bank_dir`."""
    bank = Path(bank_dir)
    bank.mkdir(parents=True, exist_ok=True)
    (bank / "handshake.pcap").write_bytes(write_pcap(make_handshake_capture()))
    for ex in DEMO_EXERCISES:
        (bank / f"{ex['id']}.json").write_text(json.dumps(ex, indent=2))
    return bank


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "bank"
    path = write_demo_bank(target)
    print(f"demo bank written to {path}")
