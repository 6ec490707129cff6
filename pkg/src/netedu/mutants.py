"""Deliberately broken MTP endpoints for interoperability negative tests.

    no-retransmit-send: a sender that never retransmits (no RTO, no fast
        retransmit); any lost frame stalls the transfer forever.
    bad-crc-recv: a receiver whose ACKs carry corrupted checksums, so a
        correct sender discards them as integrity errors and cannot
        progress.
    window-ignore-send: a sender that floods the whole file regardless of
        the advertised window.

Run with `python -m netedu.mutants --mode MODE ...` using the same flags
as the real `mtp-send` / `mtp-recv` commands.
"""

from __future__ import annotations

import argparse
import socket
import sys
import time
from pathlib import Path

from . import mtp


class NoRetransmitSender(mtp.Sender):
    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.dup_ack_threshold = 1 << 30  # fast retransmit disabled

    def on_tick(self, now):
        return []  # RTO disabled


class WindowIgnoringSender(mtp.Sender):
    def _usable_window(self):
        return mtp.MAX_WINDOW  # floods regardless of the peer's window


def _run_mutant_send(args, sender_cls) -> int:
    data = Path(args.file).read_bytes()
    sender = sender_cls(window=args.window, rto=args.rto)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(("0.0.0.0", args.local))
    sock.settimeout(0.05)
    t0 = time.monotonic()

    def now_ms():
        return (time.monotonic() - t0) * 1000.0

    def ship(frames):
        for frame in frames:
            sock.sendto(mtp.encode_frame(frame), args.peer)

    ship(sender.on_app_data(data, now_ms()))
    ship(sender.close(now_ms()))
    while not sender.done:
        if time.monotonic() - t0 > args.timeout:
            print("mutant sender timed out", file=sys.stderr)
            return 1
        try:
            payload, _ = sock.recvfrom(65535)
        except socket.timeout:
            continue
        try:
            frame = mtp.decode_frame(payload)
        except mtp.MtpError:
            continue
        if frame.ftype == mtp.FTYPE_ACK:
            ship(sender.on_ack(frame, now_ms()))
        ship(sender.on_tick(now_ms()))
    print("mutant transfer complete")
    return 0


def _run_bad_crc_recv(args) -> int:
    receiver = mtp.Receiver(window=args.window)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(("0.0.0.0", args.listen))
    sock.settimeout(0.05)
    out = bytearray()
    t0 = time.monotonic()
    while True:
        if time.monotonic() - t0 > args.timeout:
            print("mutant receiver timed out", file=sys.stderr)
            Path(args.out).write_bytes(out)
            return 1
        try:
            payload, addr = sock.recvfrom(65535)
        except socket.timeout:
            continue
        try:
            frame = mtp.decode_frame(payload)
        except mtp.MtpError:
            continue
        ack, chunk = receiver.on_frame(frame)
        out += chunk
        if ack is not None:
            encoded = bytearray(mtp.encode_frame(ack))
            encoded[-1] ^= 0xFF  # corrupt the CRC
            sock.sendto(bytes(encoded), addr)
        if receiver.half_closed:
            Path(args.out).write_bytes(out)
            return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="netedu-mutants")
    parser.add_argument("--mode", required=True,
                        choices=["no-retransmit-send", "window-ignore-send",
                                 "bad-crc-recv"])
    parser.add_argument("--peer", default=None)
    parser.add_argument("--file", default=None)
    parser.add_argument("--listen", type=int, default=0)
    parser.add_argument("--out", default=None)
    parser.add_argument("--window", type=int, default=31)
    parser.add_argument("--rto", type=float, default=200.0)
    parser.add_argument("--local", type=int, default=0)
    parser.add_argument("--timeout", type=float, default=60.0)
    args = parser.parse_args(argv)
    if args.mode.endswith("send") and not (args.peer and args.file):
        parser.error("send modes need --peer and --file")
    if args.mode == "bad-crc-recv" and not args.out:
        parser.error("bad-crc-recv needs --out")
    if args.peer:
        host, _, port = args.peer.rpartition(":")
        args.peer = (host, int(port))
    if args.mode == "no-retransmit-send":
        return _run_mutant_send(args, NoRetransmitSender)
    if args.mode == "window-ignore-send":
        return _run_mutant_send(args, WindowIgnoringSender)
    return _run_bad_crc_recv(args)


if __name__ == "__main__":
    sys.exit(main())
