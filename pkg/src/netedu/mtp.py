"""MTP, a mini transport protocol: reliable in-order delivery over UDP.

Sliding-window ARQ with cumulative acknowledgments and two retransmission
techniques: a fixed retransmission timeout and fast retransmit on the third
duplicate ACK. Sequence numbers live in an 8-bit space; the window is
capped at 31 (< half the space) so old and new frames are never confused.

Wire format (all integers big-endian):

    byte 0      (ftype << 5) | window     ftype: 0 DATA, 1 ACK, 2 FIN
    byte 1      seq
    bytes 2-3   payload length (0..512)
    ...         payload
    last 4      CRC-32 over header+payload

The Sender/Receiver state machines are pure and event-driven: all timing
comes in through `now` parameters, so the same code runs under the
discrete-event simulator (`transfer`) and over real UDP sockets
(`send_file` / `recv_file`).
"""

from __future__ import annotations

import heapq
import logging
import socket
import struct
import time
from collections import deque
from dataclasses import dataclass, field as dc_field

from . import codec
from .linksim import ImpairmentConfig, Direction, LinkEvent, LinkPipe

logger = logging.getLogger(__name__)

FTYPE_DATA = 0
FTYPE_ACK = 1
FTYPE_FIN = 2

SEQ_SPACE = 256
MAX_WINDOW = 31
MAX_PAYLOAD = 512
HEADER_LEN = 4
TRAILER_LEN = 4
RETRANSMIT_CAP = 10
DUP_ACK_THRESHOLD = 3
DEFAULT_RTO_MS = 200.0


class MtpError(Exception):
    pass


class IntegrityError(MtpError):
    """CRC mismatch on a received frame."""


class FramingError(MtpError):
    """Frame structure inconsistent (size, length field, type rules)."""


class UnknownTypeError(MtpError):
    pass


class MtpAbortError(MtpError):
    """Liveness failure: a frame hit the retransmission cap."""


@dataclass(frozen=True)
class MtpFrame:
    ftype: int
    window: int
    seq: int
    payload: bytes = b""

    def __post_init__(self):
        if not 0 <= self.window <= MAX_WINDOW:
            raise FramingError(f"window {self.window} out of range")
        if not 0 <= self.seq < SEQ_SPACE:
            raise FramingError(f"seq {self.seq} out of range")
        if len(self.payload) > MAX_PAYLOAD:
            raise FramingError(f"payload of {len(self.payload)} bytes > 512")
        if self.ftype != FTYPE_DATA and self.payload:
            raise FramingError("ACK/FIN frames carry no payload")


def encode_frame(frame: MtpFrame) -> bytes:
    header = struct.pack(">BBH", (frame.ftype << 5) | frame.window,
                         frame.seq, len(frame.payload))
    body = header + frame.payload
    return body + struct.pack(">I", codec.crc32(body))


def decode_frame(data: bytes) -> MtpFrame:
    if len(data) < HEADER_LEN + TRAILER_LEN:
        raise FramingError(f"datagram of {len(data)} bytes too short")
    body, trailer = data[:-TRAILER_LEN], data[-TRAILER_LEN:]
    if codec.crc32(body) != struct.unpack(">I", trailer)[0]:
        raise IntegrityError("frame CRC mismatch")
    ftype = body[0] >> 5
    if ftype > FTYPE_FIN:
        raise UnknownTypeError(f"unknown frame type {ftype}")
    window = body[0] & 0x1F
    seq = body[1]
    length = struct.unpack(">H", body[2:4])[0]
    payload = body[4:]
    if length != len(payload):
        raise FramingError(
            f"length field {length} != actual payload {len(payload)}")
    return MtpFrame(ftype, window, seq, payload)


def _seq_dist(base: int, seq: int) -> int:
    """Forward distance from base to seq in the 8-bit sequence space."""
    return (seq - base) % SEQ_SPACE


@dataclass
class _InFlight:
    payload: bytes
    send_time: float
    retransmit_count: int = 0
    is_fin: bool = False


class Sender:
    """Sending half of an MTP connection. Event-driven, no I/O."""

    def __init__(self, window: int = MAX_WINDOW, rto: float = DEFAULT_RTO_MS):
        if not 1 <= window <= MAX_WINDOW:
            raise ValueError(f"window must be in 1..{MAX_WINDOW}")
        self.rto = rto
        self.dup_ack_threshold = DUP_ACK_THRESHOLD
        self.peer_window = window  # assumption until the first ACK
        self.next_seq = 0
        self.in_flight: dict[int, _InFlight] = {}  # insertion order = seq order
        self.pending: deque[bytes] = deque()
        self.dup_ack_count = 0
        self.dup_ack_seq: int | None = None
        self.close_requested = False
        self.fin_sent = False
        self.done = False
        self.data_frames_sent = 0
        self.retransmissions = 0
        self.timeline: list[tuple[float, str, int]] = []

    def _usable_window(self) -> int:
        return max(0, min(self.peer_window, MAX_WINDOW) - len(self.in_flight))

    def _emit(self, now: float, seq: int, entry: _InFlight,
              kind: str) -> MtpFrame:
        # kind: "send" | "rto" | "fast". Only timer expiries count toward
        # the abort cap; fast retransmits are dupack-driven and may repeat
        # every 3 duplicates within one flight.
        ftype = FTYPE_FIN if entry.is_fin else FTYPE_DATA
        if kind == "send":
            self.data_frames_sent += not entry.is_fin
        else:
            self.retransmissions += 1
            entry.send_time = now
            if kind == "rto":
                entry.retransmit_count += 1
                if entry.retransmit_count >= RETRANSMIT_CAP:
                    raise MtpAbortError(
                        f"seq {seq} expired {entry.retransmit_count} times")
        self.timeline.append(
            (now, "send" if kind == "send" else "retransmit", seq))
        return MtpFrame(ftype, 0, seq, entry.payload)

    def _fill_window(self, now: float) -> list[MtpFrame]:
        out = []
        while self.pending and self._usable_window() > 0:
            payload = self.pending.popleft()
            entry = _InFlight(payload, now)
            self.in_flight[self.next_seq] = entry
            out.append(self._emit(now, self.next_seq, entry, "send"))
            self.next_seq = (self.next_seq + 1) % SEQ_SPACE
        if (self.close_requested and not self.fin_sent and not self.pending
                and not self.in_flight):
            entry = _InFlight(b"", now, is_fin=True)
            self.in_flight[self.next_seq] = entry
            out.append(self._emit(now, self.next_seq, entry, "send"))
            self.next_seq = (self.next_seq + 1) % SEQ_SPACE
            self.fin_sent = True
        return out

    def on_app_data(self, data: bytes, now: float) -> list[MtpFrame]:
        """Segment new application data and send whatever the window allows."""
        if self.close_requested:
            raise MtpError("cannot send after close")
        for i in range(0, len(data), MAX_PAYLOAD):
            self.pending.append(data[i:i + MAX_PAYLOAD])
        return self._fill_window(now)

    def close(self, now: float) -> list[MtpFrame]:
        """Request connection shutdown; FIN goes out once all data is acked."""
        self.close_requested = True
        return self._fill_window(now)

    def on_ack(self, ack: MtpFrame, now: float) -> list[MtpFrame]:
        if ack.ftype != FTYPE_ACK:
            raise MtpError("on_ack expects an ACK frame")
        self.peer_window = ack.window
        out: list[MtpFrame] = []
        if self.in_flight:
            base = next(iter(self.in_flight))
            dist = _seq_dist(base, ack.seq)
            if dist > len(self.in_flight):
                logger.info("ignoring ACK %d outside in-flight span [%d..)",
                            ack.seq, base)
                return out
            if dist > 0:
                for _ in range(dist):
                    seq, entry = next(iter(self.in_flight.items()))
                    del self.in_flight[seq]
                    if entry.is_fin:
                        self.done = True
                self.dup_ack_count = 0
                self.dup_ack_seq = None
                self.timeline.append((now, "ack", ack.seq))
            else:
                # duplicate: same cumulative position, nothing new acked
                if self.dup_ack_seq != ack.seq:
                    self.dup_ack_seq = ack.seq
                    self.dup_ack_count = 0
                self.dup_ack_count += 1
                self.timeline.append((now, "dupack", ack.seq))
                if self.dup_ack_count >= self.dup_ack_threshold:
                    self.dup_ack_count = 0
                    seq, entry = next(iter(self.in_flight.items()))
                    out.append(self._emit(now, seq, entry, "fast"))
        elif ack.seq != self.next_seq:
            logger.info("ignoring ACK %d with nothing in flight", ack.seq)
        out.extend(self._fill_window(now))
        return out

    def on_tick(self, now: float) -> list[MtpFrame]:
        """Retransmit every frame whose RTO has expired. Raises on the cap."""
        out = []
        for seq, entry in list(self.in_flight.items()):
            # same expression as next_timeout() so a tick scheduled at the
            # deadline always fires despite float rounding
            if now >= entry.send_time + self.rto:
                out.append(self._emit(now, seq, entry, "rto"))
        return out

    def next_timeout(self) -> float | None:
        if not self.in_flight:
            return None
        return min(e.send_time for e in self.in_flight.values()) + self.rto

    @property
    def idle(self) -> bool:
        return not self.pending and not self.in_flight


class Receiver:
    """Receiving half of an MTP connection; delivers bytes in order."""

    def __init__(self, window: int = MAX_WINDOW):
        if not 1 <= window <= MAX_WINDOW:
            raise ValueError(f"window must be in 1..{MAX_WINDOW}")
        self.local_window = window
        self.expected_seq = 0
        self.buffer: dict[int, bytes] = {}
        self.half_closed = False

    def _ack(self) -> MtpFrame:
        return MtpFrame(FTYPE_ACK, self.local_window, self.expected_seq)

    def on_frame(self, frame: MtpFrame) -> tuple[MtpFrame | None, bytes]:
        """Process one CRC-clean frame; returns (ACK to send, app bytes)."""
        if frame.ftype == FTYPE_ACK:
            return None, b""
        delivered = bytearray()
        if frame.ftype == FTYPE_DATA and not self.half_closed:
            dist = _seq_dist(self.expected_seq, frame.seq)
            if dist == 0:
                delivered += frame.payload
                self.expected_seq = (self.expected_seq + 1) % SEQ_SPACE
                while self.expected_seq in self.buffer:
                    delivered += self.buffer.pop(self.expected_seq)
                    self.expected_seq = (self.expected_seq + 1) % SEQ_SPACE
            elif dist < self.local_window:
                self.buffer[frame.seq] = frame.payload
            # duplicates and out-of-window frames just re-elicit the ACK
        elif frame.ftype == FTYPE_FIN:
            if not self.half_closed:
                if frame.seq == self.expected_seq and not self.buffer:
                    self.half_closed = True
                    self.expected_seq = (self.expected_seq + 1) % SEQ_SPACE
                # early FIN (data still missing): dup-ack current state
        return self._ack(), bytes(delivered)


@dataclass
class TransferReport:
    delivered: bytes
    data_frames_sent: int
    retransmissions: int
    acks_received: int
    completion_ms: float
    link_events: list[LinkEvent] = dc_field(default_factory=list)
    sender_timeline: list[tuple[float, str, int]] = dc_field(
        default_factory=list)


def transfer(file: bytes, impairment: ImpairmentConfig,
             window: int = MAX_WINDOW, rto: float = DEFAULT_RTO_MS,
             max_sim_ms: float = 600_000.0) -> TransferReport:
    """Drive a full sender/receiver pair through the simulated link.

    Deterministic in (file, impairment, window, rto). Raises MtpAbortError
    when the retransmission cap fires (e.g. 100% loss).
    """
    sender = Sender(window=window, rto=rto)
    receiver = Receiver(window=window)
    events: list[LinkEvent] = []
    pipe_ab = LinkPipe(impairment, Direction.A_TO_B, events)
    pipe_ba = LinkPipe(impairment, Direction.B_TO_A, events)

    heap: list[tuple[float, int, Direction, bytes]] = []
    counter = 0
    delivered = bytearray()
    acks_received = 0
    now = 0.0

    def push(direction: Direction, t: float, frames: list[MtpFrame]):
        nonlocal counter
        pipe = pipe_ab if direction is Direction.A_TO_B else pipe_ba
        for frame in frames:
            for deliver_t, payload in pipe.send(t, encode_frame(frame)):
                heapq.heappush(heap, (deliver_t, counter, direction, payload))
                counter += 1

    push(Direction.A_TO_B, 0.0, sender.on_app_data(file, 0.0))
    push(Direction.A_TO_B, 0.0, sender.close(0.0))

    while not sender.done:
        t_rto = sender.next_timeout()
        t_event = heap[0][0] if heap else None
        if t_event is None and t_rto is None:
            raise MtpError("transfer stalled with no pending events")
        if t_event is None or (t_rto is not None and t_rto < t_event):
            now = t_rto
            push(Direction.A_TO_B, now, sender.on_tick(now))
            continue
        now, _, direction, payload = heapq.heappop(heap)
        if now > max_sim_ms:
            raise MtpError(f"transfer exceeded {max_sim_ms} simulated ms")
        try:
            frame = decode_frame(payload)
        except MtpError:
            continue  # corrupt frames are dropped silently
        if direction is Direction.A_TO_B:
            ack, chunk = receiver.on_frame(frame)
            delivered += chunk
            if ack is not None:
                push(Direction.B_TO_A, now, [ack])
        else:
            acks_received += 1
            push(Direction.A_TO_B, now, sender.on_ack(frame, now))

    return TransferReport(
        delivered=bytes(delivered),
        data_frames_sent=sender.data_frames_sent,
        retransmissions=sender.retransmissions,
        acks_received=acks_received,
        completion_ms=now,
        link_events=events,
        sender_timeline=sender.timeline,
    )


def send_file(peer: tuple[str, int], data: bytes, window: int = MAX_WINDOW,
              rto: float = DEFAULT_RTO_MS, local_port: int = 0,
              timeout_s: float = 60.0) -> TransferReport:
    """Send `data` to a receiver over real UDP. Blocks until done/abort."""
    sender = Sender(window=window, rto=rto)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(("0.0.0.0", local_port))
    integrity_errors = 0
    acks_received = 0
    t0 = time.monotonic()

    def now_ms() -> float:
        return (time.monotonic() - t0) * 1000.0

    def ship(frames: list[MtpFrame]):
        for frame in frames:
            sock.sendto(encode_frame(frame), peer)

    try:
        ship(sender.on_app_data(data, now_ms()))
        ship(sender.close(now_ms()))
        while not sender.done:
            if time.monotonic() - t0 > timeout_s:
                raise MtpError(f"transfer timed out after {timeout_s}s")
            deadline = sender.next_timeout()
            wait_ms = 50.0 if deadline is None else max(
                0.0, deadline - now_ms())
            sock.settimeout(min(wait_ms, 50.0) / 1000.0 or 0.001)
            try:
                payload, addr = sock.recvfrom(65535)
            except socket.timeout:
                payload = None
            if payload is not None:
                try:
                    frame = decode_frame(payload)
                except IntegrityError:
                    integrity_errors += 1
                    logger.warning("integrity error on ACK (%d total)",
                                   integrity_errors)
                    frame = None
                except MtpError:
                    frame = None
                if frame is not None and frame.ftype == FTYPE_ACK:
                    acks_received += 1
                    ship(sender.on_ack(frame, now_ms()))
            ship(sender.on_tick(now_ms()))
    finally:
        sock.close()
    return TransferReport(
        delivered=b"", data_frames_sent=sender.data_frames_sent,
        retransmissions=sender.retransmissions,
        acks_received=acks_received, completion_ms=now_ms(),
        sender_timeline=sender.timeline)


def recv_file(listen_port: int, window: int = MAX_WINDOW,
              timeout_s: float = 60.0, linger_s: float = 0.5,
              host: str = "0.0.0.0") -> bytes:
    """Receive one MTP transfer on `listen_port`; returns the byte stream.

    After the FIN is acknowledged the socket lingers briefly to re-ack
    retransmitted FINs whose ACK was lost.
    """
    receiver = Receiver(window=window)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind((host, listen_port))
    sock.settimeout(0.05)
    out = bytearray()
    integrity_errors = 0
    t0 = time.monotonic()
    closed_at = None
    try:
        while True:
            if closed_at is not None and time.monotonic() - closed_at > linger_s:
                break
            if time.monotonic() - t0 > timeout_s:
                raise MtpError(f"receive timed out after {timeout_s}s")
            try:
                payload, addr = sock.recvfrom(65535)
            except socket.timeout:
                continue
            try:
                frame = decode_frame(payload)
            except IntegrityError:
                integrity_errors += 1
                logger.warning("integrity error on frame (%d total)",
                               integrity_errors)
                continue
            except MtpError:
                continue
            ack, chunk = receiver.on_frame(frame)
            out += chunk
            if ack is not None:
                sock.sendto(encode_frame(ack), addr)
            if receiver.half_closed and closed_at is None:
                closed_at = time.monotonic()
    finally:
        sock.close()
    return bytes(out)
