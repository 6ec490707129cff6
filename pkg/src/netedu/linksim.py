"""Deterministic link impairment simulator for UDP flows.

One ImpairmentConfig drives three frontends that share the same decision
pipeline: a pure discrete-event `simulate()` over a fixed packet schedule,
a reactive `LinkPipe` used by protocol simulations, and a live `UdpProxy`
relaying real datagrams between two endpoints.

Determinism contract: every packet consumes exactly four PRNG draws in the
order loss, duplication, reorder, jitter (plus a fifth jitter draw for the
duplicate copy when duplication fires), so the whole trace is a pure
function of (inputs, config). Ordinal drops match the Nth transmission
seen in a direction; retransmissions arrive with fresh ordinals and pass.
base_delay applies to both directions; the probabilistic impairments and
ordinal drops apply only to the configured direction(s).
"""

from __future__ import annotations

import enum
import heapq
import socket
import struct
import threading
import time
from dataclasses import dataclass, field as dc_field

from .rng import SplitMix64, derive_seed

MAX_DATAGRAM = 65507


class Direction(enum.Enum):
    BOTH = "both"
    A_TO_B = "a_to_b"
    B_TO_A = "b_to_a"


class Action(enum.Enum):
    DELIVER = "deliver"
    DROP = "drop"
    DUPLICATE = "duplicate"
    HOLD = "hold"
    RELEASE = "release"


@dataclass(frozen=True)
class ImpairmentConfig:
    seed: int = 0
    base_delay: float = 0.0  # ms
    jitter: float = 0.0  # ms, uniform extra delay in [0, jitter)
    loss_prob: float = 0.0
    dup_prob: float = 0.0
    reorder_prob: float = 0.0
    drop_ordinals: frozenset[int] = frozenset()
    direction: Direction = Direction.BOTH

    def __post_init__(self):
        for name in ("loss_prob", "dup_prob", "reorder_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.base_delay < 0 or self.jitter < 0:
            raise ValueError("delays must be non-negative")
        object.__setattr__(self, "drop_ordinals",
                           frozenset(self.drop_ordinals))
        if any(o < 1 for o in self.drop_ordinals):
            raise ValueError("drop ordinals are 1-indexed")

    def impairs(self, direction: Direction) -> bool:
        return self.direction is Direction.BOTH or self.direction is direction


@dataclass(frozen=True)
class LinkEvent:
    t: float  # ms
    direction: Direction
    ordinal: int
    action: Action
    delay_applied: float  # ms


def format_event_log(events: list[LinkEvent]) -> str:
    """Tab-separated golden format: t_ms dir ordinal action delay_ms."""
    return "\n".join(
        f"{e.t:.3f}\t{e.direction.value}\t{e.ordinal}\t{e.action.value}"
        f"\t{e.delay_applied:.3f}"
        for e in events)


class DecisionKind(enum.Enum):
    PASS = "pass"
    DROP = "drop"
    DUPLICATE = "duplicate"
    REORDER_HOLD = "reorder-hold"


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    extra_delay: float  # jitter for the primary delivery
    dup_extra_delay: float = 0.0  # independent jitter for the duplicate copy


def direction_seed(cfg: ImpairmentConfig, direction: Direction) -> int:
    """Per-direction PRNG stream seed; decorrelated but seed-determined."""
    if direction is Direction.A_TO_B:
        return cfg.seed
    return derive_seed(cfg.seed, "b_to_a")


def next_decision(rng: SplitMix64, cfg: ImpairmentConfig, ordinal: int,
                  direction: Direction) -> Decision:
    """Impairment decision for one packet; advances `rng` by 4 or 5 draws."""
    u_loss = rng.next_float()
    u_dup = rng.next_float()
    u_reorder = rng.next_float()
    jitter = rng.next_float() * cfg.jitter
    if ordinal in cfg.drop_ordinals or u_loss < cfg.loss_prob:
        return Decision(DecisionKind.DROP, jitter)
    if u_dup < cfg.dup_prob:
        return Decision(DecisionKind.DUPLICATE, jitter,
                        rng.next_float() * cfg.jitter)
    if u_reorder < cfg.reorder_prob:
        return Decision(DecisionKind.REORDER_HOLD, jitter)
    return Decision(DecisionKind.PASS, jitter)


class LinkPipe:
    """Reactive impairment pipeline for one direction of a link.

    `send(t, payload)` returns the scheduled deliveries (possibly none, one,
    or two) as (deliver_time, payload) pairs, in the order they must be
    handed to the far end when times tie. Events append to `self.events`.
    """

    def __init__(self, cfg: ImpairmentConfig, direction: Direction,
                 events: list[LinkEvent] | None = None):
        self.cfg = cfg
        self.direction = direction
        self.impaired = cfg.impairs(direction)
        self.rng = SplitMix64(direction_seed(cfg, direction))
        self.next_ordinal = 1
        # held entries: (ordinal, ingress_t, natural_deliver_t, payload)
        self.held: list[tuple[int, float, float, bytes]] = []
        self.events = events if events is not None else []

    def _log(self, t, ordinal, action, delay):
        self.events.append(
            LinkEvent(t, self.direction, ordinal, action, delay))

    def send(self, t: float, payload: bytes) -> list[tuple[float, bytes]]:
        ordinal = self.next_ordinal
        self.next_ordinal += 1
        if not self.impaired:
            deliver_at = t + self.cfg.base_delay
            self._log(deliver_at, ordinal, Action.DELIVER, self.cfg.base_delay)
            return [(deliver_at, payload)]
        decision = next_decision(self.rng, self.cfg, ordinal, self.direction)
        if decision.kind is DecisionKind.DROP:
            self._log(t, ordinal, Action.DROP, 0.0)
            return []
        if decision.kind is DecisionKind.REORDER_HOLD:
            natural = t + self.cfg.base_delay + decision.extra_delay
            self.held.append((ordinal, t, natural, payload))
            self._log(t, ordinal, Action.HOLD, 0.0)
            return []
        out = []
        delay = self.cfg.base_delay + decision.extra_delay
        self._log(t + delay, ordinal, Action.DELIVER, delay)
        out.append((t + delay, payload))
        if decision.kind is DecisionKind.DUPLICATE:
            dup_delay = self.cfg.base_delay + decision.dup_extra_delay
            self._log(t + dup_delay, ordinal, Action.DUPLICATE, dup_delay)
            out.append((t + dup_delay, payload))
        # swap semantics: held packets go out right after this forward
        release_at = t + delay
        for held_ordinal, ingress, _natural, held_payload in self.held:
            self._log(release_at, held_ordinal, Action.RELEASE,
                      release_at - ingress)
            out.append((release_at, held_payload))
        self.held.clear()
        return out

    def flush(self, t: float) -> list[tuple[float, bytes]]:
        """Release any still-held packets (end of stream / shutdown)."""
        out = []
        for ordinal, ingress, natural, payload in self.held:
            release_at = max(t, natural)
            self._log(release_at, ordinal, Action.RELEASE,
                      release_at - ingress)
            out.append((release_at, payload))
        self.held.clear()
        return out


@dataclass(frozen=True)
class ScheduledPacket:
    t: float  # ingress time, ms
    direction: Direction
    payload: bytes


def simulate(packets: list[ScheduledPacket], cfg: ImpairmentConfig
             ) -> tuple[list[tuple[float, Direction, bytes]], list[LinkEvent]]:
    """Run a fixed schedule through the link; returns deliveries and log.

    Deliveries are sorted by time; ties keep scheduling order, which is
    ingress-ordinal order except where the swap semantics of a reorder hold
    put the released packet right after its trigger.
    """
    events: list[LinkEvent] = []
    pipes = {
        Direction.A_TO_B: LinkPipe(cfg, Direction.A_TO_B, events),
        Direction.B_TO_A: LinkPipe(cfg, Direction.B_TO_A, events),
    }
    deliveries = []  # (time, emit_counter, direction, payload)
    counter = 0
    last_t = 0.0
    for pkt in packets:
        if pkt.direction not in pipes:
            raise ValueError("schedule entries must be a_to_b or b_to_a")
        last_t = max(last_t, pkt.t)
        for deliver_t, payload in pipes[pkt.direction].send(pkt.t, pkt.payload):
            deliveries.append((deliver_t, counter, pkt.direction, payload))
            counter += 1
    for direction, pipe in pipes.items():
        for deliver_t, payload in pipe.flush(last_t):
            deliveries.append((deliver_t, counter, direction, payload))
            counter += 1
    deliveries.sort(key=lambda d: (d[0], d[1]))
    events.sort(key=lambda e: (e.t, e.ordinal))
    return [(t, d, p) for t, _, d, p in deliveries], events


def chop_stream(data: bytes, seed: int, max_chunk: int) -> list[bytes]:
    """Split a byte stream into chunks of seeded-random size in [1, max_chunk].

    Models partial delivery on a stream socket: a reader must cope with
    recv() returning any prefix of what was sent.
    """
    if max_chunk < 1:
        raise ValueError("max_chunk must be >= 1")
    rng = SplitMix64(seed)
    chunks = []
    pos = 0
    while pos < len(data):
        size = rng.randbelow(max_chunk) + 1
        chunks.append(data[pos:pos + size])
        pos += size
    return chunks


class UdpProxy:
    """Live UDP relay applying the impairment pipeline with wall-clock delays.

    Datagrams from peer_a go to peer_b and vice versa. peer_a may be None,
    in which case the first datagram from an address other than peer_b
    adopts that sender as peer_a (handy when the client binds an ephemeral
    port). Call stop() to shut down; the event log is in `self.events` and
    is written to `log_path` if given.
    """

    def __init__(self, listen_port: int, peer_a: tuple[str, int] | None,
                 peer_b: tuple[str, int], cfg: ImpairmentConfig,
                 log_path: str | None = None, host: str = "127.0.0.1"):
        self.cfg = cfg
        self.log_path = log_path
        self.events: list[LinkEvent] = []
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._heap: list[tuple[float, int, tuple[str, int], bytes]] = []
        self._counter = 0
        self.peer_a = peer_a
        self.peer_b = peer_b
        self._pipes = {
            Direction.A_TO_B: LinkPipe(cfg, Direction.A_TO_B, self.events),
            Direction.B_TO_A: LinkPipe(cfg, Direction.B_TO_A, self.events),
        }
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((host, listen_port))
        self._sock.settimeout(0.05)
        self.port = self._sock.getsockname()[1]
        self._running = False
        self._threads: list[threading.Thread] = []
        self._t0 = 0.0

    def _now_ms(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    def start(self):
        self._t0 = time.monotonic()
        self._running = True
        for target in (self._recv_loop, self._send_loop):
            th = threading.Thread(target=target, daemon=True)
            th.start()
            self._threads.append(th)

    def _recv_loop(self):
        while self._running:
            try:
                data, addr = self._sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            if len(data) > MAX_DATAGRAM:
                continue
            if addr == self.peer_b:
                direction, dest = Direction.B_TO_A, self.peer_a
            else:
                if self.peer_a is None:
                    self.peer_a = addr
                if addr != self.peer_a:
                    continue  # stranger; not part of the flow
                direction, dest = Direction.A_TO_B, self.peer_b
            if dest is None:
                continue
            now = self._now_ms()
            with self._cond:
                for deliver_t, payload in self._pipes[direction].send(now, data):
                    heapq.heappush(self._heap,
                                   (deliver_t, self._counter, dest, payload))
                    self._counter += 1
                self._cond.notify()

    def _send_loop(self):
        while self._running:
            with self._cond:
                while self._running and not self._heap:
                    self._cond.wait(timeout=0.05)
                if not self._running:
                    return
                deliver_t, _, dest, payload = self._heap[0]
                wait_ms = deliver_t - self._now_ms()
                if wait_ms > 0:
                    self._cond.wait(timeout=wait_ms / 1000.0)
                    continue
                heapq.heappop(self._heap)
            try:
                self._sock.sendto(payload, dest)
            except OSError:
                pass

    def stop(self):
        self._running = False
        with self._cond:
            self._cond.notify_all()
        for th in self._threads:
            th.join(timeout=1.0)
        self._sock.close()
        if self.log_path:
            with open(self.log_path, "w") as fh:
                fh.write(format_event_log(self.events) + "\n")
