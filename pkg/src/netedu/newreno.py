"""New Reno send-timeline prediction for idealized scenarios.

Students are asked to predict how and when a New Reno sender transmits a
fixed number of segments over a link with a known round-trip time when
specific transmissions are lost. `predict()` computes the reference
timeline analytically; `measure()` replays the same scenario through the
link simulator's discrete-event pipeline; `compare()` diffs two timelines.

Model (both implementations follow it exactly):
  - one ACK per segment, no delayed ACKs, one-way delay = rtt/2,
    zero transmission time;
  - slow start: cwnd += 1 per new ACK while cwnd < ssthresh;
    congestion avoidance: cwnd += 1/cwnd (fractional cwnd);
  - fast retransmit on the 3rd duplicate ACK: ssthresh = max(flight/2, 2),
    retransmit the hole, cwnd = ssthresh + 3, enter fast recovery;
  - in fast recovery each further duplicate inflates cwnd by 1; a partial
    ACK deflates cwnd by the amount acked minus 1 and retransmits the next
    hole without leaving recovery; the full ACK exits with cwnd = ssthresh;
  - one retransmission timer (armed when data is sent with none running,
    restarted on new ACKs and retransmissions): on expiry
    ssthresh = max(flight/2, 2), cwnd = 1, retransmit the earliest hole,
    leave recovery;
  - loss ordinals count data-direction transmissions, so retransmissions
    carry fresh ordinals and get through.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass, field as dc_field

from .linksim import Direction, ImpairmentConfig, LinkPipe

DEFAULT_SSTHRESH = 64
DEFAULT_RTO_MS = 200.0
DUP_ACK_THRESHOLD = 3
GUARD_RTT_MULTIPLE = 100


class ScenarioTimeoutError(RuntimeError):
    """The scenario failed to finish within 100 RTTs of simulated time."""


@dataclass(frozen=True)
class Scenario:
    rtt: float  # ms
    num_segments: int
    init_cwnd: int = 1
    ssthresh0: int = DEFAULT_SSTHRESH
    rto: float = DEFAULT_RTO_MS
    loss_ordinals: frozenset[int] = frozenset()
    mss: int = 1460  # informational only

    def __post_init__(self):
        if self.rtt <= 0:
            raise ValueError("rtt must be positive")
        if self.num_segments < 0:
            raise ValueError("num_segments must be >= 0")
        if self.init_cwnd < 1:
            raise ValueError("init_cwnd must be >= 1")
        object.__setattr__(self, "loss_ordinals",
                           frozenset(self.loss_ordinals))
        if any(o < 1 for o in self.loss_ordinals):
            raise ValueError("loss ordinals are 1-indexed")


@dataclass(frozen=True)
class TimelineEvent:
    t: float  # ms
    kind: str  # send | retransmit | ack_rcvd | dupack_rcvd | rto_fire |
    #           enter_fast_recovery | exit_fast_recovery
    seg: int  # segment index, or next-expected for ack events
    cwnd_after: float
    ssthresh_after: int


@dataclass
class Timeline:
    events: list[TimelineEvent] = dc_field(default_factory=list)
    done_ms: float = 0.0

    def of_kind(self, kind: str) -> list[TimelineEvent]:
        return [e for e in self.events if e.kind == kind]


def render_timeline(tl: Timeline) -> str:
    """Golden format: t_ms kind seg cwnd ssthresh, tab-separated."""
    return "\n".join(
        f"{e.t:.3f}\t{e.kind}\t{e.seg}\t{e.cwnd_after:.3f}\t{e.ssthresh_after}"
        for e in tl.events)


def predict(s: Scenario) -> Timeline:
    """Analytic event-driven reference timeline for the scenario."""
    tl = Timeline()
    if s.num_segments == 0:
        return tl
    guard = GUARD_RTT_MULTIPLE * s.rtt
    one_way = s.rtt / 2.0

    cwnd = float(s.init_cwnd)
    ssthresh = s.ssthresh0
    snd_una = 1
    highest = 0
    next_new = 1
    dup_acks = 0
    in_recovery = False
    recover = 0
    transmissions = 0
    timer: float | None = None

    rcv_next = 1
    received: set[int] = set()

    heap: list[tuple[float, int, str, int]] = []
    counter = 0

    def emit(t, kind, seg):
        tl.events.append(TimelineEvent(t, kind, seg, cwnd, ssthresh))

    def push(t, kind, value):
        nonlocal counter
        heapq.heappush(heap, (t, counter, kind, value))
        counter += 1

    def flight() -> int:
        return highest - snd_una + 1 if highest >= snd_una else 0

    def transmit(t, seg, kind):
        nonlocal transmissions, highest, timer
        transmissions += 1
        highest = max(highest, seg)
        emit(t, kind, seg)
        if timer is None:
            timer = t + s.rto
        if transmissions not in s.loss_ordinals:
            push(t + one_way, "seg", seg)

    def send_new(t):
        nonlocal next_new
        while next_new <= s.num_segments and flight() < int(cwnd):
            transmit(t, next_new, "send")
            next_new += 1

    send_new(0.0)

    while snd_una <= s.num_segments:
        t_event = heap[0][0] if heap else None
        if t_event is None and timer is None:
            raise ScenarioTimeoutError("no events pending and no timer armed")
        if timer is not None and (t_event is None or timer < t_event):
            now = timer
            if now > guard:
                raise ScenarioTimeoutError(f"exceeded {guard} ms")
            f = flight()
            ssthresh = max(f // 2, 2)
            cwnd = 1.0
            in_recovery = False
            dup_acks = 0
            emit(now, "rto_fire", snd_una)
            transmit(now, snd_una, "retransmit")
            timer = now + s.rto
            continue
        now, _, kind, value = heapq.heappop(heap)
        if now > guard:
            raise ScenarioTimeoutError(f"exceeded {guard} ms")
        if kind == "seg":
            received.add(value)
            while rcv_next in received:
                rcv_next += 1
            push(now + one_way, "ack", rcv_next)
            continue
        ack = value
        if ack > snd_una:
            acked = ack - snd_una
            snd_una = ack
            if in_recovery:
                if ack > recover:
                    cwnd = float(ssthresh)
                    in_recovery = False
                    emit(now, "ack_rcvd", ack)
                    emit(now, "exit_fast_recovery", ack)
                else:
                    cwnd = max(cwnd - acked + 1.0, 1.0)
                    emit(now, "ack_rcvd", ack)
                    transmit(now, snd_una, "retransmit")
            else:
                if cwnd < ssthresh:
                    cwnd += 1.0
                else:
                    cwnd += 1.0 / cwnd
                emit(now, "ack_rcvd", ack)
            dup_acks = 0
            timer = now + s.rto if flight() > 0 else None
            send_new(now)
            if snd_una > s.num_segments:
                tl.done_ms = now
        elif flight() > 0:
            if in_recovery:
                cwnd += 1.0
                emit(now, "dupack_rcvd", ack)
                send_new(now)
            else:
                dup_acks += 1
                emit(now, "dupack_rcvd", ack)
                if dup_acks == DUP_ACK_THRESHOLD:
                    f = flight()
                    ssthresh = max(f // 2, 2)
                    cwnd = float(ssthresh + DUP_ACK_THRESHOLD)
                    recover = highest
                    in_recovery = True
                    emit(now, "enter_fast_recovery", snd_una)
                    transmit(now, snd_una, "retransmit")
                    timer = now + s.rto
                    send_new(now)
    return tl


class _MeasuredSender:
    """New Reno sender driven by deliveries from the link simulator."""

    def __init__(self, scenario: Scenario, timeline: Timeline):
        self.s = scenario
        self.tl = timeline
        self.cwnd = float(scenario.init_cwnd)
        self.ssthresh = scenario.ssthresh0
        self.snd_una = 1
        self.highest = 0
        self.next_new = 1
        self.dup_acks = 0
        self.in_recovery = False
        self.recover = 0
        self.timer: float | None = None
        self.to_send: list[tuple[int, str]] = []

    def _emit(self, t, kind, seg):
        self.tl.events.append(
            TimelineEvent(t, kind, seg, self.cwnd, self.ssthresh))

    def _flight(self) -> int:
        return (self.highest - self.snd_una + 1
                if self.highest >= self.snd_una else 0)

    def _queue(self, t, seg, kind):
        self.highest = max(self.highest, seg)
        self._emit(t, kind, seg)
        if self.timer is None:
            self.timer = t + self.s.rto
        self.to_send.append((seg, kind))

    def _send_new(self, t):
        while (self.next_new <= self.s.num_segments
               and self._flight() < int(self.cwnd)):
            self._queue(t, self.next_new, "send")
            self.next_new += 1

    def start(self, t):
        self._send_new(t)

    def on_ack(self, t, ack):
        if ack > self.snd_una:
            acked = ack - self.snd_una
            self.snd_una = ack
            if self.in_recovery:
                if ack > self.recover:
                    self.cwnd = float(self.ssthresh)
                    self.in_recovery = False
                    self._emit(t, "ack_rcvd", ack)
                    self._emit(t, "exit_fast_recovery", ack)
                else:
                    self.cwnd = max(self.cwnd - acked + 1.0, 1.0)
                    self._emit(t, "ack_rcvd", ack)
                    self._queue(t, self.snd_una, "retransmit")
            else:
                if self.cwnd < self.ssthresh:
                    self.cwnd += 1.0
                else:
                    self.cwnd += 1.0 / self.cwnd
                self._emit(t, "ack_rcvd", ack)
            self.dup_acks = 0
            self.timer = t + self.s.rto if self._flight() > 0 else None
            self._send_new(t)
        elif self._flight() > 0:
            if self.in_recovery:
                self.cwnd += 1.0
                self._emit(t, "dupack_rcvd", ack)
                self._send_new(t)
            else:
                self.dup_acks += 1
                self._emit(t, "dupack_rcvd", ack)
                if self.dup_acks == DUP_ACK_THRESHOLD:
                    self.ssthresh = max(self._flight() // 2, 2)
                    self.cwnd = float(self.ssthresh + DUP_ACK_THRESHOLD)
                    self.recover = self.highest
                    self.in_recovery = True
                    self._emit(t, "enter_fast_recovery", self.snd_una)
                    self._queue(t, self.snd_una, "retransmit")
                    self.timer = t + self.s.rto
                    self._send_new(t)

    def on_timer(self, t):
        self.ssthresh = max(self._flight() // 2, 2)
        self.cwnd = 1.0
        self.in_recovery = False
        self.dup_acks = 0
        self._emit(t, "rto_fire", self.snd_una)
        self._queue(t, self.snd_una, "retransmit")
        self.timer = t + self.s.rto

    @property
    def done(self) -> bool:
        return self.snd_una > self.s.num_segments


class _MeasuredReceiver:
    def __init__(self):
        self.received: set[int] = set()
        self.rcv_next = 1

    def on_segment(self, seg: int) -> int:
        self.received.add(seg)
        while self.rcv_next in self.received:
            self.rcv_next += 1
        return self.rcv_next


def measure(s: Scenario) -> Timeline:
    """Replay the scenario with a segment-level sender over the link
    simulator; ordinal drops come from the simulator's own bookkeeping."""
    tl = Timeline()
    if s.num_segments == 0:
        return tl
    guard = GUARD_RTT_MULTIPLE * s.rtt
    cfg = ImpairmentConfig(seed=0, base_delay=s.rtt / 2.0,
                           drop_ordinals=s.loss_ordinals,
                           direction=Direction.A_TO_B)
    data_pipe = LinkPipe(cfg, Direction.A_TO_B)
    ack_pipe = LinkPipe(cfg, Direction.B_TO_A)
    sender = _MeasuredSender(s, tl)
    receiver = _MeasuredReceiver()

    heap: list[tuple[float, int, Direction, bytes]] = []
    counter = 0

    def pump(t):
        nonlocal counter
        for seg, _kind in sender.to_send:
            for dt, payload in data_pipe.send(t, struct.pack(">I", seg)):
                heapq.heappush(heap, (dt, counter, Direction.A_TO_B, payload))
                counter += 1
        sender.to_send.clear()

    def send_ack(t, ack):
        nonlocal counter
        for dt, payload in ack_pipe.send(t, struct.pack(">I", ack)):
            heapq.heappush(heap, (dt, counter, Direction.B_TO_A, payload))
            counter += 1

    sender.start(0.0)
    pump(0.0)
    while not sender.done:
        t_event = heap[0][0] if heap else None
        if t_event is None and sender.timer is None:
            raise ScenarioTimeoutError("no events pending and no timer armed")
        if sender.timer is not None and (t_event is None
                                         or sender.timer < t_event):
            now = sender.timer
            if now > guard:
                raise ScenarioTimeoutError(f"exceeded {guard} ms")
            sender.on_timer(now)
            pump(now)
            continue
        now, _, direction, payload = heapq.heappop(heap)
        if now > guard:
            raise ScenarioTimeoutError(f"exceeded {guard} ms")
        value = struct.unpack(">I", payload)[0]
        if direction is Direction.A_TO_B:
            send_ack(now, receiver.on_segment(value))
        else:
            sender.on_ack(now, value)
            pump(now)
            if sender.done:
                tl.done_ms = now
    return tl


@dataclass(frozen=True)
class DiffEntry:
    problem: str  # missing | extra | mistimed
    kind: str
    seg: int
    predicted_t: float | None = None
    measured_t: float | None = None

    def __str__(self):
        if self.problem == "missing":
            return (f"missing in measured: {self.kind} seg {self.seg} "
                    f"@ {self.predicted_t:.3f}")
        if self.problem == "extra":
            return (f"extra in measured: {self.kind} seg {self.seg} "
                    f"@ {self.measured_t:.3f}")
        return (f"mistimed: {self.kind} seg {self.seg} predicted "
                f"{self.predicted_t:.3f} measured {self.measured_t:.3f}")


@dataclass
class TimelineDiff:
    entries: list[DiffEntry] = dc_field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.entries

    def __str__(self):
        return "\n".join(str(e) for e in self.entries) if self.entries \
            else "timelines match"


def compare(predicted: Timeline, measured: Timeline,
            tol_ms: float = 1.0) -> TimelineDiff:
    """Align events by (kind, seg) in order; flag missing/extra/mistimed."""
    from collections import defaultdict, deque
    pending = defaultdict(deque)
    for e in measured.events:
        pending[(e.kind, e.seg)].append(e)
    diff = TimelineDiff()
    for e in predicted.events:
        queue = pending[(e.kind, e.seg)]
        if not queue:
            diff.entries.append(
                DiffEntry("missing", e.kind, e.seg, predicted_t=e.t))
            continue
        m = queue.popleft()
        if abs(m.t - e.t) > tol_ms:
            diff.entries.append(DiffEntry("mistimed", e.kind, e.seg,
                                          predicted_t=e.t, measured_t=m.t))
    for (kind, seg), queue in pending.items():
        for m in queue:
            diff.entries.append(
                DiffEntry("extra", kind, seg, measured_t=m.t))
    return diff


def classroom_scenario() -> Scenario:
    """The classroom scenario: 20 ms RTT, 8 segments, the 6th and 8th
    transmissions lost, cwnd starting at 1 segment."""
    return Scenario(rtt=20.0, num_segments=8, init_cwnd=1,
                    ssthresh0=DEFAULT_SSTHRESH, rto=DEFAULT_RTO_MS,
                    loss_ordinals=frozenset({6, 8}))
