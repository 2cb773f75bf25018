"""Deterministic discrete-event, packet-level simulator.

Hosts run paced, windowed senders; switches forward through per-port FIFO
drop-tail queues and stamp telemetry at dequeue; links model serialization
plus propagation. Events are processed in (time, sequence) order, so a run
is a pure function of its inputs: identical configurations produce
bit-identical traces.
"""

from __future__ import annotations

import enum
import heapq
from collections import deque
from dataclasses import dataclass

from ..core import CcParams, LinkState
from ..laws import AckContext, CongestionController, LawKind
from ..metrics import MetricRecord
from ..telemetry import int_attach, int_echo, int_push_hop

ACK_SIZE = 64.0


class EventKind(enum.IntEnum):
    FLOW_START = 0
    PACKET_ARRIVAL = 1
    DEQUEUE = 2
    TIMER_FIRE = 3
    CIRCUIT_RECONFIG = 4


class Packet:
    __slots__ = ("flow_id", "src", "dst", "seq", "size", "is_ack",
                 "int_header", "sent_at", "acked_seq", "acked_size",
                 "ack_int", "cwnd_at_send")

    def __init__(self, flow_id, src, dst, seq, size, is_ack=False,
                 sent_at=0.0, acked_seq=0.0, acked_size=0.0,
                 cwnd_at_send=0.0):
        self.flow_id = flow_id
        self.src = src
        self.dst = dst
        self.seq = seq
        self.size = size
        self.is_ack = is_ack
        self.int_header = None
        self.sent_at = sent_at
        self.acked_seq = acked_seq
        self.acked_size = acked_size
        self.ack_int = None
        self.cwnd_at_send = cwnd_at_send


class Port:
    """Egress FIFO plus the outgoing link it serializes onto.

    Telemetry samples are taken at the dequeue instant, after the departing
    packet has left the queue, so its own bytes never appear in qlen; the
    transmitted-bytes counter is advanced at serialization completion, just
    before the next dequeue decision.
    """

    __slots__ = ("name", "src", "dst", "bandwidth", "prop_delay",
                 "buffer_cap", "fifo", "qlen", "busy", "pending_size",
                 "tx_bytes_total", "drops", "drop_bytes", "int_enabled",
                 "gate", "watch")

    def __init__(self, name, src, dst, bandwidth, prop_delay,
                 buffer_cap=float("inf"), int_enabled=False, gate=None):
        if bandwidth <= 0:
            raise ValueError(f"port {name}: bandwidth must be positive")
        self.name = name
        self.src = src
        self.dst = dst
        self.bandwidth = bandwidth
        self.prop_delay = prop_delay
        self.buffer_cap = buffer_cap
        self.fifo = deque()
        self.qlen = 0.0
        self.busy = False
        self.pending_size = None
        self.tx_bytes_total = 0.0
        self.drops = 0
        self.drop_bytes = 0.0
        self.int_enabled = int_enabled
        self.gate = gate
        self.watch = False

    def link_state(self) -> LinkState:
        return LinkState(bandwidth=self.bandwidth, qlen=self.qlen,
                         tx_bytes_total=self.tx_bytes_total,
                         buffer_cap=self.buffer_cap)


class Node:
    def __init__(self, name):
        self.name = name


class Host(Node):
    """End host: one uplink toward its switch; terminates data (emitting
    acks) and acks (driving the owning flow's controller)."""

    def __init__(self, name):
        super().__init__(name)
        self.uplink = None
        self.flows_by_id = {}


class Switch(Node):
    """Static forwarding: dst host name -> egress port."""

    def __init__(self, name):
        super().__init__(name)
        self.routes = {}

    def route(self, packet, now):
        return self.routes[packet.dst]


@dataclass
class FlowSpec:
    """Configuration of one flow."""

    flow_id: int
    src: str
    dst: str
    law: LawKind
    params: CcParams
    size: float | None = None       # None: persistent
    start: float = 0.0
    stop: float | None = None       # persistent flows may be stopped
    per_rtt: bool = False           # gate window updates to once per RTT


class Flow:
    """Runtime sender state for one flow."""

    def __init__(self, spec: FlowSpec):
        self.spec = spec
        self.cc = CongestionController(spec.law, spec.params,
                                       per_rtt=spec.per_rtt)
        self.next_seq = 0.0
        self.acked_bytes = 0.0
        self.inflight = 0.0
        self.next_pace_time = spec.start
        self.pace_wake = None
        self.finished = False
        self.fct = None

    @property
    def flow_id(self):
        return self.spec.flow_id

    def sendable(self, now: float) -> bool:
        if self.finished or now < self.spec.start:
            return False
        if self.spec.stop is not None and now >= self.spec.stop:
            return False
        if self.spec.size is not None and self.next_seq >= self.spec.size:
            return False
        return True

    def next_packet_size(self) -> float:
        if self.spec.size is None:
            return self.spec.params.mss
        return min(self.spec.params.mss, self.spec.size - self.next_seq)

    def pacing_rate(self, now: float) -> float:
        # line rate for the first configured RTT, cwnd/tau afterwards;
        # hardware pacing cannot exceed the NIC line rate
        if now < self.spec.start + self.spec.params.tau:
            return self.spec.params.host_bw
        return min(self.cc.state.rate, self.spec.params.host_bw)


@dataclass
class SimCounters:
    data_injected: int = 0
    data_delivered: int = 0
    data_dropped: int = 0
    acks_injected: int = 0
    acks_delivered: int = 0
    acks_dropped: int = 0
    int_overflows: int = 0

    def conserved(self) -> bool:
        return (self.data_injected >= self.data_delivered + self.data_dropped
                and self.acks_injected >= self.acks_delivered
                + self.acks_dropped)


class Simulator:
    """Single-threaded event loop over one network and a set of flows."""

    def __init__(self, network, flows, sample_interval=None, seed=0,
                 reverse_path_int=False, law_trace=False, debug=False):
        self.network = network
        self.flows = [Flow(spec) for spec in flows]
        self.sample_interval = sample_interval
        self.seed = seed
        self.reverse_path_int = reverse_path_int
        self.debug = debug
        self.now = 0.0
        self.counters = SimCounters()
        self.records = []
        self.completions = []       # (flow_id, size, duration)
        self.law_trace = [] if law_trace else None
        self._events = []
        self._seq = 0
        self._last_tx = {}
        self._horizon = None
        self.starved = False

        for fl in self.flows:
            host = network.nodes[fl.spec.src]
            host.flows_by_id[fl.flow_id] = fl
        network.attach(self)

    # -- event plumbing ------------------------------------------------

    def schedule(self, t: float, kind: EventKind, data) -> None:
        self._seq += 1
        heapq.heappush(self._events, (t, self._seq, kind, data))

    def run(self, horizon: float) -> None:
        self._horizon = horizon
        for fl in self.flows:
            self.schedule(fl.spec.start, EventKind.FLOW_START, fl)
        self.network.schedule_reconfig(self, horizon)
        if self.sample_interval:
            self.schedule(self.sample_interval, EventKind.TIMER_FIRE,
                          ("sample", None))
        while self._events:
            t, _, kind, data = heapq.heappop(self._events)
            if t > horizon:
                break
            if self.debug and t < self.now:
                raise AssertionError("time went backwards")
            self.now = t
            self._dispatch(kind, data, t)
            if self.debug:
                self._check_invariants()
        self.now = horizon
        self.starved = not self._events and any(
            not f.finished and f.spec.size is not None for f in self.flows)

    def _dispatch(self, kind, data, now) -> None:
        if kind == EventKind.DEQUEUE:
            self._dequeue(data, now)
        elif kind == EventKind.PACKET_ARRIVAL:
            pkt, node = data
            self._arrive(pkt, node, now)
        elif kind == EventKind.TIMER_FIRE:
            tag, obj = data
            if tag == "pace":
                fl, t = obj
                if fl.pace_wake == t:
                    fl.pace_wake = None
                    self.try_send(fl, now)
            elif tag == "sample":
                self._sample(now)
                nxt = now + self.sample_interval
                if nxt <= self._horizon:
                    self.schedule(nxt, EventKind.TIMER_FIRE, ("sample", None))
        elif kind == EventKind.FLOW_START:
            self.try_send(data, now)
        elif kind == EventKind.CIRCUIT_RECONFIG:
            callback, args = data
            callback(self, now, *args)

    # -- port machinery --------------------------------------------------

    def enqueue(self, port: Port, pkt: Packet, now: float) -> None:
        if port.qlen + pkt.size > port.buffer_cap:
            port.drops += 1
            port.drop_bytes += pkt.size
            if pkt.is_ack:
                self.counters.acks_dropped += 1
            else:
                self.counters.data_dropped += 1
            return
        port.fifo.append(pkt)
        port.qlen += pkt.size
        if not port.busy:
            port.busy = True
            self.schedule(now, EventKind.DEQUEUE, port)

    def _dequeue(self, port: Port, now: float) -> None:
        if port.pending_size is not None:
            port.tx_bytes_total += port.pending_size
            port.pending_size = None
        if not port.fifo:
            port.busy = False
            return
        head = port.fifo[0]
        if port.gate is not None and not port.gate(now, head.size):
            port.busy = False
            return
        pkt = port.fifo.popleft()
        port.qlen -= pkt.size
        if port.int_enabled:
            if not pkt.is_ack and pkt.int_header is not None:
                if not int_push_hop(pkt.int_header, port.link_state(), now):
                    self.counters.int_overflows += 1
            elif pkt.is_ack and self.reverse_path_int \
                    and pkt.ack_int is not None:
                if not int_push_hop(pkt.ack_int, port.link_state(), now):
                    self.counters.int_overflows += 1
        ser = pkt.size / port.bandwidth
        port.pending_size = pkt.size
        port.busy = True
        self.schedule(now + ser + port.prop_delay, EventKind.PACKET_ARRIVAL,
                      (pkt, port.dst))
        self.schedule(now + ser, EventKind.DEQUEUE, port)

    def kick(self, port: Port, now: float) -> None:
        """Wake a gated port (circuit reconfiguration)."""
        if not port.busy:
            port.busy = True
            self.schedule(now, EventKind.DEQUEUE, port)

    # -- host behavior ---------------------------------------------------

    def _arrive(self, pkt: Packet, node: Node, now: float) -> None:
        if isinstance(node, Switch):
            self.enqueue(node.route(pkt, now), pkt, now)
            return
        if not pkt.is_ack:
            if pkt.dst != node.name:
                raise AssertionError(
                    f"data packet for {pkt.dst} arrived at {node.name}")
            self.counters.data_delivered += 1
            ack = Packet(flow_id=pkt.flow_id, src=node.name, dst=pkt.src,
                         seq=pkt.seq, size=ACK_SIZE, is_ack=True,
                         sent_at=pkt.sent_at, acked_seq=pkt.seq,
                         acked_size=pkt.size,
                         cwnd_at_send=pkt.cwnd_at_send)
            if pkt.int_header is not None:
                ack.ack_int = int_echo(pkt.int_header)
            self.counters.acks_injected += 1
            self.enqueue(node.uplink, ack, now)
            return
        self.counters.acks_delivered += 1
        fl = node.flows_by_id.get(pkt.flow_id)
        if fl is None:
            return
        self._on_ack(fl, pkt, now)

    def _on_ack(self, fl: Flow, pkt: Packet, now: float) -> None:
        fl.inflight -= pkt.acked_size
        fl.acked_bytes += pkt.acked_size
        ctx = AckContext(seq=pkt.acked_seq, recv_time=now,
                         rtt=now - pkt.sent_at, int_header=pkt.ack_int,
                         cwnd_at_send=pkt.cwnd_at_send)
        cwnd, rate = fl.cc.on_ack(ctx, snd_nxt=fl.next_seq,
                                  inflight=fl.inflight)
        if self.law_trace is not None:
            self.law_trace.append(
                (now, fl.flow_id, cwnd, rate, fl.cc.state.gamma_smooth))
        if (fl.spec.size is not None and not fl.finished
                and fl.acked_bytes >= fl.spec.size):
            fl.finished = True
            fl.fct = now - fl.spec.start
            self.completions.append((fl.flow_id, fl.spec.size, fl.fct))
            self.records.append(MetricRecord(
                t=now, entity=f"flow:{fl.flow_id}", kind="fct", value=fl.fct))
            return
        self.try_send(fl, now)

    def try_send(self, fl: Flow, now: float) -> None:
        """Release packets while the window and the pacing gate allow."""
        host = self.network.nodes[fl.spec.src]
        while fl.sendable(now):
            size = fl.next_packet_size()
            if fl.inflight + size > fl.cc.state.cwnd + 1e-9:
                return
            if now + 1e-15 < fl.next_pace_time:
                t = fl.next_pace_time
                if fl.pace_wake is None or t < fl.pace_wake:
                    fl.pace_wake = t
                    self.schedule(t, EventKind.TIMER_FIRE, ("pace", (fl, t)))
                return
            pkt = Packet(flow_id=fl.flow_id, src=fl.spec.src,
                         dst=fl.spec.dst, seq=fl.next_seq, size=size,
                         sent_at=now, cwnd_at_send=fl.cc.state.cwnd)
            int_attach(pkt)
            fl.next_seq += size
            fl.inflight += size
            fl.next_pace_time = max(fl.next_pace_time, now) \
                + size / fl.pacing_rate(now)
            self.counters.data_injected += 1
            self.enqueue(host.uplink, pkt, now)

    # -- sampling ----------------------------------------------------------

    def _sample(self, now: float) -> None:
        rec = self.records.append
        for port in self.network.watched_ports():
            qlen = port.qlen
            tx = port.tx_bytes_total
            last = self._last_tx.get(port.name, 0.0)
            self._last_tx[port.name] = tx
            entity = f"port:{port.name}"
            rec(MetricRecord(t=now, entity=entity, kind="qlen", value=qlen))
            rec(MetricRecord(t=now, entity=entity, kind="throughput",
                             value=(tx - last) / self.sample_interval))
        for fl in self.flows:
            entity = f"flow:{fl.flow_id}"
            rec(MetricRecord(t=now, entity=entity, kind="cwnd",
                             value=fl.cc.state.cwnd))
            rec(MetricRecord(t=now, entity=entity, kind="rate",
                             value=fl.cc.state.rate))
            rec(MetricRecord(t=now, entity=entity, kind="inflight",
                             value=fl.inflight))
            rec(MetricRecord(t=now, entity=entity, kind="acked",
                             value=fl.acked_bytes))

    # -- invariants ----------------------------------------------------------

    def _check_invariants(self) -> None:
        for port in self.network.ports:
            total = sum(p.size for p in port.fifo)
            if abs(total - port.qlen) > 1e-6:
                raise AssertionError(f"{port.name}: qlen out of sync")
            if port.qlen > port.buffer_cap + 1e-9:
                raise AssertionError(f"{port.name}: buffer bound violated")
            if port.fifo and not port.busy and port.gate is None:
                raise AssertionError(f"{port.name}: idle with backlog")
        if not self.counters.conserved():
            raise AssertionError("packet conservation violated")

    def total_drops(self) -> int:
        return self.counters.data_dropped + self.counters.acks_dropped
