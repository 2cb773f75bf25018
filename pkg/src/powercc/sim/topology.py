"""Network container and the desk-scale topologies: dumbbell, two-hop
parking lot, and a small reconfigurable ring with a circuit schedule.

Builders solve the residual propagation delay on designated links so that a
flow's idle base RTT (serialization included, store-and-forward) lands
exactly on the configured tau. That keeps the laws' configured base RTT
honest and the fluid-model equilibrium comparable to the packet runs.
"""

from __future__ import annotations

from .circuit import CircuitSchedule, circuit_step
from .engine import ACK_SIZE, EventKind, Host, Port, Switch


class Network:
    def __init__(self):
        self.nodes = {}
        self.ports = []
        self.bottleneck = None
        self.meta = {}

    def add_host(self, name: str) -> Host:
        host = Host(name)
        self.nodes[name] = host
        return host

    def add_switch(self, name: str) -> Switch:
        sw = Switch(name)
        self.nodes[name] = sw
        return sw

    def add_node(self, node) -> None:
        self.nodes[node.name] = node

    def link(self, src, dst, bandwidth, prop_delay, buffer_cap=float("inf"),
             int_enabled=False, gate=None, watch=False) -> Port:
        port = Port(name=f"{src.name}->{dst.name}", src=src, dst=dst,
                    bandwidth=bandwidth, prop_delay=prop_delay,
                    buffer_cap=buffer_cap, int_enabled=int_enabled,
                    gate=gate)
        port.watch = watch
        self.ports.append(port)
        if isinstance(src, Host):
            src.uplink = port
        return port

    def watched_ports(self):
        return [p for p in self.ports if p.watch]

    def port(self, name: str) -> Port:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)

    def attach(self, sim) -> None:
        pass

    def schedule_reconfig(self, sim, horizon: float) -> None:
        pass

    # -- path timing -------------------------------------------------------

    def _walk(self, src_host: str, dst_host: str, size: float):
        """Ports a packet of `size` traverses from src to dst under static
        routing, in order."""
        node = self.nodes[src_host]
        ports = [node.uplink]
        node = node.uplink.dst
        hops = 0
        while node.name != dst_host:
            if not isinstance(node, Switch):
                raise ValueError(f"path from {src_host} ran into {node.name}")
            port = node.routes[dst_host]
            ports.append(port)
            node = port.dst
            hops += 1
            if hops > 32:
                raise ValueError("routing loop")
        return ports

    def idle_rtt(self, src_host: str, dst_host: str, mss: float) -> float:
        """Base RTT of an idle network: store-and-forward serialization of
        one data packet out plus one ack back, with propagation."""
        total = 0.0
        for port in self._walk(src_host, dst_host, mss):
            total += mss / port.bandwidth + port.prop_delay
        for port in self._walk(dst_host, src_host, ACK_SIZE):
            total += ACK_SIZE / port.bandwidth + port.prop_delay
        return total

    def forward_delay(self, src_host: str, dst_host: str, mss: float,
                      upto_port: Port) -> float:
        """Time from transmit start at the sender until arrival in
        `upto_port`'s queue on an idle path."""
        total = 0.0
        for port in self._walk(src_host, dst_host, mss):
            if port is upto_port:
                return total
            total += mss / port.bandwidth + port.prop_delay
        raise ValueError(f"{upto_port.name} not on path "
                         f"{src_host}->{dst_host}")


def _ser(size: float, bw: float) -> float:
    return size / bw


def build_dumbbell(
    sender_rtts,
    host_bw: float,
    trunk_bw: float,
    bottleneck_bw: float,
    mss: float = 1000.0,
    buffer_cap: float | None = None,
    base_prop: float = 1e-7,
) -> Network:
    """N senders -> SW1 -> SW2 -> one receiver; the SW2->R link is the
    bottleneck. Each sender's access-link propagation is solved so its idle
    RTT equals sender_rtts[i]."""
    net = Network()
    if buffer_cap is None:
        buffer_cap = 4.0 * bottleneck_bw * max(sender_rtts)
    sw1 = net.add_switch("SW1")
    sw2 = net.add_switch("SW2")
    recv = net.add_host("R")

    fixed = (
        _ser(mss, host_bw) + _ser(mss, trunk_bw) + _ser(mss, bottleneck_bw)
        + _ser(ACK_SIZE, bottleneck_bw) + _ser(ACK_SIZE, trunk_bw)
        + _ser(ACK_SIZE, host_bw)
        + 4.0 * base_prop  # trunk and bottleneck links, both directions
    )

    trunk = net.link(sw1, sw2, trunk_bw, base_prop, buffer_cap=buffer_cap,
                     int_enabled=True, watch=True)
    bneck = net.link(sw2, recv, bottleneck_bw, base_prop,
                     buffer_cap=buffer_cap, int_enabled=True, watch=True)
    net.link(recv, sw2, bottleneck_bw, base_prop)  # ack uplink
    trunk_rev = net.link(sw2, sw1, trunk_bw, base_prop)

    senders = []
    for i, rtt in enumerate(sender_rtts):
        prop = (rtt - fixed) / 2.0
        if prop < 0:
            raise ValueError(
                f"target RTT {rtt} too small for serialization floor {fixed}")
        name = f"S{i}"
        host = net.add_host(name)
        net.link(host, sw1, host_bw, prop, int_enabled=True)
        down = net.link(sw1, host, host_bw, prop)
        sw1.routes[name] = down
        sw2.routes[name] = trunk_rev
        senders.append(name)

    sw1.routes["R"] = trunk
    sw2.routes["R"] = bneck
    net.bottleneck = bneck
    net.meta = {"senders": senders, "receiver": "R", "mss": mss}
    return net


def build_parking_lot(
    bw: float,
    host_bw: float,
    rtt_long: float,
    mss: float = 1000.0,
    buffer_cap: float | None = None,
    base_prop: float = 1e-7,
) -> Network:
    """Three switches in a line with two potential bottlenecks. Flow A
    crosses both inter-switch links (its idle RTT is solved to rtt_long);
    flows B and C each cross one."""
    net = Network()
    if buffer_cap is None:
        buffer_cap = 4.0 * bw * rtt_long
    sw = [net.add_switch(f"SW{k}") for k in (1, 2, 3)]

    fixed = (
        _ser(mss, host_bw) + 2 * _ser(mss, bw) + _ser(mss, host_bw)
        + 2 * _ser(ACK_SIZE, host_bw) + 2 * _ser(ACK_SIZE, bw)
        + 4 * base_prop
    )
    prop_a = (rtt_long - fixed) / 2.0
    if prop_a < 0:
        raise ValueError("rtt_long below serialization floor")

    hop12 = net.link(sw[0], sw[1], bw, base_prop, buffer_cap=buffer_cap,
                     int_enabled=True, watch=True)
    hop23 = net.link(sw[1], sw[2], bw, base_prop, buffer_cap=buffer_cap,
                     int_enabled=True, watch=True)
    hop21 = net.link(sw[1], sw[0], bw, base_prop)
    hop32 = net.link(sw[2], sw[1], bw, base_prop)

    def attach_host(name, switch, prop):
        host = net.add_host(name)
        net.link(host, switch, host_bw, prop, int_enabled=True)
        down = net.link(switch, host, host_bw, prop, int_enabled=True)
        switch.routes[name] = down
        return host

    attach_host("A_src", sw[0], prop_a)
    attach_host("A_dst", sw[2], prop_a)
    attach_host("B_src", sw[0], base_prop)
    attach_host("B_dst", sw[1], base_prop)
    attach_host("C_src", sw[1], base_prop)
    attach_host("C_dst", sw[2], base_prop)

    for dst in ("A_dst", "C_dst"):
        sw[0].routes.setdefault(dst, hop12)
        sw[1].routes.setdefault(dst, hop23)
    sw[0].routes.setdefault("B_dst", hop12)
    for dst in ("A_src", "B_src"):
        sw[1].routes.setdefault(dst, hop21)
        sw[2].routes.setdefault(dst, hop32)
    sw[2].routes.setdefault("C_src", hop32)
    sw[1].routes.setdefault("B_dst", sw[1].routes["B_dst"])

    net.bottleneck = hop23
    net.meta = {"mss": mss}
    return net


class TorSwitch(Switch):
    """Top-of-rack switch of the reconfigurable ring: per-destination
    virtual output queues toward the circuit, packet-switched fallback."""

    def __init__(self, name: str, index: int, schedule: CircuitSchedule,
                 tor_of: dict):
        super().__init__(name)
        self.index = index
        self.schedule = schedule
        self.tor_of = tor_of
        self.voq = {}
        self.uplink = None

    def route(self, packet, now: float):
        dst_tor = self.tor_of[packet.dst]
        if dst_tor == self.index:
            return self.routes[packet.dst]
        matching = circuit_step(self.schedule, now)
        if matching is not None and matching[self.index] == dst_tor:
            port = self.voq.get(dst_tor)
            if port is not None:
                k = int(now // self.schedule.slot)
                _, day_end = self.schedule.day_bounds(k)
                backlog = (port.qlen + packet.size) / port.bandwidth
                if now + backlog <= day_end:
                    return port
        return self.uplink


class RdcnNetwork(Network):
    """Ring of ToR switches with a packet-switched fallback star and one
    optical circuit cycling through pair matchings."""

    def __init__(self, schedule: CircuitSchedule):
        super().__init__()
        self.schedule = schedule
        self.tors = []

    def schedule_reconfig(self, sim, horizon: float) -> None:
        sched = self.schedule
        k = 0
        while True:
            start, end = sched.day_bounds(k)
            if start > horizon:
                break
            m = sched.matchings[sched.matching_index(k)]
            sim.schedule(start, EventKind.CIRCUIT_RECONFIG,
                         (self._day_start, (m,)))
            if end <= horizon:
                sim.schedule(end, EventKind.CIRCUIT_RECONFIG,
                             (self._day_end, (m,)))
            k += 1

    def _connected_pairs(self, matching):
        for a, b in matching.items():
            if a != b:
                yield a, b

    def _day_start(self, sim, now: float, matching) -> None:
        for a, b in self._connected_pairs(matching):
            port = self.tors[a].voq.get(b)
            if port is not None:
                sim.kick(port, now)

    def _day_end(self, sim, now: float, matching) -> None:
        # Strand nothing on a dark circuit: leftovers fall back to the
        # packet network, order preserved.
        for a, b in self._connected_pairs(matching):
            tor = self.tors[a]
            port = tor.voq.get(b)
            if port is None:
                continue
            while port.fifo:
                pkt = port.fifo.popleft()
                port.qlen -= pkt.size
                sim.enqueue(tor.uplink, pkt, now)


def build_rdcn(
    schedule: CircuitSchedule,
    n_tors: int = 3,
    hosts_per_tor: int = 1,
    host_bw: float = 12.5e9,
    packet_bw: float = 3.125e9,
    circuit_bw: float = 12.5e9,
    target_rtt: float = 16e-6,
    mss: float = 1000.0,
    buffer_cap: float | None = None,
    base_prop: float = 1e-7,
) -> RdcnNetwork:
    """A small rack per ToR, 25 Gbps-class packet fallback through a central
    switch, and circuit pairs per the schedule. Host NICs should sum to at
    least the circuit rate per ToR or the circuit cannot be filled.

    Propagation is solved so the packet path and the circuit path share the
    same idle base RTT: the laws' configured tau then matches either path.
    """
    net = RdcnNetwork(schedule)
    if buffer_cap is None:
        buffer_cap = 8.0 * circuit_bw * target_rtt
    tor_of = {}
    psw = net.add_switch("P")
    tors = []
    for i in range(n_tors):
        tor = TorSwitch(f"T{i}", i, schedule, tor_of)
        net.add_node(tor)
        tors.append(tor)
    net.tors = tors

    fixed_pkt = (
        2 * _ser(mss, host_bw) + 2 * _ser(mss, packet_bw)
        + 2 * _ser(ACK_SIZE, host_bw) + 2 * _ser(ACK_SIZE, packet_bw)
        + 4 * base_prop
    )
    prop_pkt = (target_rtt - fixed_pkt) / 4.0
    fixed_circ = (
        2 * _ser(mss, host_bw) + _ser(mss, circuit_bw)
        + 2 * _ser(ACK_SIZE, host_bw) + _ser(ACK_SIZE, circuit_bw)
        + 4 * base_prop
    )
    prop_circ = (target_rtt - fixed_circ) / 2.0
    if prop_pkt < 0 or prop_circ < 0:
        raise ValueError("target RTT below serialization floor")

    hosts = []
    for i, tor in enumerate(tors):
        up = net.link(tor, psw, packet_bw, prop_pkt, buffer_cap=buffer_cap,
                      int_enabled=True, watch=True)
        tor.uplink = up
        pdown = net.link(psw, tor, packet_bw, prop_pkt,
                         buffer_cap=buffer_cap, int_enabled=True)
        for j in range(hosts_per_tor):
            name = f"h{i}" if hosts_per_tor == 1 else f"h{i}_{j}"
            host = net.add_host(name)
            hosts.append(name)
            tor_of[name] = i
            net.link(host, tor, host_bw, base_prop, int_enabled=True)
            down = net.link(tor, host, host_bw, base_prop, int_enabled=True)
            tor.routes[name] = down
            psw.routes[name] = pdown

    pairs = set()
    for m in schedule.matchings:
        for a, b in m.items():
            if a != b:
                pairs.add((a, b))
    for a, b in sorted(pairs):
        tor_a = tors[a]

        def make_gate(tor_index, peer, bw):
            sched = schedule

            def gate(now, size):
                matching = circuit_step(sched, now)
                if matching is None or matching[tor_index] != peer:
                    return False
                k = int(now // sched.slot)
                _, day_end = sched.day_bounds(k)
                return now + size / bw <= day_end + 1e-15

            return gate

        port = net.link(tor_a, tors[b], circuit_bw, prop_circ,
                        buffer_cap=buffer_cap, int_enabled=True,
                        gate=make_gate(a, b, circuit_bw), watch=True)
        tor_a.voq[b] = port

    net.meta = {
        "hosts": hosts,
        "mss": mss,
        "prop_pkt": prop_pkt,
        "prop_circ": prop_circ,
        "target_rtt": target_rtt,
    }
    return net
