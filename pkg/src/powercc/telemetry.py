"""In-band telemetry path: header attach, per-hop push, echo onto acks.

Switch egress ports append a metadata record when a packet is scheduled for
transmission; the receiver copies the collected records onto the
acknowledgment so the sender sees the forward-path state one RTT later.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import LinkState

#: Default bound on recorded hops. Deep paths overflow and set `truncated`;
#: the packet itself is still forwarded.
H_MAX_DEFAULT = 8


class TelemetryError(Exception):
    pass


@dataclass(frozen=True)
class IntHopRecord:
    """One egress-port sample: queue length, timestamp, cumulative tx bytes
    and configured bandwidth, all taken at the packet's own dequeue instant
    (so qlen never includes the packet itself)."""

    qlen: float
    ts: float
    tx_bytes: float
    bandwidth: float


@dataclass
class IntHeader:
    """Ordered per-hop records, bounded by h_max."""

    hops: list = field(default_factory=list)
    truncated: bool = False
    h_max: int = H_MAX_DEFAULT


def int_attach(packet) -> "object":
    """Give a data packet an empty telemetry header.

    Pure acks pass through unchanged; attaching twice is a caller bug.
    """
    if getattr(packet, "is_ack", False):
        return packet
    if packet.int_header is not None:
        raise TelemetryError("packet already carries a telemetry header")
    packet.int_header = IntHeader()
    return packet


def int_push_hop(header: IntHeader, link: LinkState, now: float) -> bool:
    """Append this port's sample; returns False on overflow.

    On overflow the header is left unchanged apart from the truncation flag;
    the caller surfaces the event through a counter.
    """
    if len(header.hops) >= header.h_max:
        header.truncated = True
        return False
    header.hops.append(
        IntHopRecord(
            qlen=link.qlen,
            ts=now,
            tx_bytes=link.tx_bytes_total,
            bandwidth=link.bandwidth,
        )
    )
    return True


def int_echo(data_header: IntHeader) -> IntHeader:
    """Copy of the data packet's header for the ack, hop order preserved."""
    return IntHeader(
        hops=list(data_header.hops),
        truncated=data_header.truncated,
        h_max=data_header.h_max,
    )
