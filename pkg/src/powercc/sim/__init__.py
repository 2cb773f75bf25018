from .circuit import CircuitSchedule, circuit_step, ring_pair_schedule
from .engine import ACK_SIZE, EventKind, Flow, FlowSpec, Packet, Port, Simulator
from .topology import (
    Network,
    RdcnNetwork,
    build_dumbbell,
    build_parking_lot,
    build_rdcn,
)

__all__ = [
    "ACK_SIZE",
    "CircuitSchedule",
    "EventKind",
    "Flow",
    "FlowSpec",
    "Network",
    "Packet",
    "Port",
    "RdcnNetwork",
    "Simulator",
    "build_dumbbell",
    "build_parking_lot",
    "build_rdcn",
    "circuit_step",
    "ring_pair_schedule",
]
