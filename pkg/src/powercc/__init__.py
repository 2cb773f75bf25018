"""Power-based datacenter congestion control: laws, fluid analysis, and a
deterministic packet-level simulator."""

__version__ = "0.1.0"

from .core import (
    CcParams,
    CcState,
    EquilibriumPoint,
    LinkState,
    PowerSample,
    bdp,
    gbps_to_bytes_per_s,
    us_to_s,
)
from .laws import AckContext, CongestionController, LawKind

__all__ = [
    "AckContext",
    "CcParams",
    "CcState",
    "CongestionController",
    "EquilibriumPoint",
    "LawKind",
    "LinkState",
    "PowerSample",
    "bdp",
    "gbps_to_bytes_per_s",
    "us_to_s",
    "__version__",
]
