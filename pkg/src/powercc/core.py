"""Shared quantities and parameter records used by every other module.

Every quantity is a plain float in bytes and seconds. Configuration inputs
quoted in Gbps or microseconds are converted exactly once, at the parse
boundary, through :func:`gbps_to_bytes_per_s` and :func:`us_to_s`. Nothing
downstream ever multiplies by 8 or 1e-6 again.
"""

from __future__ import annotations

from dataclasses import dataclass, field

#: 1 Gbit/s expressed in bytes per second. The single bits->bytes boundary.
GBPS_TO_BYTES_PER_S = 1.25e8

#: Simulated payload bytes per packet. Configurable per run via CcParams.mss.
DEFAULT_MSS = 1000.0

#: Lower clamp applied to any feedback or power divisor. Keeps the gradient
#: law and steeply draining queues from dividing by zero.
EPS_POW = 1e-6


def gbps_to_bytes_per_s(gbps: float) -> float:
    return float(gbps) * GBPS_TO_BYTES_PER_S


def us_to_s(us: float) -> float:
    return float(us) * 1e-6


def bdp(bandwidth: float, tau: float) -> float:
    """Bandwidth-delay product in bytes.

    Raises ValueError for non-positive bandwidth or base RTT.
    """
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if tau <= 0:
        raise ValueError(f"base RTT must be positive, got {tau}")
    return bandwidth * tau


@dataclass(frozen=True)
class CcParams:
    """Per-flow control-law parameters.

    gamma is the EWMA weight in (0, 1], beta the additive increase in bytes,
    tau the configured base RTT, host_bw the sender NIC bandwidth. The
    default derivation (:meth:`with_defaults`) sets beta = host_bw*tau/N so
    that N flows sharing the NIC cannot make it a bottleneck, and
    cwnd_init = host_bw*tau so a new flow can probe at line rate for one RTT.
    """

    gamma: float
    beta: float
    tau: float
    host_bw: float
    n_expected_flows: int = 1
    cwnd_init: float = 0.0
    mss: float = DEFAULT_MSS
    cwnd_max: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.host_bw <= 0:
            raise ValueError(f"host_bw must be positive, got {self.host_bw}")
        if self.n_expected_flows < 1:
            raise ValueError("n_expected_flows must be >= 1")
        if self.cwnd_init <= 0:
            raise ValueError(f"cwnd_init must be positive, got {self.cwnd_init}")
        if self.mss <= 0:
            raise ValueError(f"mss must be positive, got {self.mss}")
        if self.cwnd_max == 0.0:
            # A sender cannot usefully hold more than a few line-rate BDPs;
            # unbounded windows would let a starved-feedback glitch wedge
            # the flow behind its own NIC forever.
            object.__setattr__(
                self, "cwnd_max",
                max(4.0 * self.host_bw * self.tau, self.cwnd_init, self.mss))
        if self.cwnd_max < max(self.cwnd_init, self.mss):
            raise ValueError("cwnd_max must cover cwnd_init and one MSS")

    @classmethod
    def with_defaults(
        cls,
        tau: float,
        host_bw: float,
        gamma: float = 0.9,
        n_expected_flows: int = 1,
        mss: float = DEFAULT_MSS,
        beta: float | None = None,
        cwnd_init: float | None = None,
        cwnd_max: float = 0.0,
    ) -> "CcParams":
        """Build params with the recommended derivations for beta/cwnd_init."""
        if beta is None:
            beta = host_bw * tau / n_expected_flows
        if cwnd_init is None:
            cwnd_init = host_bw * tau
        return cls(
            gamma=gamma,
            beta=beta,
            tau=tau,
            host_bw=host_bw,
            n_expected_flows=n_expected_flows,
            cwnd_init=cwnd_init,
            mss=mss,
            cwnd_max=cwnd_max,
        )


@dataclass
class CcState:
    """Rolling per-flow state mutated by the control laws.

    cwnd is a real-valued byte count; quantization to whole packets happens
    only at the transmit gate. cwnd_snapshots holds at most two
    (sequence, cwnd) pairs: the current RTT epoch and the previous one.
    """

    cwnd: float
    rate: float
    gamma_smooth: float = 1.0
    prev_int: tuple | None = None
    prev_rtt: float | None = None
    prev_ack_time: float | None = None
    last_update_seq: float = 0.0
    cwnd_snapshots: list = field(default_factory=list)

    @classmethod
    def initial(cls, params: CcParams) -> "CcState":
        # Rate starts at line rate; the first processed ack replaces it
        # with cwnd/tau.
        return cls(
            cwnd=params.cwnd_init,
            rate=params.host_bw,
            cwnd_snapshots=[(0.0, params.cwnd_init)],
        )


@dataclass
class LinkState:
    """Egress-port state sampled by telemetry: all in bytes / bytes-per-s."""

    bandwidth: float
    qlen: float = 0.0
    tx_bytes_total: float = 0.0
    buffer_cap: float = float("inf")

    def __post_init__(self) -> None:
        if self.bandwidth <= 0:
            raise ValueError("link bandwidth must be positive")


@dataclass(frozen=True)
class PowerSample:
    """One per-hop power computation.

    power_gamma = current_lambda * voltage_nu and
    norm_power = power_gamma / base_power_e hold exactly by construction.
    """

    current_lambda: float
    voltage_nu: float
    power_gamma: float
    base_power_e: float
    norm_power: float
    dt: float


@dataclass(frozen=True)
class EquilibriumPoint:
    """Aggregate fixed point (w_e, q_e); unique=False means none exists."""

    w_e: float
    q_e: float
    unique: bool
