"""Per-ack congestion-control laws.

Five laws share one update skeleton

    w <- gamma * (w_ref * e / f + beta) + (1 - gamma) * w

and differ in the feedback ratio e/f and in which window they take as
reference:

* ``powertcp``       - f is the measured network power (current * voltage)
  read from per-hop telemetry, e = b^2 * tau its equilibrium value; the
  reference window is the one in effect when the acked segment was sent.
* ``theta-powertcp`` - the same law rewritten so f/e = (1 + rtt_gradient) *
  rtt / tau, computable from sender timestamps alone; window updates are
  gated to once per RTT.
* ``queue-length``   - f = qlen + b*tau (voltage), e = b*tau.
* ``delay``          - f = rtt, e = tau.
* ``rtt-gradient``   - f = 1 + rtt_gradient, e = 1.

The reference laws update against the current window every ack, exactly the
shared skeleton above.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .core import EPS_POW, CcParams, CcState, PowerSample
from .telemetry import IntHeader


class LawError(Exception):
    """The configured law cannot run with the feedback it was given."""


class LawKind(enum.Enum):
    POWERTCP = "powertcp"
    THETA_POWERTCP = "theta-powertcp"
    QUEUE_LEN_VOLTAGE = "queue-length"
    DELAY_VOLTAGE = "delay"
    RTT_GRADIENT_CURRENT = "rtt-gradient"

    @classmethod
    def from_name(cls, name: str) -> "LawKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown law {name!r}; expected one of "
                         f"{[k.value for k in cls]}")


#: Laws whose feedback comes from per-hop telemetry on acks.
INT_LAWS = (LawKind.POWERTCP, LawKind.QUEUE_LEN_VOLTAGE)


@dataclass(frozen=True)
class AckContext:
    """What the sender knows when an acknowledgment arrives.

    cwnd_at_send carries the window that was in effect when the acked
    segment left the sender, when the transport keeps that state per
    segment; otherwise the once-per-RTT snapshot pair supplies the
    reference window.
    """

    seq: float
    recv_time: float
    rtt: float | None = None
    int_header: IntHeader | None = None
    cwnd_at_send: float | None = None


@dataclass(frozen=True)
class NormPowerResult:
    gamma_smooth: float
    per_hop: tuple
    stale: bool


def _smooth(gamma_smooth: float, norm: float, dt: float, tau: float) -> float:
    # EWMA over one base RTT. dt is capped at tau: a feedback gap longer
    # than the averaging window simply replaces the smoothed value.
    dt = min(dt, tau)
    return (gamma_smooth * (tau - dt) + norm * dt) / tau


def norm_power(
    ack: AckContext,
    prev_int,
    params: CcParams,
    gamma_smooth: float,
) -> NormPowerResult:
    """Per-hop normalized power from two consecutive telemetry headers.

    For each hop: qdot and the port tx rate come from differences against
    the previous ack's record, current = qdot + mu, voltage = qlen + b*tau,
    power = current * voltage, and the result is normalized by the hop's
    base power b^2 * tau. The maximum normalized value across hops is folded
    into the running smoothed estimate with its own sample spacing.

    Hops with non-positive timestamp spacing are skipped; if every hop is
    skipped (or there is no usable previous header) the smoothed value is
    returned unchanged and the result is marked stale.
    """
    if ack.int_header is None:
        raise LawError("normalized power requires a telemetry header")
    hops = ack.int_header.hops
    if prev_int is None or len(prev_int) != len(hops) or not hops:
        return NormPowerResult(gamma_smooth, (), True)

    samples = []
    best = None
    for cur, prev in zip(hops, prev_int):
        dt = cur.ts - prev.ts
        if dt <= 0:
            continue
        qdot = (cur.qlen - prev.qlen) / dt
        mu = (cur.tx_bytes - prev.tx_bytes) / dt
        lam = qdot + mu
        nu = cur.qlen + cur.bandwidth * params.tau
        gam = lam * nu
        base = cur.bandwidth * cur.bandwidth * params.tau
        # Arrival rate cannot be negative; sampling noise can push the
        # estimator slightly below zero, so clamp.
        norm = max(gam / base, 0.0)
        sample = PowerSample(
            current_lambda=lam,
            voltage_nu=nu,
            power_gamma=gam,
            base_power_e=base,
            norm_power=norm,
            dt=dt,
        )
        samples.append(sample)
        if best is None or norm > best.norm_power:
            best = sample

    if best is None:
        return NormPowerResult(gamma_smooth, (), True)
    smoothed = _smooth(gamma_smooth, best.norm_power, best.dt, params.tau)
    return NormPowerResult(max(smoothed, EPS_POW), tuple(samples), False)


def update_window(
    gamma_smooth: float,
    cwnd_old: float,
    cwnd: float,
    params: CcParams,
) -> float:
    """One application of the shared update skeleton, floored at one MSS
    and capped at the sender's window ceiling."""
    if gamma_smooth <= 0:
        raise LawError("zero power: smoothed feedback must be positive")
    g = params.gamma
    new = g * (cwnd_old / gamma_smooth + params.beta) + (1.0 - g) * cwnd
    return min(max(new, params.mss), params.cwnd_max)


def get_cwnd_snapshot(state: CcState, seq: float) -> float:
    """Window in effect when the segment carrying `seq` was sent.

    Returns the most recent snapshot whose key is <= seq; acks older than
    every snapshot fall back to the oldest retained one.
    """
    for key, cwnd in reversed(state.cwnd_snapshots):
        if key <= seq:
            return cwnd
    return state.cwnd_snapshots[0][1]


def update_old(state: CcState, ack_seq: float, snd_nxt: float) -> None:
    """Refresh the once-per-RTT (snd_nxt, cwnd) snapshot pair.

    A new snapshot is taken when the ack sequence reaches the newest
    snapshot's key, i.e. when data sent after the last snapshot has been
    acknowledged. Only two snapshots are retained.
    """
    if ack_seq >= state.cwnd_snapshots[-1][0]:
        state.cwnd_snapshots.append((snd_nxt, state.cwnd))
        del state.cwnd_snapshots[:-2]


def on_ack_powertcp(
    state: CcState,
    ack: AckContext,
    params: CcParams,
    snd_nxt: float,
    per_rtt: bool = False,
) -> tuple[float, float]:
    """Telemetry-fed power law.

    Power smoothing runs on every ack; the window update normally does too.
    With per_rtt=True the update is gated to once per RTT epoch (the same
    sequence gate the delay-only variant uses), the configuration used for
    rapidly reconfiguring topologies.
    """
    if ack.int_header is None:
        raise LawError("powertcp needs telemetry on acks; flow misconfigured")
    result = norm_power(ack, state.prev_int, params, state.gamma_smooth)
    state.gamma_smooth = result.gamma_smooth
    if not per_rtt or ack.seq >= state.last_update_seq:
        if ack.cwnd_at_send is not None:
            cwnd_old = ack.cwnd_at_send
        else:
            cwnd_old = get_cwnd_snapshot(state, ack.seq)
        state.cwnd = update_window(state.gamma_smooth, cwnd_old, state.cwnd,
                                   params)
        if per_rtt:
            state.last_update_seq = snd_nxt
    state.rate = state.cwnd / params.tau
    state.prev_int = tuple(ack.int_header.hops)
    update_old(state, ack.seq, snd_nxt)
    return state.cwnd, state.rate


def theta_norm_power(
    rtt: float,
    prev_rtt: float | None,
    t_c: float,
    t_c_prev: float | None,
    tau: float,
    gamma_smooth: float,
) -> tuple[float, bool]:
    """Delay-only normalized power: (rtt_gradient + 1) * rtt / tau, smoothed.

    Returns (smoothed value, stale). Coincident or missing ack timestamps
    reuse the previous smoothed value. A draining queue can push the raw
    value to zero; it is clamped at EPS_POW so the window update stays
    defined.
    """
    if prev_rtt is None or t_c_prev is None or t_c <= t_c_prev:
        return gamma_smooth, True
    dt = t_c - t_c_prev
    theta_dot = (rtt - prev_rtt) / dt
    norm = max((theta_dot + 1.0) * rtt / tau, EPS_POW)
    return max(_smooth(gamma_smooth, norm, dt, tau), EPS_POW), False


def on_ack_theta(
    state: CcState,
    ack: AckContext,
    params: CcParams,
    snd_nxt: float,
) -> tuple[float, float]:
    """Delay-only variant: smoothing runs per ack, the window update fires
    at most once per RTT (gated on the sequence marked at the last update)."""
    if ack.rtt is None:
        raise LawError("theta-powertcp needs an RTT sample per ack")
    smoothed, _ = theta_norm_power(
        ack.rtt, state.prev_rtt, ack.recv_time, state.prev_ack_time,
        params.tau, state.gamma_smooth,
    )
    state.gamma_smooth = smoothed
    if ack.seq >= state.last_update_seq:
        if ack.cwnd_at_send is not None:
            cwnd_old = ack.cwnd_at_send
        else:
            cwnd_old = get_cwnd_snapshot(state, ack.seq)
        state.cwnd = update_window(state.gamma_smooth, cwnd_old, state.cwnd,
                                   params)
        state.last_update_seq = snd_nxt
    state.rate = state.cwnd / params.tau
    state.prev_rtt = ack.rtt
    state.prev_ack_time = ack.recv_time
    update_old(state, ack.seq, snd_nxt)
    return state.cwnd, state.rate


def _baseline_ratio(kind: LawKind, state: CcState, ack: AckContext,
                    params: CcParams) -> float:
    """e/f for the reference laws, with f clamped away from zero."""
    if kind is LawKind.QUEUE_LEN_VOLTAGE:
        if ack.int_header is None or not ack.int_header.hops:
            raise LawError("queue-length law needs telemetry on acks")
        # React to the most congested hop: max qlen relative to its BDP.
        ratio = None
        for hop in ack.int_header.hops:
            hop_bdp = hop.bandwidth * params.tau
            f = max(hop.qlen + hop_bdp, EPS_POW)
            r = hop_bdp / f
            if ratio is None or r < ratio:
                ratio = r
        return ratio
    if kind is LawKind.DELAY_VOLTAGE:
        if ack.rtt is None:
            raise LawError("delay law needs an RTT sample per ack")
        return params.tau / max(ack.rtt, EPS_POW)
    if kind is LawKind.RTT_GRADIENT_CURRENT:
        if ack.rtt is None:
            raise LawError("rtt-gradient law needs an RTT sample per ack")
        if state.prev_rtt is None or state.prev_ack_time is None \
                or ack.recv_time <= state.prev_ack_time:
            return 1.0
        theta_dot = (ack.rtt - state.prev_rtt) / (ack.recv_time - state.prev_ack_time)
        return 1.0 / max(theta_dot + 1.0, EPS_POW)
    raise LawError(f"{kind} is not a reference law")


def on_ack_baseline(
    kind: LawKind,
    state: CcState,
    ack: AckContext,
    params: CcParams,
    snd_nxt: float,
) -> tuple[float, float]:
    """Single-signal reference laws: the shared skeleton against the current
    window, applied once per RTT epoch.

    The analyzed update interval is one round trip; applying the
    multiplicative term on every ack would compound it cwnd/mss times per
    RTT and destabilize the laws the comparison needs intact. The gate is
    the same sequence-number device the delay-only variant uses.
    """
    if ack.seq >= state.last_update_seq:
        ratio = _baseline_ratio(kind, state, ack, params)
        g = params.gamma
        new = g * (state.cwnd * ratio + params.beta) + (1.0 - g) * state.cwnd
        state.cwnd = min(max(new, params.mss), params.cwnd_max)
        state.last_update_seq = snd_nxt
    state.rate = state.cwnd / params.tau
    state.prev_rtt = ack.rtt
    state.prev_ack_time = ack.recv_time
    return state.cwnd, state.rate


class CongestionController:
    """Per-flow dispatcher owning the law state.

    Deterministic given the ack sequence; one instance per flow, driven
    only from the single-threaded event loop.
    """

    def __init__(self, law: LawKind, params: CcParams,
                 per_rtt: bool = False):
        self.law = law
        self.params = params
        self.per_rtt = per_rtt
        self.state = CcState.initial(params)

    def on_ack(self, ack: AckContext, snd_nxt: float,
               inflight: float | None = None) -> tuple[float, float]:
        before = self.state.cwnd
        if self.law is LawKind.POWERTCP:
            cwnd, rate = on_ack_powertcp(self.state, ack, self.params,
                                         snd_nxt, per_rtt=self.per_rtt)
        elif self.law is LawKind.THETA_POWERTCP:
            cwnd, rate = on_ack_theta(self.state, ack, self.params, snd_nxt)
        else:
            cwnd, rate = on_ack_baseline(self.law, self.state, ack,
                                         self.params, snd_nxt)
        if inflight is not None and cwnd > before \
                and inflight > 1.05 * before + 2.0 * self.params.mss:
            # Window validation: while a backlog well beyond the window is
            # still draining, the flow is not ack-clocked and a low measured
            # current reflects its own silence, not free bandwidth. Hold
            # increases until inflight falls back under the window; the
            # slack keeps ordinary post-decrease jitter from ratcheting
            # windows down.
            self.state.cwnd = before
            self.state.rate = before / self.params.tau
            cwnd, rate = before, self.state.rate
        return cwnd, rate
