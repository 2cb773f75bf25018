"""Continuous-time model of aggregate window and queue dynamics.

The queue follows the standard fluid model

    qdot(t) = w(t - t_f) / theta(t) - b        while q > 0, else clamped
    theta(t) = q(t) / b + tau

and the window follows the law-specific dynamics obtained from the per-ack
update by a first-order (Euler) approximation with rate gamma_r = gamma/dt.
For the power law the feedback term collapses algebraically (power equals
bandwidth times the delayed aggregate window) and the window dynamics reduce
to the delay-free form

    wdot(t) = gamma_r * (-w(t) + b*tau + beta_hat)

For the reference laws the feedback is evaluated on the delayed state
q(t - theta(t) + t_f), which makes the system a genuine delay-differential
equation; integration uses fixed-step RK4 with linearly interpolated history.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .core import EPS_POW, EquilibriumPoint
from .laws import LawKind


class NotConvergedError(Exception):
    """The trajectory never came within the requested distance of the target."""


@dataclass(frozen=True)
class FluidParams:
    """Aggregate-model parameters.

    gamma_r is the continuous-time update rate gamma/delta_t; beta_hat the
    summed additive increase of all flows; t_f the sender-to-bottleneck
    propagation delay (0 <= t_f <= tau).
    """

    b: float
    tau: float
    t_f: float
    gamma_r: float
    beta_hat: float
    law: LawKind
    delta_t: float

    def __post_init__(self) -> None:
        if self.b <= 0 or self.tau <= 0:
            raise ValueError("bandwidth and tau must be positive")
        if not 0.0 <= self.t_f <= self.tau:
            raise ValueError("t_f must lie in [0, tau]")
        if self.gamma_r < 0:
            raise ValueError("gamma_r must be non-negative")
        if self.beta_hat < 0:
            raise ValueError("beta_hat must be non-negative")

    @classmethod
    def make(
        cls,
        b: float,
        tau: float,
        beta_hat: float,
        law: LawKind = LawKind.POWERTCP,
        gamma: float = 0.9,
        delta_t: float | None = None,
        t_f: float | None = None,
    ) -> "FluidParams":
        """gamma/delta_t parameterization; delta_t defaults to one RTT and
        t_f to half of it."""
        if delta_t is None:
            delta_t = tau
        if t_f is None:
            t_f = tau / 2.0
        return cls(
            b=b,
            tau=tau,
            t_f=t_f,
            gamma_r=gamma / delta_t,
            beta_hat=beta_hat,
            law=law,
            delta_t=delta_t,
        )


@dataclass(frozen=True)
class FluidState:
    w: float
    q: float
    t: float = 0.0


class FluidTrajectory:
    """Fixed-step samples of (t, w, q)."""

    def __init__(self, t: np.ndarray, w: np.ndarray, q: np.ndarray,
                 step: float, params: FluidParams):
        self.t = t
        self.w = w
        self.q = q
        self.step = step
        self.params = params

    def final_state(self) -> FluidState:
        return FluidState(w=float(self.w[-1]), q=float(self.q[-1]),
                          t=float(self.t[-1]))

    def w_at(self, t: float) -> float:
        return float(np.interp(t, self.t, self.w))

    def q_at(self, t: float) -> float:
        return float(np.interp(t, self.t, self.q))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t_seconds,w_bytes,q_bytes\n")
            for t, w, q in zip(self.t, self.w, self.q):
                fh.write(f"{t!r},{w!r},{q!r}\n")


class _History:
    """Interpolating lookup over the integrated prefix, with constant
    extension before t=0 and clamping at the newest sample."""

    def __init__(self, t0: float, w0: float, q0: float):
        self.ts = [t0]
        self.ws = [w0]
        self.qs = [q0]

    def append(self, t: float, w: float, q: float) -> None:
        self.ts.append(t)
        self.ws.append(w)
        self.qs.append(q)

    def _interp(self, series, t: float) -> float:
        ts = self.ts
        if t <= ts[0]:
            return series[0]
        if t >= ts[-1]:
            return series[-1]
        i = bisect.bisect_right(ts, t)
        t0, t1 = ts[i - 1], ts[i]
        y0, y1 = series[i - 1], series[i]
        return y0 + (y1 - y0) * (t - t0) / (t1 - t0)

    def w_at(self, t: float) -> float:
        return self._interp(self.ws, t)

    def q_at(self, t: float) -> float:
        return self._interp(self.qs, t)


def _queue_rate(q: float, w_delayed: float, params: FluidParams) -> float:
    """qdot with the empty-queue clamp."""
    theta = max(q, 0.0) / params.b + params.tau
    rate = w_delayed / theta - params.b
    if q <= 0.0 and rate < 0.0:
        return 0.0
    return rate


def _delayed_queue_rate(s: float, hist: _History, params: FluidParams) -> float:
    """qdot evaluated at a past time s, reconstructed from history."""
    q_s = max(hist.q_at(s), 0.0)
    w_sf = hist.w_at(s - params.t_f)
    return _queue_rate(q_s, w_sf, params)


def derivatives(t: float, w: float, q: float, params: FluidParams,
                hist: _History) -> tuple[float, float]:
    """(wdot, qdot) at stage time t, using interpolated history for every
    delayed term."""
    q_pos = max(q, 0.0)
    theta = q_pos / params.b + params.tau
    w_delayed = w if params.t_f == 0.0 else hist.w_at(t - params.t_f)
    q_dot = _queue_rate(q, w_delayed, params)

    law = params.law
    gr = params.gamma_r
    if law is LawKind.POWERTCP or law is LawKind.THETA_POWERTCP:
        w_dot = gr * (-w + params.b * params.tau + params.beta_hat)
        return w_dot, q_dot

    s = t - theta + params.t_f
    if law is LawKind.QUEUE_LEN_VOLTAGE:
        e = params.b * params.tau
        f = max(hist.q_at(s), 0.0) + params.b * params.tau
    elif law is LawKind.DELAY_VOLTAGE:
        e = params.tau
        f = max(hist.q_at(s), 0.0) / params.b + params.tau
    elif law is LawKind.RTT_GRADIENT_CURRENT:
        e = 1.0
        f = _delayed_queue_rate(s, hist, params) / params.b + 1.0
    else:
        raise ValueError(f"no fluid dynamics for law {law}")
    f = max(f, EPS_POW)
    w_dot = gr * (w * e / f - w + params.beta_hat)
    return w_dot, q_dot


def integrate(params: FluidParams, init: FluidState, horizon: float,
              step: float | None = None) -> FluidTrajectory:
    """Fixed-step RK4 over the (delay-)differential system.

    The step must not exceed tau/100 so that history interpolation error
    stays well under the corner error at q=0 and every delayed argument
    falls strictly inside the stored prefix.
    """
    if step is None:
        step = params.tau / 200.0
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if step <= 0:
        raise ValueError("step must be positive")
    if step > params.tau / 100.0 * (1.0 + 1e-12):
        raise ValueError(
            f"step {step} too large: must be <= tau/100 = {params.tau / 100.0}"
        )
    if params.t_f != 0.0 and params.t_f < step:
        raise ValueError("t_f must be 0 or >= the integration step")

    n = int(round(horizon / step))
    t_arr = np.empty(n + 1)
    w_arr = np.empty(n + 1)
    q_arr = np.empty(n + 1)
    t_arr[0], w_arr[0], q_arr[0] = init.t, init.w, init.q
    hist = _History(init.t, init.w, init.q)

    h = step
    w, q = init.w, init.q
    for i in range(n):
        t = init.t + i * h
        k1w, k1q = derivatives(t, w, q, params, hist)
        k2w, k2q = derivatives(t + h / 2, w + h / 2 * k1w, q + h / 2 * k1q,
                               params, hist)
        k3w, k3q = derivatives(t + h / 2, w + h / 2 * k2w, q + h / 2 * k2q,
                               params, hist)
        k4w, k4q = derivatives(t + h, w + h * k3w, q + h * k3q, params, hist)
        w = w + h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        q = q + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        q = max(q, 0.0)
        if w <= 0:
            raise ArithmeticError(f"window became non-positive at t={t + h}")
        t_next = init.t + (i + 1) * h
        hist.append(t_next, w, q)
        t_arr[i + 1], w_arr[i + 1], q_arr[i + 1] = t_next, w, q

    return FluidTrajectory(t_arr, w_arr, q_arr, step=h, params=params)


def equilibrium(params: FluidParams) -> EquilibriumPoint:
    """Closed-form aggregate fixed point per law.

    The power law and both voltage laws stabilize at
    (b*tau + beta_hat, beta_hat); the gradient law only pins the queue
    slope, so no unique point exists.
    """
    if params.law is LawKind.RTT_GRADIENT_CURRENT:
        return EquilibriumPoint(w_e=float("nan"), q_e=float("nan"),
                                unique=False)
    w_e = params.b * params.tau + params.beta_hat
    return EquilibriumPoint(w_e=w_e, q_e=params.beta_hat, unique=True)


@dataclass(frozen=True)
class EigenReport:
    analytic: tuple
    numeric: tuple
    max_rel_err: float


def linearized_eigenvalues(params: FluidParams) -> EigenReport:
    """Eigenvalues of the power-law system linearized at its equilibrium.

    Analytically they are (-1/tau, -gamma_r). The numerical cross-check
    differentiates the smooth (q > 0) branch of the dynamics at the
    zero-additive-increase point (w, q) = (b*tau, 0), where the equilibrium
    RTT equals tau exactly and the linearization matrix is exact.
    """
    if params.law is not LawKind.POWERTCP:
        raise ValueError("eigenvalue analysis applies to the power law")
    analytic = (-1.0 / params.tau, -params.gamma_r)

    b, tau, gr, bh = params.b, params.tau, params.gamma_r, params.beta_hat

    def f_w(w: float, q: float) -> float:
        return gr * (-w + b * tau + bh)

    def f_q(w: float, q: float) -> float:
        return w / (q / b + tau) - b

    w0, q0 = b * tau, 0.0
    hw = max(abs(w0), 1.0) * 1e-6
    hq = max(abs(w0), 1.0) * 1e-6
    jac = np.array([
        [(f_w(w0 + hw, q0) - f_w(w0 - hw, q0)) / (2 * hw),
         (f_w(w0, q0 + hq) - f_w(w0, q0 - hq)) / (2 * hq)],
        [(f_q(w0 + hw, q0) - f_q(w0 - hw, q0)) / (2 * hw),
         (f_q(w0, q0 + hq) - f_q(w0, q0 - hq)) / (2 * hq)],
    ])
    eigs = np.linalg.eigvals(jac)
    numeric = tuple(sorted(float(e.real) for e in eigs))
    ana_sorted = tuple(sorted(analytic))
    rel = max(
        abs(n - a) / abs(a) for n, a in zip(numeric, ana_sorted)
    )
    return EigenReport(analytic=analytic, numeric=numeric, max_rel_err=rel)


def convergence_time(traj: FluidTrajectory, w_e: float) -> float:
    """First time the window error falls to 0.7% of its initial value
    (99.3% decay, five time constants of the exponential solution)."""
    err = np.abs(traj.w - w_e)
    threshold = 0.007 * err[0]
    hits = np.nonzero(err <= threshold)[0]
    if hits.size == 0:
        raise NotConvergedError(
            f"window error never decayed to 0.7% within the horizon "
            f"(final relative error {err[-1] / err[0]:.3g})"
        )
    return float(traj.t[hits[0]] - traj.t[0])


def fairness_allocation(betas, params: FluidParams):
    """Per-flow equilibrium windows: each flow gets a share of the aggregate
    window proportional to its additive-increase weight."""
    betas = [float(b) for b in betas]
    if not betas:
        raise ValueError("need at least one flow")
    if any(b <= 0 for b in betas):
        raise ValueError("every per-flow beta must be positive")
    beta_hat = sum(betas)
    scale = (beta_hat + params.b * params.tau) / beta_hat
    return [scale * b for b in betas]


def power_identity_check(traj: FluidTrajectory, params: FluidParams) -> float:
    """Max relative gap between measured power and bandwidth times the
    delayed window.

    Power is reconstructed the way a switch would estimate it: central
    finite differences of the sampled queue for qdot and mu = b (valid only
    while the queue is busy), voltage from the sampled queue. Samples where
    the queue touches zero anywhere in the difference stencil are excluded,
    as are samples whose delayed lookup precedes the trajectory start.
    """
    b, tau, t_f = params.b, params.tau, params.t_f
    h = traj.step
    worst = -1.0
    for i in range(1, len(traj.t) - 1):
        if traj.q[i - 1] <= 0 or traj.q[i] <= 0 or traj.q[i + 1] <= 0:
            continue
        t_delayed = traj.t[i] - t_f
        if t_delayed < traj.t[0]:
            continue
        qdot = (traj.q[i + 1] - traj.q[i - 1]) / (2 * h)
        gamma = (traj.q[i] + b * tau) * (qdot + b)
        ref = b * traj.w_at(t_delayed)
        worst = max(worst, abs(gamma - ref) / ref)
    if worst < 0:
        raise ValueError("no usable samples: queue never strictly positive")
    return worst
