import math

import pytest
from hypothesis import given, settings, strategies as st

from powercc.core import EPS_POW, CcParams, CcState
from powercc.laws import (
    AckContext,
    CongestionController,
    LawError,
    LawKind,
    get_cwnd_snapshot,
    norm_power,
    on_ack_baseline,
    on_ack_powertcp,
    on_ack_theta,
    theta_norm_power,
    update_old,
    update_window,
)
from powercc.telemetry import IntHeader, IntHopRecord


B = 12.5e9          # bottleneck bandwidth, bytes/s (100 Gbps)
TAU = 20e-6


def params(gamma=0.9, beta=0.0, tau=TAU, host_bw=B, mss=1000.0,
           cwnd_init=None, cwnd_max=1e15):
    return CcParams(
        gamma=gamma,
        beta=beta,
        tau=tau,
        host_bw=host_bw,
        cwnd_init=host_bw * tau if cwnd_init is None else cwnd_init,
        mss=mss,
        cwnd_max=cwnd_max,
    )


def hop(qlen, ts, tx, bw=B):
    return IntHopRecord(qlen=qlen, ts=ts, tx_bytes=tx, bandwidth=bw)


def header(*hops):
    return IntHeader(hops=list(hops))


def ack_with(hops, seq=0.0, recv=TAU, rtt=None):
    return AckContext(seq=seq, recv_time=recv, rtt=rtt,
                      int_header=header(*hops))


class TestNormPower:
    def test_hand_computed_single_hop(self):
        # prev (qlen 10 KB, ts 0, tx 0) -> cur (qlen 20 KB, ts 10 us,
        # tx 125 KB): qdot 1e9, mu 1.25e10, current 1.35e10,
        # voltage 270 KB, power 3.645e15, base 3.125e15, norm 1.1664.
        p = params()
        prev = (hop(10_000.0, 0.0, 0.0),)
        ack = ack_with([hop(20_000.0, 10e-6, 125_000.0)])
        res = norm_power(ack, prev, p, gamma_smooth=1.0)
        assert not res.stale
        (s,) = res.per_hop
        assert s.current_lambda == pytest.approx(1.35e10, rel=1e-12)
        assert s.voltage_nu == pytest.approx(270_000.0, rel=1e-12)
        assert s.power_gamma == pytest.approx(3.645e15, rel=1e-12)
        assert s.base_power_e == pytest.approx(3.125e15, rel=1e-12)
        assert s.norm_power == pytest.approx(1.1664, rel=1e-12)
        # smoothing: (1.0 * (20 - 10) + 1.1664 * 10) / 20
        assert res.gamma_smooth == pytest.approx(1.0832, rel=1e-12)

    def test_steady_line_rate_empty_queue_is_unit_power(self):
        p = params()
        dt = 1e-6
        prev = (hop(0.0, 0.0, 0.0),)
        ack = ack_with([hop(0.0, dt, B * dt)])
        res = norm_power(ack, prev, p, gamma_smooth=1.0)
        assert res.per_hop[0].norm_power == pytest.approx(1.0, rel=1e-12)
        assert res.gamma_smooth == pytest.approx(1.0, rel=1e-12)

    def test_non_positive_dt_hops_skipped(self):
        p = params()
        prev = (hop(0.0, 5e-6, 0.0), hop(0.0, 0.0, 0.0))
        ack = ack_with([hop(0.0, 5e-6, 1000.0), hop(0.0, 2e-6, B * 2e-6)])
        res = norm_power(ack, prev, p, gamma_smooth=1.0)
        # first hop dt == 0 skipped, second still usable
        assert len(res.per_hop) == 1
        assert not res.stale

    def test_all_hops_stale_returns_previous_smoothed(self):
        p = params()
        prev = (hop(0.0, 5e-6, 0.0),)
        ack = ack_with([hop(0.0, 5e-6, 0.0)])
        res = norm_power(ack, prev, p, gamma_smooth=1.25)
        assert res.stale
        assert res.gamma_smooth == 1.25
        assert res.per_hop == ()

    def test_hop_count_mismatch_is_stale(self):
        p = params()
        prev = (hop(0.0, 0.0, 0.0),)
        ack = ack_with([hop(0.0, 1e-6, 0.0), hop(0.0, 1e-6, 0.0)])
        assert norm_power(ack, prev, p, gamma_smooth=1.0).stale

    def test_max_hop_selected(self):
        p = params()
        dt = 1e-6
        prev = (hop(0.0, 0.0, 0.0), hop(0.0, 0.0, 0.0))
        # second hop congested: growing queue on top of line rate
        ack = ack_with([
            hop(0.0, dt, B * dt),
            hop(50_000.0, dt, B * dt),
        ])
        res = norm_power(ack, prev, p, gamma_smooth=1.0)
        norms = [s.norm_power for s in res.per_hop]
        assert norms[1] > norms[0]
        expected = (1.0 * (TAU - dt) + norms[1] * dt) / TAU
        assert res.gamma_smooth == pytest.approx(expected, rel=1e-12)

    @given(
        mus=st.lists(st.floats(1e8, 2e10), min_size=2, max_size=6),
        scale=st.floats(0.01, 100.0),
        data=st.data(),
    )
    def test_argmax_invariant_under_common_scaling(self, mus, scale, data):
        p = params()
        dts = [data.draw(st.floats(1e-7, 5e-6)) for _ in mus]
        prev = tuple(hop(0.0, 0.0, 0.0) for _ in mus)
        base = ack_with([hop(0.0, dt, mu * dt) for mu, dt in zip(mus, dts)])
        scaled = ack_with([hop(0.0, dt, scale * mu * dt)
                           for mu, dt in zip(mus, dts)])
        r1 = norm_power(base, prev, p, 1.0)
        r2 = norm_power(scaled, prev, p, 1.0)
        norms1 = [s.norm_power for s in r1.per_hop]
        pick1 = max(range(len(mus)), key=lambda i: norms1[i])
        pick2 = max(range(len(mus)),
                    key=lambda i: r2.per_hop[i].norm_power)
        # selection is invariant up to exact ties in the unscaled norms
        assert norms1[pick2] == pytest.approx(norms1[pick1], rel=1e-9)


class TestUpdateWindow:
    def test_hand_computed_decrease(self):
        p = params(gamma=0.9, beta=0.0)
        got = update_window(1.0832, 250_000.0, 250_000.0, p)
        expected = 0.9 * (250_000.0 / 1.0832) + 0.1 * 250_000.0
        assert got == pytest.approx(expected, rel=1e-15)
        assert got == pytest.approx(232_718, abs=1.0)

    def test_unit_power_is_scaled_additive_increase(self):
        p = params(gamma=0.9, beta=5000.0)
        w = 100_000.0
        assert update_window(1.0, w, w, p) == pytest.approx(
            w + 0.9 * 5000.0, rel=1e-15)

    def test_pure_multiplicative_decrease(self):
        p = params(gamma=1.0, beta=0.0)
        assert update_window(2.0, 100_000.0, 100_000.0, p) == pytest.approx(
            50_000.0, rel=1e-15)

    def test_zero_power_rejected(self):
        with pytest.raises(LawError):
            update_window(0.0, 1000.0, 1000.0, params())

    def test_mss_floor(self):
        p = params(gamma=1.0, beta=0.0, mss=1000.0)
        assert update_window(1e9, 5000.0, 5000.0, p) == 1000.0

    @given(
        g1=st.floats(0.2, 5.0),
        g2=st.floats(0.2, 5.0),
        cwnd_old=st.floats(1e5, 1e7),
        cwnd=st.floats(1e5, 1e7),
    )
    def test_strictly_decreasing_in_power(self, g1, g2, cwnd_old, cwnd):
        p = params(gamma=0.9, beta=100.0, mss=1.0)
        lo, hi = sorted((g1, g2))
        if hi - lo < 1e-6:
            return
        assert update_window(lo, cwnd_old, cwnd, p) > update_window(
            hi, cwnd_old, cwnd, p)

    @given(
        c1=st.floats(1e5, 1e7),
        c2=st.floats(1e5, 1e7),
        gs=st.floats(0.2, 5.0),
    )
    def test_strictly_increasing_in_old_window(self, c1, c2, gs):
        p = params(gamma=0.9, beta=100.0, mss=1.0)
        lo, hi = sorted((c1, c2))
        if hi - lo < 1e-3:
            return
        assert update_window(gs, hi, 2e5, p) > update_window(gs, lo, 2e5, p)

    @given(
        k=st.floats(0.01, 1000.0),
        cwnd_old=st.floats(1e4, 1e7),
        cwnd=st.floats(1e4, 1e7),
        gs=st.floats(0.2, 5.0),
        beta=st.floats(0.0, 1e5),
    )
    def test_scale_covariance(self, k, cwnd_old, cwnd, gs, beta):
        p = params(gamma=0.9, beta=beta, mss=1e-6)
        ps = params(gamma=0.9, beta=k * beta, mss=1e-6)
        unscaled = update_window(gs, cwnd_old, cwnd, p)
        scaled = update_window(gs, k * cwnd_old, k * cwnd, ps)
        assert scaled == pytest.approx(k * unscaled, rel=1e-9)


class TestSnapshots:
    def test_epoch_bookkeeping(self):
        p = params(cwnd_init=250_000.0)
        state = CcState.initial(p)
        # an RTT boundary passed: snapshot the new window keyed by snd_nxt
        state.cwnd = 300_000.0
        update_old(state, ack_seq=0.0, snd_nxt=250_000.0)
        assert state.cwnd_snapshots == [(0.0, 250_000.0),
                                        (250_000.0, 300_000.0)]
        # acks for data sent in the first epoch still see the old window
        assert get_cwnd_snapshot(state, 100_000.0) == 250_000.0
        assert get_cwnd_snapshot(state, 250_000.0) == 300_000.0
        # same epoch: no new snapshot
        update_old(state, ack_seq=100_000.0, snd_nxt=400_000.0)
        assert len(state.cwnd_snapshots) == 2
        # next epoch: oldest dropped, at most two retained
        state.cwnd = 310_000.0
        update_old(state, ack_seq=260_000.0, snd_nxt=500_000.0)
        assert state.cwnd_snapshots == [(250_000.0, 300_000.0),
                                        (500_000.0, 310_000.0)]


def unit_power_hops(k, dt=1e-6, bw=B):
    """Consecutive single-hop records at line rate with an empty queue."""
    return hop(0.0, k * dt, bw * (k * dt), bw=bw)


class TestOnAckPowertcp:
    def test_missing_telemetry_rejected(self):
        p = params()
        state = CcState.initial(p)
        with pytest.raises(LawError):
            on_ack_powertcp(state, AckContext(seq=0, recv_time=TAU), p,
                            snd_nxt=0.0)

    def test_first_ack_grows_by_scaled_beta(self):
        p = params(beta=5000.0)
        state = CcState.initial(p)
        w0 = state.cwnd
        ack = AckContext(seq=0.0, recv_time=TAU, int_header=header(
            unit_power_hops(0)))
        cwnd, rate = on_ack_powertcp(state, ack, p, snd_nxt=w0)
        assert cwnd == pytest.approx(w0 + 0.9 * 5000.0, rel=1e-12)
        assert rate == pytest.approx(cwnd / TAU, rel=1e-15)
        assert state.prev_int == tuple(ack.int_header.hops)

    def test_unit_power_zero_beta_is_fixed_point(self):
        p = params(beta=0.0)
        state = CcState.initial(p)
        w0 = state.cwnd
        for k in range(10):
            ack = AckContext(seq=k * 1000.0, recv_time=TAU + k * 1e-6,
                             int_header=header(unit_power_hops(k)))
            cwnd, _ = on_ack_powertcp(state, ack, p, snd_nxt=w0 + k * 1000.0)
        assert cwnd == pytest.approx(w0, rel=1e-12)

    def test_previous_epoch_ack_uses_old_snapshot(self):
        p = params(beta=0.0)
        state = CcState.initial(p)
        state.cwnd_snapshots = [(0.0, 100_000.0), (250_000.0, 50_000.0)]
        state.cwnd = 50_000.0
        # ack for a segment sent under the 100 KB window (seq < 250 KB);
        # with unit power and beta 0, the update pulls cwnd toward the
        # old 100 KB reference, not the current 50 KB one.
        state.prev_int = (unit_power_hops(0),)
        ack = AckContext(seq=10_000.0, recv_time=TAU,
                         int_header=header(unit_power_hops(1)))
        cwnd, _ = on_ack_powertcp(state, ack, p, snd_nxt=300_000.0)
        assert cwnd == pytest.approx(0.9 * 100_000.0 + 0.1 * 50_000.0,
                                     rel=1e-12)


class TestThetaNormPower:
    def test_uncongested_fixed_point(self):
        gs, stale = theta_norm_power(TAU, TAU, 1e-3, 1e-3 - 4e-6, TAU, 1.0)
        assert not stale
        assert gs == pytest.approx(1.0, rel=1e-12)

    def test_hand_computed_growth(self):
        # rtt 24 us from 20 us over 4 us: gradient 1.0, norm (1+1)*24/20 = 2.4
        gs, stale = theta_norm_power(24e-6, 20e-6, 1e-3, 1e-3 - 4e-6, TAU, 1.0)
        assert not stale
        expected = (1.0 * (TAU - 4e-6) + 2.4 * 4e-6) / TAU
        assert gs == pytest.approx(expected, rel=1e-12)

    def test_draining_queue_clamped(self):
        # rtt shrinking at gradient -1 would zero the raw value
        gs, stale = theta_norm_power(20e-6, 24e-6, 1e-3, 1e-3 - 4e-6, TAU, 1.0)
        assert not stale
        raw = EPS_POW
        expected = (1.0 * (TAU - 4e-6) + raw * 4e-6) / TAU
        assert gs == pytest.approx(expected, rel=1e-9)

    def test_coincident_acks_reuse_previous(self):
        gs, stale = theta_norm_power(22e-6, 20e-6, 1e-3, 1e-3, TAU, 1.37)
        assert stale
        assert gs == 1.37


class TestOnAckTheta:
    def test_per_rtt_gate(self):
        p = params(beta=5000.0, cwnd_init=100_000.0)
        state = CcState.initial(p)
        snd_nxt = 100_000.0
        a1 = AckContext(seq=0.0, recv_time=TAU, rtt=TAU)
        cwnd1, _ = on_ack_theta(state, a1, p, snd_nxt)
        assert cwnd1 == pytest.approx(100_000.0 + 0.9 * 5000.0, rel=1e-12)
        assert state.last_update_seq == snd_nxt
        # second ack in the same epoch leaves the window alone
        a2 = AckContext(seq=1000.0, recv_time=TAU + 1e-6, rtt=TAU)
        cwnd2, _ = on_ack_theta(state, a2, p, snd_nxt + 1000.0)
        assert cwnd2 == cwnd1
        # ack at/after the gate sequence fires again
        a3 = AckContext(seq=snd_nxt, recv_time=2 * TAU, rtt=TAU)
        cwnd3, _ = on_ack_theta(state, a3, p, snd_nxt + 50_000.0)
        assert cwnd3 > cwnd2
        assert state.last_update_seq == snd_nxt + 50_000.0

    def test_steady_state_fixed_point_drift(self):
        # at rtt == tau the law reduces to the additive-increase fixed
        # point iteration: one gamma*beta step per RTT epoch
        p = params(beta=2000.0, cwnd_init=50_000.0)
        state = CcState.initial(p)
        seq = 0.0
        for k in range(5):
            ack = AckContext(seq=seq, recv_time=(k + 1) * TAU, rtt=TAU)
            cwnd, _ = on_ack_theta(state, ack, p, snd_nxt=seq + 50_000.0)
            seq += 50_000.0
        assert cwnd == pytest.approx(50_000.0 + 5 * 0.9 * 2000.0, rel=1e-9)


class TestBaselines:
    def test_queue_law_neutral_at_empty_queue(self):
        p = params(beta=3000.0, cwnd_init=100_000.0)
        state = CcState.initial(p)
        ack = ack_with([hop(0.0, 1e-6, B * 1e-6)], recv=TAU)
        cwnd, _ = on_ack_baseline(LawKind.QUEUE_LEN_VOLTAGE, state, ack, p,
                                  snd_nxt=100_000.0)
        assert cwnd == pytest.approx(100_000.0 + 0.9 * 3000.0, rel=1e-12)

    def test_queue_law_needs_telemetry(self):
        p = params()
        with pytest.raises(LawError):
            on_ack_baseline(LawKind.QUEUE_LEN_VOLTAGE, CcState.initial(p),
                            AckContext(seq=0, recv_time=TAU), p,
                            snd_nxt=0.0)

    def test_delay_law_halving_pressure_at_one_bdp(self):
        # queue of one BDP doubles the RTT: e/f = 1/2
        p = params(beta=0.0, cwnd_init=100_000.0)
        state = CcState.initial(p)
        ack = AckContext(seq=0, recv_time=TAU, rtt=2 * TAU)
        cwnd, _ = on_ack_baseline(LawKind.DELAY_VOLTAGE, state, ack, p,
                                  snd_nxt=100_000.0)
        assert cwnd == pytest.approx(0.9 * 50_000.0 + 0.1 * 100_000.0,
                                     rel=1e-12)

    def test_updates_gated_once_per_rtt_epoch(self):
        p = params(beta=3000.0, cwnd_init=100_000.0)
        state = CcState.initial(p)
        ack = ack_with([hop(0.0, 1e-6, B * 1e-6)], recv=TAU)
        cwnd1, _ = on_ack_baseline(LawKind.QUEUE_LEN_VOLTAGE, state, ack, p,
                                   snd_nxt=100_000.0)
        same_epoch = ack_with([hop(0.0, 2e-6, B * 2e-6)], seq=1000.0,
                              recv=TAU + 1e-6)
        cwnd2, _ = on_ack_baseline(LawKind.QUEUE_LEN_VOLTAGE, state,
                                   same_epoch, p, snd_nxt=101_000.0)
        assert cwnd2 == cwnd1

    def test_gradient_law_oblivious_to_queue_level(self):
        # constant rtt (zero gradient) drifts the window up by gamma*beta
        # per epoch regardless of how congested the path already is
        p = params(beta=4000.0, cwnd_init=80_000.0)
        for rtt in (TAU, 3 * TAU, 10 * TAU):
            state = CcState.initial(p)
            a1 = AckContext(seq=0, recv_time=TAU, rtt=rtt)
            on_ack_baseline(LawKind.RTT_GRADIENT_CURRENT, state, a1, p,
                            snd_nxt=80_000.0)
            # next epoch: ack for data sent after the previous update
            a2 = AckContext(seq=80_000.0, recv_time=2 * TAU + 1e-6, rtt=rtt)
            cwnd, _ = on_ack_baseline(LawKind.RTT_GRADIENT_CURRENT, state,
                                      a2, p, snd_nxt=160_000.0)
            assert cwnd == pytest.approx(80_000.0 + 2 * 0.9 * 4000.0,
                                         rel=1e-12)


class TestThetaReduction:
    def test_matches_power_law_on_line_rate_trace(self):
        """Single bottleneck at full transmission rate: the delay-only
        variant computes the identical normalized power, ack for ack."""
        p = params()
        n = 200
        dt = 2e-6
        # smooth positive queue profile, bytes
        qs = [40_000.0 * (1.0 + math.sin(k / 7.0)) + 5_000.0
              for k in range(n)]
        ts = [k * dt for k in range(n)]
        txs = [B * t for t in ts]
        rtts = [q / B + TAU for q in qs]
        tcs = [t + 10e-6 for t in ts]

        gs_int, gs_rtt = 1.0, 1.0
        for k in range(1, n):
            prev = (hop(qs[k - 1], ts[k - 1], txs[k - 1]),)
            ack = ack_with([hop(qs[k], ts[k], txs[k])])
            gs_int = norm_power(ack, prev, p, gs_int).gamma_smooth
            gs_rtt, stale = theta_norm_power(
                rtts[k], rtts[k - 1], tcs[k], tcs[k - 1], TAU, gs_rtt)
            assert not stale
            assert gs_int == pytest.approx(gs_rtt, abs=1e-9)


class TestController:
    def test_dispatch(self):
        p = params(beta=1000.0)
        cc = CongestionController(LawKind.POWERTCP, p)
        ack = AckContext(seq=0.0, recv_time=TAU,
                         int_header=header(unit_power_hops(0)))
        cwnd, rate = cc.on_ack(ack, snd_nxt=p.cwnd_init)
        assert cwnd == cc.state.cwnd
        assert rate == pytest.approx(cwnd / TAU)
