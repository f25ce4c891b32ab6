import numpy as np
import pytest

from xlwifi import mac
from xlwifi.errors import UndefinedMcs
from xlwifi.mac import AmrrConfig, AmrrState, EdcaContender
from xlwifi.rates import TimingParams


class TestControlFrames:
    @pytest.mark.parametrize(
        "octets,want_us",
        [
            (mac.NDPA_OCTETS, 32.0),
            (mac.BF_POLL_OCTETS, 28.0),
            (32, 32.0),  # block ACK
            (24, 32.0),  # BAR pads to the same symbol count
            (14, 28.0),  # ACK
        ],
    )
    def test_control_durations_at_24mbps(self, octets, want_us):
        assert mac.control_ppdu_us(octets) == want_us

    def test_beacon_is_168us(self):
        # 80-octet body + 28-octet header at 6 Mbps
        assert mac.beacon_ppdu_us() == 168.0

    def test_legacy_index_rejects_nonlegacy_rate(self):
        with pytest.raises(UndefinedMcs):
            mac.legacy_index(13.0)


class TestBfReport:
    @pytest.mark.parametrize(
        "rows,cols,flavor,want",
        [
            (3, 1, "mu", 193),
            (3, 1, "su", 115),
            (4, 2, "mu", 428),
            (4, 2, "su", 233),
        ],
    )
    def test_report_sizes(self, rows, cols, flavor, want):
        assert mac.bf_report_octets(rows, cols, flavor) == want

    def test_grows_with_subcarriers_and_antennas(self):
        base = mac.bf_report_octets(3, 1, "mu", n_subcarriers=52)
        assert mac.bf_report_octets(3, 1, "mu", n_subcarriers=108) > base
        assert mac.bf_report_octets(4, 1, "mu") > base
        assert mac.bf_report_octets(3, 1, "mu", grouping=2) < base

    def test_mu_report_outweighs_su(self):
        # finer angle quantization costs feedback octets
        assert mac.bf_report_octets(4, 2, "mu") > mac.bf_report_octets(4, 2, "su")

    def test_unknown_flavor(self):
        with pytest.raises(ValueError):
            mac.bf_report_octets(3, 1, "vendor")


class TestSounding:
    def test_single_beamformee_is_three_frames(self):
        seq = mac.sounding_sequence("su", 3, 1, n_members=1)
        assert [f.kind for f in seq.frames] == ["ndpa", "ndp", "bf_report"]
        assert seq.total_us == 176.0

    def test_two_beamformees_is_five_frames(self):
        seq = mac.sounding_sequence("mu", 3, 1, n_members=2)
        assert [f.kind for f in seq.frames] == [
            "ndpa", "ndp", "bf_report", "bf_poll", "bf_report",
        ]
        assert seq.total_us == 352.0

    @pytest.mark.parametrize(
        "flavor,ap,sta,members,want_us",
        [
            ("mu", 3, 1, 3, 500.0),
            ("mu", 4, 2, 2, 504.0),
            ("su", 4, 2, 1, 216.0),
        ],
    )
    def test_sequence_totals(self, flavor, ap, sta, members, want_us):
        assert mac.sounding_sequence(flavor, ap, sta, members).total_us == want_us

    def test_ndp_is_preamble_only(self):
        seq = mac.sounding_sequence("su", 3, 1, n_members=1)
        ndp = next(f for f in seq.frames if f.kind == "ndp")
        assert ndp.duration_us == 52.0  # 3 space-time streams train 4 LTFs

    def test_members_are_labeled(self):
        seq = mac.sounding_sequence("mu", 3, 1, n_members=3)
        reports = [f.member for f in seq.frames if f.kind == "bf_report"]
        assert reports == [0, 1, 2]

    def test_needs_a_member(self):
        with pytest.raises(ValueError):
            mac.sounding_sequence("mu", 3, 1, n_members=0)


class TestBaChain:
    @pytest.mark.parametrize("members,want", [(1, 48.0), (2, 144.0), (3, 240.0)])
    def test_chain_durations(self, members, want):
        assert mac.ba_chain_us(members) == want

    def test_needs_a_member(self):
        with pytest.raises(ValueError):
            mac.ba_chain_us(0)


class TestTxopFit:
    def test_su_fits_18(self):
        assert mac.max_mpdus_in_txop(1530, "ac", 20, 8, 1) == 18

    def test_mu_pair_fits_17(self):
        assert mac.max_mpdus_in_txop(1530, "ac", 20, 8, 1, n_members=2) == 17

    def test_mu_triple_fits_17(self):
        assert mac.max_mpdus_in_txop(1530, "ac", 20, 8, 1, n_members=3) == 17

    def test_130mbps_fits_30(self):
        assert mac.max_mpdus_in_txop(1530, "n", 20, 15) == 30

    def test_zero_limit_means_unlimited(self):
        assert mac.max_mpdus_in_txop(1530, "ac", 20, 8, 1, txop_limit_us=0) >= 1 << 20

    def test_single_mpdu_always_allowed(self):
        # a lone oversized exchange is not fragmented
        assert mac.max_mpdus_in_txop(1530, "ac", 20, 0, 1, txop_limit_us=500) == 1


class TestAssembleAmpdu:
    def test_queue_caps_the_aggregate(self):
        layout = mac.assemble_ampdu(5, 1530, "ac", 20, 8, 1)
        assert layout.n_mpdus == 5

    def test_txop_caps_the_aggregate(self):
        layout = mac.assemble_ampdu(40, 1530, "ac", 20, 8, 1)
        assert layout.n_mpdus == 18

    def test_config_caps_the_aggregate(self):
        layout = mac.assemble_ampdu(40, 1530, "ac", 20, 8, 1, max_aggregation=2)
        assert layout.n_mpdus == 2

    def test_single_mpdu_aggregate(self):
        layout = mac.assemble_ampdu(1, 1530, "ac", 20, 8, 1)
        assert layout.n_mpdus == 1

    def test_horizontal_split(self):
        layout = mac.assemble_ampdu(
            40, 1530, "ac", 20, 8, 1, n_members=2,
            layout_scheme="horizontal", b_blocks=2, n_channels=4,
        )
        assert layout.n_mpdus == 17
        assert sorted(b.n_mpdus for b in layout.blocks) == [8, 9]

    def test_empty_queue_rejected(self):
        with pytest.raises(ValueError):
            mac.assemble_ampdu(0, 1530, "ac", 20, 8, 1)


class TestEdca:
    def test_mean_access_delay(self):
        # AIFS[BE] + CWmin/2 slots = 43 + 67.5 us on an empty medium
        rng = np.random.default_rng(7)
        draws = []
        for _ in range(4000):
            c = EdcaContender("BE")
            draws.append(c.countdown_us(rng))
        assert np.mean(draws) == pytest.approx(110.5, rel=0.02)

    def test_cw_doubles_to_cap(self):
        c = EdcaContender("BE")
        seen = []
        for _ in range(8):
            c.on_failure()
            seen.append(c.cw)
        assert seen == [31, 63, 127, 255, 511, 1023, 1023, 1023]

    def test_success_resets_cw(self):
        c = EdcaContender("BE")
        c.on_failure()
        c.on_failure()
        c.on_success()
        assert c.cw == 15

    def test_frozen_backoff_resumes_without_redraw(self):
        rng = np.random.default_rng(3)
        c = EdcaContender("BE")
        first = c.draw_backoff(rng)
        assume_left = max(0, first - 2)
        c.consume_idle_slots(2)
        assert c.draw_backoff(rng) == assume_left

    def test_countdown_reaches_zero(self):
        rng = np.random.default_rng(0)
        c = EdcaContender("BE")
        n = c.draw_backoff(rng)
        assert c.consume_idle_slots(n)
        assert c.residual_slots == 0

    def test_vo_parameters(self):
        c = EdcaContender("VO")
        assert c.aifs_us == 34.0
        assert c.cwmin == 3
        assert c.txop_limit_us == 1504

    def test_unknown_ac(self):
        with pytest.raises(ValueError):
            EdcaContender("XX")


def ladder9():
    return tuple(range(9))  # stand-in MCS references 0..8


class TestAmrrMicro:
    def test_stage_walk_default_counts(self):
        counts = (3, 3, 1, 3)
        stages = [mac.micro_stage(counts, n) for n in range(11)]
        assert stages == [0, 0, 0, 1, 1, 1, 2, 3, 3, 3, None]

    def test_stage_walk_sparse_counts(self):
        counts = (2, 1, 1, 1)
        stages = [mac.micro_stage(counts, n) for n in range(6)]
        assert stages == [0, 0, 1, 2, 3, None]

    def test_three_failures_step_down_one_rate(self):
        st = AmrrState(AmrrConfig(ladder9()), position=5)
        assert st.rate_for_failures(3) == 4

    def test_chain_rates(self):
        st = AmrrState(AmrrConfig(ladder9()), position=5)
        assert st.chain() == ((5, 3), (4, 3), (3, 1), (0, 3))

    def test_chain_clamps_at_bottom(self):
        st = AmrrState(AmrrConfig(ladder9()), position=1)
        assert st.chain_positions() == (1, 0, 0, 0)

    def test_drop_after_all_counts(self):
        st = AmrrState(AmrrConfig(ladder9()), position=5)
        assert st.attempts_until_drop == 10
        assert st.rate_for_failures(10) is None

    def test_last_stage_is_minimum_rate(self):
        st = AmrrState(AmrrConfig(ladder9()), position=8)
        assert st.rate_for_failures(9) == 0


class TestAmrrMacro:
    def feed(self, st, successes, failures):
        for _ in range(successes):
            st.on_attempt_result(True)
        for _ in range(failures):
            st.on_attempt_result(False)

    def test_increase_with_probe(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        self.feed(st, 20, 1)  # ratio 0.05
        assert st.on_interval_close() == "increase"
        assert st.position == 4
        assert st.probing

    def test_hold_between_watermarks(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        self.feed(st, 20, 5)  # ratio 0.25
        assert st.on_interval_close() == "hold"
        assert st.position == 3

    def test_decrease_above_high_watermark(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        self.feed(st, 20, 10)  # ratio 0.5
        assert st.on_interval_close() == "decrease"
        assert st.position == 2

    def test_increase_needs_enough_successes(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        self.feed(st, 5, 0)
        assert st.on_interval_close() == "hold"

    def test_idle_interval_holds(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        assert st.on_interval_close() == "hold"

    def test_failures_without_successes_decrease(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        self.feed(st, 0, 3)
        assert st.on_interval_close() == "decrease"

    def test_top_of_ladder_holds(self):
        st = AmrrState(AmrrConfig(ladder9()), position=8)
        self.feed(st, 50, 0)
        assert st.on_interval_close() == "hold"

    def test_bottom_of_ladder_holds(self):
        st = AmrrState(AmrrConfig(ladder9()), position=0)
        self.feed(st, 2, 20)
        assert st.on_interval_close() == "hold"

    def test_counters_reset_each_interval(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        self.feed(st, 20, 10)
        st.on_interval_close()
        assert (st.successes, st.failures) == (0, 0)


class TestAmrrProbe:
    def promote(self, st):
        for _ in range(st.success_threshold):
            st.on_attempt_result(True)
        assert st.on_interval_close() == "increase"

    def test_probe_failure_reverts_and_doubles_threshold(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        self.promote(st)
        st.on_attempt_result(False)
        assert st.position == 3
        assert st.success_threshold == 20
        assert not st.probing
        assert st.failures == 1  # the probe attempt still counts

    def test_probe_success_validates_and_rearms(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        st.success_threshold = 40
        self.promote(st)
        st.on_attempt_result(True)
        assert st.position == 4
        assert st.success_threshold == 10
        assert not st.probing

    def test_threshold_cap(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        for want in (20, 40, 80, 160, 160):
            self.promote(st)
            st.on_attempt_result(False)
            assert st.success_threshold == want
            # satisfying the grown threshold needs that many successes now
            self.feed_quiet(st, st.success_threshold - 1)
            assert st.on_interval_close() == "hold"

    @staticmethod
    def feed_quiet(st, n):
        for _ in range(n):
            st.on_attempt_result(True)

    def test_failed_probe_then_losing_interval_decreases_further(self):
        st = AmrrState(AmrrConfig(ladder9()), position=3)
        self.promote(st)
        for _ in range(9):
            st.on_attempt_result(False)  # first one is the probe verdict
        for _ in range(2):
            st.on_attempt_result(True)
        assert st.position == 3  # probe failure already reverted
        assert st.on_interval_close() == "decrease"
        assert st.position == 2


class TestAmrrConfig:
    def test_sparse_retry_chain(self):
        st = AmrrState(AmrrConfig(ladder9(), counts=(2, 1, 1, 1)), position=4)
        assert st.attempts_until_drop == 5
        assert st.rate_for_failures(2) == 3
        assert st.rate_for_failures(4) == 0
        assert st.rate_for_failures(5) is None

    def test_bad_counts_rejected(self):
        with pytest.raises(ValueError):
            AmrrConfig(ladder9(), counts=(3, 3, 1))
        with pytest.raises(ValueError):
            AmrrConfig(ladder9(), counts=(3, 0, 1, 3))

    def test_empty_ladder_rejected(self):
        with pytest.raises(ValueError):
            AmrrConfig(())

    def test_position_bounds_checked(self):
        with pytest.raises(ValueError):
            AmrrState(AmrrConfig(ladder9()), position=9)


class TestMultichannel:
    def test_all_secondaries_idle_grants_80(self):
        assert mac.multichannel_grant([0.0, 0.0, 0.0, 0.0], now_us=100.0) == 80

    def test_tertiary_recently_busy_grants_40(self):
        idle = [0.0, 0.0, 90.0, 0.0]  # idle for 10 us < PIFS
        assert mac.multichannel_grant(idle, now_us=100.0) == 40

    def test_all_secondaries_busy_grants_20(self):
        assert mac.multichannel_grant([0.0, None, None, None], now_us=100.0) == 20

    def test_idle_exactly_pifs_counts(self):
        idle = [0.0, 75.0, 75.0, 75.0]
        assert mac.multichannel_grant(idle, now_us=100.0) == 80

    def test_unknown_secondaries_fall_back(self):
        assert mac.multichannel_grant([0.0], now_us=100.0) == 20


class TestNav:
    def test_nav_keeps_latest_expiry(self):
        nav = mac.NavState()
        nav.update(500.0)
        nav.update(300.0)
        assert nav.busy(499.0)
        assert not nav.busy(500.0)
