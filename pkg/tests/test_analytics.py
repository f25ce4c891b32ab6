import math

import pytest

from xlwifi import analytics
from xlwifi.analytics import ExchangeSpec
from xlwifi.errors import StreamOverflow, UndefinedMcs

# duration, throughput, efficiency for the 16-exchange showcase
EXCHANGE_GRID = [
    ("a", 6.0, 120, 1, 385.5, 2.4903, 0.4150),
    ("a", 24.0, 120, 1, 217.5, 4.4138, 0.1839),
    ("a", 54.0, 120, 1, 189.5, 5.0660, 0.0938),
    ("a", 6.0, 1500, 1, 2225.5, 5.3920, 0.8987),
    ("a", 24.0, 1500, 1, 677.5, 17.7122, 0.7380),
    ("a", 54.0, 1500, 1, 393.5, 30.4956, 0.5647),
    ("n", 6.5, 120, 1, 394.5, 2.4335, 0.3744),
    ("n", 130.0, 120, 1, 206.5, 4.6489, 0.0358),
    ("n", 540.0, 120, 1, 206.5, 4.6489, 0.0086),
    ("n", 6.5, 1500, 1, 2094.5, 5.7293, 0.8814),
    ("n", 130.0, 1500, 1, 290.5, 41.3081, 0.3178),
    ("n", 540.0, 1500, 1, 226.5, 52.9801, 0.0981),
    ("n", 130.0, 1500, 4, 578.5, 82.9732, 0.6383),
    ("n", 540.0, 1500, 4, 298.5, 160.8040, 0.2978),
    ("n", 130.0, 1500, 20, 2090.5, 114.8051, 0.8831),
    ("n", 540.0, 1500, 20, 662.5, 362.2642, 0.6709),
]


class TestExchangeDuration:
    def test_voice_frame_at_top_legacy_rate(self):
        b = analytics.exchange_duration(ExchangeSpec("a", index=7, msdu_octets=120))
        assert b.total_us == 189.5
        assert (b.access_us, b.data_us, b.sifs_us, b.ack_us) == (101.5, 44.0, 16.0, 28.0)

    def test_voice_frame_at_130mbps(self):
        b = analytics.exchange_duration(ExchangeSpec("n", index=15, msdu_octets=120))
        assert b.total_us == 206.5

    def test_duration_plateau_above_130mbps(self):
        # the 540 Mbps PPDU still takes one symbol plus its longer preamble
        d130 = analytics.exchange_duration(ExchangeSpec("n", index=15, msdu_octets=120))
        d540 = analytics.exchange_duration(ExchangeSpec("n", 40, 31, msdu_octets=120))
        assert d130.total_us == d540.total_us == 206.5

    def test_breakdown_sums_to_total(self):
        b = analytics.exchange_duration(ExchangeSpec("n", index=15, n_mpdus=4, ack="block_ack"))
        assert b.total_us == b.access_us + b.data_us + b.sifs_us + b.ack_us

    def test_legacy_waits_difs_qos_waits_aifs(self):
        a = analytics.exchange_duration(ExchangeSpec("a", index=7))
        n = analytics.exchange_duration(ExchangeSpec("n", index=15))
        assert a.access_us == 101.5
        assert n.access_us == 110.5

    def test_ack_follows_basic_rate_ladder(self):
        slow = analytics.exchange_duration(ExchangeSpec("a", index=0, msdu_octets=120))
        fast = analytics.exchange_duration(ExchangeSpec("a", index=4, msdu_octets=120))
        assert slow.ack_us == 44.0  # 6 Mbps response to a 6 Mbps frame
        assert fast.ack_us == 28.0  # 24 Mbps response

    def test_undefined_mcs_propagates(self):
        with pytest.raises(UndefinedMcs):
            analytics.exchange_duration(ExchangeSpec("ac", index=9, n_ss=1))

    def test_rejects_sub1ghz_acks_elsewhere(self):
        with pytest.raises(ValueError):
            ExchangeSpec("ac", index=8, n_ss=1, ack="short")


@pytest.fixture(scope="module")
def rows():
    return analytics.reference_exchanges()


class TestExchangeGrid:
    def test_sixteen_rows(self, rows):
        assert len(rows) == 16

    @pytest.mark.parametrize("i", range(16))
    def test_grid_values(self, rows, i):
        std, rate, msdu, n, dur, thr, eff = EXCHANGE_GRID[i]
        row = rows[i]
        assert row["standard"] == std
        assert row["rate_mbps"] == rate
        assert row["msdu_octets"] == msdu
        assert row["n_mpdus"] == n
        assert row["duration_us"] == dur
        assert row["throughput_mbps"] == pytest.approx(thr, abs=5e-4)
        assert row["efficiency"] == pytest.approx(eff, abs=5e-4)

    def test_aggregation_ratio_about_66x(self, rows):
        agg20 = next(r for r in rows if r["n_mpdus"] == 20 and r["rate_mbps"] == 540.0)
        single6 = next(
            r for r in rows
            if r["standard"] == "a" and r["rate_mbps"] == 6.0 and r["msdu_octets"] == 1500
        )
        ratio = agg20["throughput_mbps"] / single6["throughput_mbps"]
        assert 63 < ratio < 70
        # yet the slow unaggregated exchange wastes less of its PHY rate
        assert single6["efficiency"] > agg20["efficiency"]


class TestEfficiency:
    def test_everywhere_at_most_one(self):
        for row in analytics.reference_exchanges():
            assert 0 < row["efficiency"] <= 1

    def test_drops_as_rate_grows_at_fixed_payload(self):
        for msdu in (120, 1500):
            effs = [
                analytics.mac_efficiency(ExchangeSpec("a", index=i, msdu_octets=msdu)).efficiency
                for i in (0, 4, 7)
            ]
            assert effs == sorted(effs, reverse=True)

    def test_vanishing_payload(self):
        report = analytics.mac_efficiency(ExchangeSpec("n", index=15, msdu_octets=0))
        assert report.throughput_mbps == 0
        assert report.efficiency == 0

    def test_with_overhead_stripped_efficiency_nears_one(self):
        spec = ExchangeSpec(
            "ac", index=8, n_ss=1, msdu_octets=2304, n_mpdus=64,
            ack="block_ack", access="none",
        )
        eff = analytics.mac_efficiency(spec).efficiency
        assert 0.95 < eff < 1


TABLE_MU = {
    "one_pair": {10: 130.25, 20: 133.70, 30: 134.85, 40: 135.42},
    "one_triple": {10: 183.74, 20: 190.85, 30: 193.22, 40: 194.41},
    "two_pairs": {10: 123.36, 20: 130.25, 30: 132.55, 40: 133.70},
    "pair_4x2": {10: 127.56, 20: 132.35, 30: 133.95, 40: 134.75},
}
TABLE_SU = {
    "one_pair": {100: 71.17, 140: 71.28},
    "one_triple": {100: 70.98, 140: 71.14},
    "two_pairs": {100: 70.79, 140: 71.01},
    "pair_4x2": {100: 71.09, 140: 71.22},
}


class TestSaturation:
    @pytest.mark.parametrize("name", list(analytics.SATURATION_SCENARIOS))
    def test_mu_grid(self, name):
        params = analytics.SATURATION_SCENARIOS[name]
        for interval, want in TABLE_MU[name].items():
            got = analytics.saturation_throughput(
                "mu", sounding_interval_ms=interval, **params
            )
            assert got == pytest.approx(want, rel=0.02)

    @pytest.mark.parametrize("name", list(analytics.SATURATION_SCENARIOS))
    def test_su_grid(self, name):
        params = analytics.SATURATION_SCENARIOS[name]
        for interval, want in TABLE_SU[name].items():
            got = analytics.saturation_throughput(
                "su", sounding_interval_ms=interval, **params
            )
            assert got == pytest.approx(want, rel=0.02)

    def test_monotone_in_sounding_interval(self):
        for name, params in analytics.SATURATION_SCENARIOS.items():
            series = [
                analytics.saturation_throughput("mu", sounding_interval_ms=iv, **params)
                for iv in (10, 20, 30, 40)
            ]
            assert series == sorted(series)

    def test_rarely_sounded_pair_beats_single_user(self):
        mu = analytics.saturation_throughput("mu", sounding_interval_ms=40)
        su = analytics.saturation_throughput("su", sounding_interval_ms=100)
        assert mu > 1.8 * su  # overhead-only view; channel aging not priced in

    def test_aggregation_cap_costs_throughput(self):
        free = analytics.saturation_throughput("mu", sounding_interval_ms=20)
        capped = analytics.saturation_throughput(
            "mu", sounding_interval_ms=20, max_aggregation=8
        )
        assert capped < free

    def test_beacons_cost_throughput(self):
        with_b = analytics.saturation_throughput("mu", sounding_interval_ms=20)
        without = analytics.saturation_throughput(
            "mu", sounding_interval_ms=20, include_beacons=False
        )
        assert without > with_b

    def test_stream_overflow(self):
        with pytest.raises(StreamOverflow):
            analytics.saturation_throughput("mu", group_size=5, streams_per_user=2)

    def test_pathological_sounding_saturates_to_zero(self):
        got = analytics.saturation_throughput(
            "mu", n_groups=50, sounding_interval_ms=0.5
        )
        assert got == 0.0

    def test_grid_shape(self):
        rows = analytics.saturation_grid()
        assert len(rows) == 4 * (4 + 2)
        assert {r["scheme"] for r in rows} == {"mu", "su"}


class TestAhExchanges:
    def test_ack_durations_1mhz(self):
        assert analytics.ah_ack_us(1, "normal") == 1120.0
        assert analytics.ah_ack_us(1, "short") == 200.0
        assert analytics.ah_ack_us(1, "ultra_short") == 40.0

    def test_ack_durations_2mhz(self):
        assert analytics.ah_ack_us(2, "normal") == 440.0
        assert analytics.ah_ack_us(2, "short") == 200.0
        assert analytics.ah_ack_us(2, "ultra_short") == 40.0

    def test_ultra_short_scales_with_guard_interval(self):
        assert analytics.ah_ack_us(1, "ultra_short", gi="short") == 36.0

    def test_sensor_exchange_breakdown(self):
        spec = ExchangeSpec("ah", 1, 8, msdu_octets=64, ack="ultra_short")
        b = analytics.exchange_duration(spec)
        assert (b.access_us, b.data_us, b.sifs_us, b.ack_us) == (110.5, 400.0, 16.0, 40.0)
        assert b.total_us == 566.5

    def test_ordering_at_every_index(self):
        for bw in (1, 2):
            for index in analytics.ah_defined_indices(bw):
                durations = [
                    analytics.exchange_duration(
                        ExchangeSpec("ah", bw, index, msdu_octets=256, ack=kind)
                    ).total_us
                    for kind in ("ultra_short", "short", "normal")
                ]
                assert durations[0] < durations[1] < durations[2]


class TestAhCapacity:
    def test_beacon_overhead(self):
        assert analytics.ah_beacon_overhead_us_per_s(1) == 21348.0
        assert analytics.ah_beacon_overhead_us_per_s(2) == 6544.0

    def test_industrial_1mhz_ultra_short(self):
        assert analytics.max_active_stations("ultra_short", 1, 8, 64, 5) == 8637

    def test_sensor_2mhz_ultra_short(self):
        assert analytics.max_active_stations("ultra_short", 2, 8, 256, 35) == 50649

    def test_sensor_1mhz_deltas(self):
        ultra = analytics.max_active_stations("ultra_short", 1, 8, 256, 35)
        short = analytics.max_active_stations("short", 1, 8, 256, 35)
        normal = analytics.max_active_stations("normal", 1, 8, 256, 35)
        assert ultra - short == 4668
        assert ultra - normal == 17615

    def test_sensor_2mhz_delta(self):
        ultra = analytics.max_active_stations("ultra_short", 2, 8, 256, 35)
        short = analytics.max_active_stations("short", 2, 8, 256, 35)
        assert ultra - short == 9573

    def test_capacity_ordering_everywhere(self):
        for bw, msdu, cycle in ((1, 64, 5), (2, 64, 5), (1, 256, 35), (2, 256, 35)):
            for index in analytics.ah_defined_indices(bw):
                u = analytics.max_active_stations("ultra_short", bw, index, msdu, cycle)
                s = analytics.max_active_stations("short", bw, index, msdu, cycle)
                n = analytics.max_active_stations("normal", bw, index, msdu, cycle)
                assert u > s > n

    def test_rows_cover_every_index_and_scheme(self):
        rows = analytics.ah_capacity_rows(1, 64, 5)
        assert len(rows) == 10 * 3
        assert rows[0].keys() == {"mcs_index", "scheme", "duration_us", "max_stations"}
        indices = {r["mcs_index"] for r in rows}
        assert indices == set(range(-1, 9))

    def test_more_stations_at_2mhz(self):
        rows1 = analytics.ah_capacity_rows(1, 64, 5)
        rows2 = analytics.ah_capacity_rows(2, 64, 5)
        assert len(rows2) == 9 * 3
        best1 = max(r["max_stations"] for r in rows1)
        best2 = max(r["max_stations"] for r in rows2)
        assert best2 > best1
