"""End-to-end acceptance gate.

One test per top-level requirement, each ending in a single PASS line so a
``pytest -sv`` run reads as a checklist. Every expected number is frozen
from an independent hand computation or a published reference table;
nothing in here adapts to the code under test. Tolerances are stated next
to each assertion and must not be loosened to make a failing build green.
"""

import math
from collections import defaultdict

import numpy as np
import pytest

from xlwifi import analytics, cli, link, mac, scenario
from xlwifi.analytics import ExchangeSpec
from xlwifi.engine import run_scenario
from xlwifi.precoding import bd_precoders, mmse_precoders, svd, zf_precoders
from xlwifi.scenario import AppConfig, ScenarioConfig, StationConfig


def _ok(line: str) -> None:
    print(f"PASS {line}")


class TestExchangeDurations:
    def test_exact_durations_and_grid_trends(self):
        short_a = analytics.exchange_duration(ExchangeSpec("a", index=7, msdu_octets=120))
        assert short_a.total_us == 189.5
        short_n = analytics.exchange_duration(ExchangeSpec("n", index=15, msdu_octets=120))
        assert short_n.total_us == 206.5
        # the same 120-octet exchange pinned at the fastest defined rate:
        # overheads dominate so the total does not move
        fast_n = analytics.exchange_duration(ExchangeSpec("n", 40, 31, msdu_octets=120))
        assert fast_n.total_us == 206.5

        rows = analytics.reference_exchanges()
        groups = defaultdict(list)
        for r in rows:
            groups[(r["standard"], r["msdu_octets"], r["n_mpdus"], r["ack"])].append(r)
        for members in groups.values():
            members.sort(key=lambda r: r["rate_mbps"])
            for slower, faster in zip(members, members[1:]):
                assert faster["efficiency"] < slower["efficiency"]

        # aggregation dominates: at fixed rate and payload, more members
        # raise throughput and efficiency together
        for rate in (130.0, 540.0):
            chain = sorted(
                (r for r in rows if r["standard"] == "n"
                 and r["rate_mbps"] == rate and r["msdu_octets"] == 1500),
                key=lambda r: r["n_mpdus"],
            )
            assert [c["n_mpdus"] for c in chain] == [1, 4, 20]
            for worse, better in zip(chain, chain[1:]):
                assert better["throughput_mbps"] > worse["throughput_mbps"]
                assert better["efficiency"] > worse["efficiency"]
        top = max(rows, key=lambda r: r["throughput_mbps"])
        assert top["n_mpdus"] > 1
        _ok(
            "exchange durations: 189.5 us and 206.5 us exact; efficiency falls "
            "with rate; aggregated rows dominate at fixed rate"
        )


class TestClosedForms:
    def test_collision_probability_and_adc_cap(self):
        # 1 - (1 - 0.05)^4, exact to 1e-9
        assert link.collision_probability(0.05, 4) == pytest.approx(0.18549375, abs=1e-9)
        # equal-power interferer halves the usable range: -10*log10(2) dB
        capped = link.adc_capped_snr(30.0, 0.0, 1.0)
        assert capped == pytest.approx(30.0 - 10.0 * math.log10(2.0), abs=1e-9)
        assert capped == pytest.approx(30.0 - 3.0103, abs=5e-5)
        _ok("closed forms: multi-channel hit probability and ADC cap exact to 1e-9")


class TestPrecodingBattery:
    def test_thousand_random_channels(self):
        rng = np.random.default_rng(2026)

        def channel(n_rx, n_tx):
            return (
                rng.standard_normal((n_rx, n_tx)) + 1j * rng.standard_normal((n_rx, n_tx))
            ) / math.sqrt(2.0)

        checked = 0
        for _ in range(250):
            # SVD reconstruction on an arbitrary shape
            H = channel(int(rng.integers(1, 9)), int(rng.integers(1, 9)))
            res = svd(H)
            k = min(H.shape)
            back = res.U[:, :k] @ np.diag(res.sigma) @ res.V[:, :k].conj().T
            assert np.linalg.norm(back - H) <= 1e-10 * max(np.linalg.norm(H), 1.0)
            checked += 1

            # channel inversion: single global scaling of the identity
            n_tx = int(rng.integers(2, 9))
            n_users = int(rng.integers(1, n_tx + 1))
            users = [channel(1, n_tx) for _ in range(n_users)]
            pset = zf_precoders(users)
            full = np.hstack([pset.effective(u) for u in range(n_users)])
            G = np.vstack(users) @ full
            alpha = float(np.mean(np.diag(G).real))
            assert alpha > 0
            assert np.linalg.norm(G - alpha * np.eye(n_users)) <= 1e-9
            checked += 1

            # regularized inversion degenerates to plain inversion at rho=0
            mset = mmse_precoders(users, 0.0)
            worst = max(
                float(np.linalg.norm(mset.effective(u) - pset.effective(u)))
                for u in range(n_users)
            )
            assert worst <= 1e-8
            checked += 1

            # block diagonalization: zero leakage into the other user
            n_tx = int(rng.integers(3, 9))
            rx_a = int(rng.integers(1, 3))
            rx_b = int(rng.integers(1, min(3, n_tx - rx_a) + 1))
            pair = [channel(rx_a, n_tx), channel(rx_b, n_tx)]
            bset = bd_precoders(pair)
            for c in range(2):
                for e in range(2):
                    if c != e:
                        assert float(np.linalg.norm(pair[c] @ bset.effective(e))) <= 1e-9
            checked += 1
        assert checked == 1000
        _ok("precoding battery: 1000 random channels meet SVD/ZF/MMSE/BD bounds")


# published downlink saturation throughputs in Mbps, keyed by
# (scenario, scheme, sounding interval in ms)
SATURATION_TABLE = {
    ("one_pair", "mu", 10.0): 130.25,
    ("one_pair", "mu", 20.0): 133.70,
    ("one_pair", "mu", 30.0): 134.85,
    ("one_pair", "mu", 40.0): 135.42,
    ("one_pair", "su", 100.0): 71.17,
    ("one_pair", "su", 140.0): 71.28,
    ("one_triple", "mu", 10.0): 183.74,
    ("one_triple", "mu", 20.0): 190.85,
    ("one_triple", "mu", 30.0): 193.22,
    ("one_triple", "mu", 40.0): 194.41,
    ("one_triple", "su", 100.0): 70.98,
    ("one_triple", "su", 140.0): 71.14,
    ("two_pairs", "mu", 10.0): 123.36,
    ("two_pairs", "mu", 20.0): 130.25,
    ("two_pairs", "mu", 30.0): 132.55,
    ("two_pairs", "mu", 40.0): 133.70,
    ("two_pairs", "su", 100.0): 70.79,
    ("two_pairs", "su", 140.0): 71.01,
    ("pair_4x2", "mu", 10.0): 127.56,
    ("pair_4x2", "mu", 20.0): 132.35,
    ("pair_4x2", "mu", 30.0): 133.95,
    ("pair_4x2", "mu", 40.0): 134.75,
    ("pair_4x2", "su", 100.0): 71.09,
    ("pair_4x2", "su", 140.0): 71.22,
}


class TestSaturationTable:
    def test_all_cells_within_5_percent(self):
        grid = {
            (r["scenario"], r["scheme"], float(r["sounding_interval_ms"])): r["throughput_mbps"]
            for r in analytics.saturation_grid()
        }
        assert grid.keys() == SATURATION_TABLE.keys()
        worst = 0.0
        for key, expected in SATURATION_TABLE.items():
            dev = abs(grid[key] - expected) / expected
            worst = max(worst, dev)
            assert dev <= 0.05, f"{key}: {grid[key]:.2f} vs {expected}"

        by_flow = defaultdict(list)
        for (scn, scheme, interval), value in grid.items():
            by_flow[(scn, scheme)].append((interval, value))
        for cells in by_flow.values():
            cells.sort()
            for (_, lo), (_, hi) in zip(cells, cells[1:]):
                assert hi >= lo
        _ok(
            f"saturation table: all 24 cells within 5% (worst {worst * 100:.2f}%), "
            "analytic view monotone in the sounding interval"
        )


class TestSensorCapacity:
    def test_anchor_counts_deltas_and_ordering(self):
        industrial = analytics.max_active_stations("ultra_short", 1, 8, 64, 5)
        assert industrial == pytest.approx(8635, rel=0.03)
        metering = analytics.max_active_stations("ultra_short", 2, 8, 256, 35)
        assert metering == pytest.approx(50050, rel=0.03)

        ultra1 = analytics.max_active_stations("ultra_short", 1, 8, 256, 35)
        short1 = analytics.max_active_stations("short", 1, 8, 256, 35)
        normal1 = analytics.max_active_stations("normal", 1, 8, 256, 35)
        short2 = analytics.max_active_stations("short", 2, 8, 256, 35)
        assert ultra1 - short1 == pytest.approx(4655, rel=0.05)
        assert ultra1 - normal1 == pytest.approx(17600, rel=0.05)
        assert metering - short2 == pytest.approx(9300, rel=0.05)

        for bw in (1, 2):
            for index in analytics.ah_defined_indices(bw):
                u = analytics.max_active_stations("ultra_short", bw, index, 64, 5)
                s = analytics.max_active_stations("short", bw, index, 64, 5)
                n = analytics.max_active_stations("normal", bw, index, 64, 5)
                assert u > s > n
        _ok(
            f"sensor capacity: anchors {industrial} and {metering} within 3%, "
            "gains within 5%, ack-scheme ordering strict at every index"
        )


def _two_user(scheme, sounding_ms, corr, coherence_ms, amrr, duration_s=1.5):
    return ScenarioConfig(
        seed=19, duration_s=duration_s, standard="ac", bandwidth_mhz=20,
        scheme=scheme, ap_antennas=3,
        inter_user_correlation=corr, coherence_ms=coherence_ms,
        sounding_interval_ms=sounding_ms, amrr=amrr, fixed_mcs=8,
        stations={1: StationConfig(5.0), 2: StationConfig(5.0)},
        apps=[AppConfig(1, 80.0), AppConfig(2, 80.0)],
    )


def _window_totals(result):
    acc = defaultdict(float)
    for t, v in result.log.series("throughput_mbps", direction="down"):
        acc[round(t, 6)] += v
    return acc


class TestSimulatorDirections:
    def test_two_user_multiplexing_doubles_throughput(self):
        mu = run_scenario(_two_user("mu_cti", 10.0, 0.0, math.inf, amrr=False))
        su = run_scenario(_two_user("su_bf", 100.0, 0.0, math.inf, amrr=False))
        ratio = mu.mean_throughput_mbps() / su.mean_throughput_mbps()
        assert 2.0 * 0.85 <= ratio <= 2.0 * 1.15
        _ok(f"two-user multiplexing: MU/SU ratio {ratio:.2f} within 2x +-15%")

    def test_crosstalk_sinks_correlated_aged_channels(self):
        cti = run_scenario(_two_user("mu_cti", 10.0, 0.8, 30.0, amrr=True))
        free = run_scenario(_two_user("mu_no_cti", 10.0, 0.8, 30.0, amrr=True))
        ct, ft = _window_totals(cti), _window_totals(free)
        times = sorted(set(ct) & set(ft))
        assert len(times) == 141
        below = sum(1 for t in times if ct[t] < ft[t])
        assert below >= 0.8 * len(times)
        _ok(f"crosstalk penalty: interference-aware mode lower on {below}/{len(times)} windows")

    def test_fresh_sounding_beats_stale_under_aging(self):
        s10 = run_scenario(_two_user("mu_cti", 10.0, 0.5, 30.0, amrr=True))
        s40 = run_scenario(_two_user("mu_cti", 40.0, 0.5, 30.0, amrr=True))
        fast, slow = s10.mean_throughput_mbps(), s40.mean_throughput_mbps()
        assert fast > slow
        _ok(f"sounding refresh: 10 ms gives {fast:.1f} Mbps, 40 ms gives {slow:.1f} Mbps")

    def test_block_split_wins_under_interference_cheap_without(self):
        def wideband(agg, blocks, p):
            return ScenarioConfig(
                seed=7, duration_s=1.0, standard="ac", bandwidth_mhz=80,
                scheme="su_bf", ap_antennas=1, amrr=True,
                aggregation_scheme=agg, b_blocks=blocks,
                collision_probability=p, collision_sir_low_db=0.0,
                collision_sir_high_db=6.0,
                stations={1: StationConfig(5.0)},
                apps=[AppConfig(1, 400.0)],
            )

        h_hit = run_scenario(wideband("horizontal", 2, 0.1))
        v_hit = run_scenario(wideband("vertical", 1, 0.1))
        assert min(h_hit.summary["txops"], v_hit.summary["txops"]) >= 200
        assert h_hit.mean_throughput_mbps() > v_hit.mean_throughput_mbps()

        h_clean = run_scenario(wideband("horizontal", 2, 0.0))
        v_clean = run_scenario(wideband("vertical", 1, 0.0))
        loss = 1.0 - h_clean.mean_throughput_mbps() / v_clean.mean_throughput_mbps()
        assert loss <= 0.05
        _ok(
            f"block split: {h_hit.mean_throughput_mbps():.0f} vs "
            f"{v_hit.mean_throughput_mbps():.0f} Mbps under 10% interference, "
            f"clean-air cost {loss * 100:.1f}% within 5%"
        )


class TestConservationAndDeterminism:
    def test_every_bundled_scenario(self):
        names = cli.bundled_presets()
        assert names
        for name in names:
            _, text = cli._load_scenario_text(name)
            cfg = scenario.loads(text)
            first = run_scenario(cfg)
            assert first.summary["conserved"] is True
            assert all(r == 0 for r in first.conservation_residues().values())
            second = run_scenario(scenario.loads(text))
            assert first.log.csv_text() == second.log.csv_text()
            assert first.log.json_text() == second.log.json_text()
        _ok(f"conservation: {len(names)} bundled scenarios balance and rerun byte-identical")


class TestRateControlMachine:
    def test_chain_watermarks_and_probe_discipline(self):
        ladder = tuple(range(8))
        st = mac.AmrrState(mac.AmrrConfig(ladder), position=5)
        assert st.chain() == ((5, 3), (4, 3), (3, 1), (0, 3))
        walked = [st.rate_for_failures(n) for n in range(st.attempts_until_drop + 1)]
        assert walked == [5, 5, 5, 4, 4, 4, 3, 0, 0, 0, None]

        # clean interval with enough successes: climb and arm a probe
        for _ in range(12):
            st.on_attempt_result(True)
        st.on_attempt_result(False)
        assert st.on_interval_close() == "increase"
        assert st.position == 6 and st.probing

        # failed probe reverts and doubles the gate, up to the cap
        st.on_attempt_result(False)
        assert st.position == 5 and st.success_threshold == 20
        for expect in (40, 80, 160, 160):
            for _ in range(st.success_threshold):
                st.on_attempt_result(True)
            assert st.on_interval_close() == "increase"
            st.on_attempt_result(False)
            assert st.position == 5 and st.success_threshold == expect

        # passed probe re-arms the configured gate
        for _ in range(st.success_threshold):
            st.on_attempt_result(True)
        assert st.on_interval_close() == "increase"
        st.on_attempt_result(True)
        assert st.position == 6 and st.success_threshold == 10

        # middling ratio holds, heavy losses step down, floor never underflows
        st = mac.AmrrState(mac.AmrrConfig(ladder), position=3)
        for _ in range(10):
            st.on_attempt_result(True)
        st.on_attempt_result(False)
        st.on_attempt_result(False)
        assert st.on_interval_close() == "hold" and st.position == 3
        for _ in range(4):
            st.on_attempt_result(True)
        for _ in range(2):
            st.on_attempt_result(False)
        assert st.on_interval_close() == "decrease" and st.position == 2
        st = mac.AmrrState(mac.AmrrConfig(ladder), position=0)
        for _ in range(3):
            st.on_attempt_result(False)
        assert st.on_interval_close() == "hold" and st.position == 0
        _ok("rate control: retry chain, watermark decisions, probe revert and doubling")
