"""Closed-form calculators, no event loop involved.

Exchange durations with per-phase breakdowns, MAC efficiency, saturation
throughput for sounded single- and multi-user transmissions, and sub-1 GHz
station capacity under the three acknowledgment schemes. These give the
quick what-if view; the simulator reproduces the same quantities with
contention and channel dynamics included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import mac
from .errors import StreamOverflow
from .rates import (
    ACK_OCTETS,
    BA_OCTETS,
    DEFAULT_BASIC_RATES_MBPS,
    EDCA_PARAMS,
    TimingParams,
    ampdu_psdu_octets,
    control_response_rate,
    lookup_rate,
    mpdu_octets,
    mu_ppdu_duration_us,
    ppdu_duration_us,
    psdu_symbols,
    symbol_us,
)

# Sub-1 GHz PPDUs here use the 5-symbol short-format preamble
# (STF + LTF1 + SIG at the downclocked 40 us symbol).
S1G_PREAMBLE_SYMBOLS = 5

ACK_SCHEMES = ("normal", "short", "ultra_short", "block_ack")


def _ah_floor_index(bandwidth_mhz: int) -> int:
    # most robust scheme per bandwidth: 2x repetition exists only at 1 MHz
    return -1 if bandwidth_mhz == 1 else 0


def ah_defined_indices(bandwidth_mhz: int) -> tuple[int, ...]:
    return tuple(range(_ah_floor_index(bandwidth_mhz), 9))


def mean_access_us(standard: str, source: str = "auto", timing: TimingParams | None = None) -> float:
    """Average medium-access cost: inter-frame space + CWmin/2 backoff slots.

    Legacy stations wait DIFS; QoS stations wait the best-effort AIFS.
    """
    timing = timing or TimingParams()
    if source == "auto":
        source = "difs" if standard in ("a", "g") else "aifs_be"
    backoff = timing.cwmin / 2 * timing.slot_us
    if source == "none":
        return 0.0
    if source == "difs":
        return timing.difs_us + backoff
    if source == "aifs_be":
        return timing.aifs_us(EDCA_PARAMS["BE"][0]) + backoff
    raise ValueError(f"unknown access source {source!r}")


@dataclass(frozen=True)
class ExchangeSpec:
    """One data + acknowledgment exchange to be costed."""

    standard: str
    bandwidth_mhz: int = 20
    index: int = 0
    n_ss: int | None = None
    gi: str = "long"
    msdu_octets: int = 1500
    n_mpdus: int = 1
    ack: str = "normal"
    access: str = "auto"  # auto | difs | aifs_be | none
    basic_rates: tuple = DEFAULT_BASIC_RATES_MBPS

    def __post_init__(self):
        if self.ack not in ACK_SCHEMES:
            raise ValueError(f"unknown ack scheme {self.ack!r}")
        if self.n_mpdus < 1:
            raise ValueError("n_mpdus must be >= 1")
        if self.ack in ("short", "ultra_short") and self.standard != "ah":
            raise ValueError(f"{self.ack} acknowledgment is a sub-1 GHz scheme")


@dataclass(frozen=True)
class ExchangeBreakdown:
    access_us: float
    data_us: float
    sifs_us: float
    ack_us: float

    @property
    def total_us(self) -> float:
        return self.access_us + self.data_us + self.sifs_us + self.ack_us


def s1g_ppdu_us(bandwidth_mhz: int, index: int, psdu_octets: int, gi: str = "long") -> float:
    """Sub-1 GHz PPDU: short-format preamble plus payload symbols."""
    preamble = S1G_PREAMBLE_SYMBOLS * symbol_us("ah", "long")
    symbols = psdu_symbols("ah", bandwidth_mhz, index, 1, psdu_octets)
    return preamble + symbols * symbol_us("ah", gi)


def ah_ack_us(bandwidth_mhz: int, kind: str, gi: str = "long") -> float:
    """Acknowledgment air time for the three sub-1 GHz schemes.

    normal carries the 14-octet ACK MPDU at the most robust scheme; short
    strips the PSDU and is the bare preamble; ultra_short is a single
    recognizable symbol.
    """
    floor_index = _ah_floor_index(bandwidth_mhz)
    if kind in ("normal", "block_ack"):
        octets = BA_OCTETS if kind == "block_ack" else ACK_OCTETS
        return s1g_ppdu_us(bandwidth_mhz, floor_index, octets)
    if kind == "short":
        return S1G_PREAMBLE_SYMBOLS * symbol_us("ah", "long")
    if kind == "ultra_short":
        return symbol_us("ah", gi)
    raise ValueError(f"unknown ack scheme {kind!r}")


def exchange_duration(spec: ExchangeSpec) -> ExchangeBreakdown:
    """Cost of access + data PPDU + SIFS + acknowledgment."""
    timing = TimingParams()
    access = mean_access_us(spec.standard, spec.access, timing)
    if spec.standard == "ah":
        frame = mpdu_octets(spec.msdu_octets, "ah")
        psdu = frame if spec.n_mpdus == 1 else ampdu_psdu_octets([frame] * spec.n_mpdus)
        data = s1g_ppdu_us(spec.bandwidth_mhz, spec.index, psdu, spec.gi)
        ack = ah_ack_us(spec.bandwidth_mhz, spec.ack, spec.gi)
        return ExchangeBreakdown(access, data, timing.sifs_us, ack)
    qos = spec.standard in ("n", "ac")
    frame = mpdu_octets(spec.msdu_octets, spec.standard, qos=qos)
    if spec.n_mpdus == 1 and spec.ack != "block_ack":
        psdu = frame
    else:
        psdu = ampdu_psdu_octets([frame] * spec.n_mpdus)
    data = ppdu_duration_us(
        spec.standard, spec.bandwidth_mhz, spec.index, spec.n_ss, spec.gi, psdu
    )
    rate = lookup_rate(spec.standard, spec.bandwidth_mhz, spec.index, spec.n_ss, spec.gi)
    octets = BA_OCTETS if spec.ack == "block_ack" else ACK_OCTETS
    ack = mac.control_ppdu_us(octets, control_response_rate(rate, spec.basic_rates))
    return ExchangeBreakdown(access, data, timing.sifs_us, ack)


@dataclass(frozen=True)
class EfficiencyReport:
    duration_us: float
    data_rate_mbps: float
    throughput_mbps: float

    @property
    def efficiency(self) -> float:
        return self.throughput_mbps / self.data_rate_mbps


def mac_efficiency(spec: ExchangeSpec) -> EfficiencyReport:
    """Throughput of the exchange and its share of the raw PHY rate."""
    duration = exchange_duration(spec).total_us
    payload_bits = spec.n_mpdus * spec.msdu_octets * 8
    rate = lookup_rate(spec.standard, spec.bandwidth_mhz, spec.index, spec.n_ss, spec.gi)
    return EfficiencyReport(duration, rate, payload_bits / duration)


def reference_exchanges() -> list[dict]:
    """The 16-exchange showcase: voice and full-size payloads across the
    legacy and high-throughput rate spread, plus 4- and 20-MPDU aggregates."""
    rows = []

    def add(spec: ExchangeSpec):
        report = mac_efficiency(spec)
        rows.append(
            {
                "standard": spec.standard,
                "rate_mbps": report.data_rate_mbps,
                "msdu_octets": spec.msdu_octets,
                "n_mpdus": spec.n_mpdus,
                "ack": spec.ack,
                "duration_us": report.duration_us,
                "throughput_mbps": report.throughput_mbps,
                "efficiency": report.efficiency,
            }
        )

    high_throughput = ((0, 20), (15, 20), (31, 40))  # 6.5, 130, 540 Mbps
    for msdu in (120, 1500):
        for index in (0, 4, 7):  # 6, 24, 54 Mbps
            add(ExchangeSpec("a", index=index, msdu_octets=msdu))
    for msdu in (120, 1500):
        for index, bw in high_throughput:
            add(ExchangeSpec("n", bw, index, msdu_octets=msdu))
    for n_mpdus in (4, 20):
        for index, bw in high_throughput[1:]:
            add(ExchangeSpec("n", bw, index, n_mpdus=n_mpdus, ack="block_ack"))
    return rows


# ---------------------------------------------------------------------------
# Saturation throughput with periodic sounding


SATURATION_SCENARIOS = {
    "one_pair": dict(n_groups=1, group_size=2, ap_antennas=3, sta_antennas=1),
    "one_triple": dict(n_groups=1, group_size=3, ap_antennas=3, sta_antennas=1),
    "two_pairs": dict(n_groups=2, group_size=2, ap_antennas=3, sta_antennas=1),
    "pair_4x2": dict(n_groups=1, group_size=2, ap_antennas=4, sta_antennas=2),
}
MU_SOUNDING_INTERVALS_MS = (10.0, 20.0, 30.0, 40.0)
SU_SOUNDING_INTERVALS_MS = (100.0, 140.0)


def saturation_throughput(
    scheme: str,
    n_groups: int = 1,
    group_size: int = 2,
    sounding_interval_ms: float = 100.0,
    *,
    ap_antennas: int = 3,
    sta_antennas: int = 1,
    streams_per_user: int = 1,
    standard: str = "ac",
    bandwidth_mhz: int = 20,
    mcs_index: int = 8,
    gi: str = "long",
    msdu_octets: int = 1500,
    txop_limit_us: float = float(EDCA_PARAMS["BE"][3]),
    max_aggregation: int | None = None,
    window_us: float = 100_000.0,
    include_beacons: bool = True,
) -> float:
    """Aggregate saturated throughput in Mbps under periodic sounding.

    Back-to-back TxOP exchanges at the top sustained rate fill whatever the
    window leaves after beacons and the per-interval sounding exchanges.
    Multi-user groups are sounded as one exchange; single-user stations are
    each sounded separately. Every access pays the average best-effort
    contention cost. This is the overhead-amortization view: throughput can
    only grow with the sounding interval, since channel aging is not priced
    in here.
    """
    if scheme not in ("su", "mu"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "mu" and group_size * streams_per_user > 8:
        raise StreamOverflow(f"{group_size * streams_per_user} streams in one transmission")
    timing = TimingParams()
    access = mean_access_us(standard, "aifs_be", timing)
    members = group_size if scheme == "mu" else 1
    frame = mpdu_octets(msdu_octets, standard, qos=True)

    k = mac.max_mpdus_in_txop(
        frame, standard, bandwidth_mhz, mcs_index, streams_per_user,
        txop_limit_us=txop_limit_us, gi=gi, n_members=members, timing=timing,
    )
    if max_aggregation is not None:
        k = min(k, max_aggregation)
    psdu = ampdu_psdu_octets([frame] * k)
    if scheme == "mu":
        data = mu_ppdu_duration_us(
            standard, bandwidth_mhz, [(mcs_index, streams_per_user, psdu)] * members, gi
        )
    else:
        data = ppdu_duration_us(
            standard, bandwidth_mhz, mcs_index, streams_per_user, gi, psdu
        )
    exchange = access + data + mac.ba_chain_us(members, timing)
    bits_per_exchange = members * k * msdu_octets * 8

    flavor = "mu" if scheme == "mu" else "su"
    sounded_units = n_groups if scheme == "mu" else n_groups * group_size
    per_sounding = access + mac.sounding_sequence(
        flavor, ap_antennas, sta_antennas,
        group_size if scheme == "mu" else 1,
        standard, bandwidth_mhz, timing=timing,
    ).total_us
    sounding_overhead = sounded_units * per_sounding * window_us / (sounding_interval_ms * 1000.0)

    beacon_overhead = 0.0
    if include_beacons:
        beacon_overhead = (access + mac.beacon_ppdu_us()) * window_us / mac.BEACON_PERIOD_US

    usable = window_us - beacon_overhead - sounding_overhead
    if usable <= 0:
        return 0.0
    return usable / exchange * bits_per_exchange / window_us


def saturation_grid() -> list[dict]:
    """Throughput over every bundled group structure and sounding interval."""
    rows = []
    for name, params in SATURATION_SCENARIOS.items():
        for scheme, intervals in (
            ("mu", MU_SOUNDING_INTERVALS_MS),
            ("su", SU_SOUNDING_INTERVALS_MS),
        ):
            for interval in intervals:
                rows.append(
                    {
                        "scenario": name,
                        "scheme": scheme,
                        "sounding_interval_ms": interval,
                        "throughput_mbps": saturation_throughput(
                            scheme, sounding_interval_ms=interval, **params
                        ),
                    }
                )
    return rows


# ---------------------------------------------------------------------------
# Sub-1 GHz station capacity


def ah_beacon_overhead_us_per_s(bandwidth_mhz: int) -> float:
    """Beacon air time per second: a short beacon every 100 ms plus a long
    one every 10 s, both at the most robust scheme."""
    floor_index = _ah_floor_index(bandwidth_mhz)
    short = s1g_ppdu_us(bandwidth_mhz, floor_index, mac.AH_SHORT_BEACON_OCTETS)
    long_ = s1g_ppdu_us(bandwidth_mhz, floor_index, mac.AH_LONG_BEACON_OCTETS)
    per_s = 1e6
    return (
        short * per_s / mac.AH_SHORT_BEACON_PERIOD_US
        + long_ * per_s / mac.AH_LONG_BEACON_PERIOD_US
    )


def max_active_stations(
    ack: str,
    bandwidth_mhz: int,
    index: int,
    msdu_octets: int,
    refresh_cycle_s: float,
) -> int:
    """How many stations fit one exchange each into the refresh cycle.

    Collision-free by construction; beacon air time is carved out of the
    cycle before dividing by the exchange duration.
    """
    spec = ExchangeSpec(
        "ah", bandwidth_mhz, index, msdu_octets=msdu_octets, ack=ack
    )
    exchange = exchange_duration(spec).total_us
    usable = refresh_cycle_s * 1e6 - refresh_cycle_s * ah_beacon_overhead_us_per_s(bandwidth_mhz)
    return math.floor(usable / exchange)


def ah_capacity_rows(
    bandwidth_mhz: int,
    msdu_octets: int,
    refresh_cycle_s: float,
    ack_kinds: tuple[str, ...] = ("normal", "short", "ultra_short"),
) -> list[dict]:
    """Capacity table over every defined scheme index, per ack kind."""
    rows = []
    for index in ah_defined_indices(bandwidth_mhz):
        for kind in ack_kinds:
            spec = ExchangeSpec(
                "ah", bandwidth_mhz, index, msdu_octets=msdu_octets, ack=kind
            )
            rows.append(
                {
                    "mcs_index": index,
                    "scheme": kind,
                    "duration_us": exchange_duration(spec).total_us,
                    "max_stations": max_active_stations(
                        kind, bandwidth_mhz, index, msdu_octets, refresh_cycle_s
                    ),
                }
            )
    return rows
