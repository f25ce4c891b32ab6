"""PHY rate tables and frame timing for 802.11a/g, 802.11n, 802.11ac and 802.11ah.

Rates derive from OFDM first principles (data subcarriers x modulation bits x
coding rate / symbol duration) so every tabulated value is reproducible; the
handful of cells the standards leave undefined is listed explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import InvalidPartition, OversizeMsdu, StreamOverflow, UndefinedMcs

STANDARDS = ("a", "g", "n", "ac", "ah")

# Long-GI OFDM symbol duration in microseconds. 802.11ah runs the 802.11ac
# waveform downclocked by 10. Short GI shaves 10% off the symbol.
SYMBOL_US = {"a": 4.0, "g": 4.0, "n": 4.0, "ac": 4.0, "ah": 40.0}

# SERVICE field and BCC tail bits wrapped around every PSDU.
SERVICE_BITS = 16
TAIL_BITS = 6

MAX_MSDU_OCTETS = 2304

# Control frame MPDU sizes (octets). BA uses the compressed bitmap variant.
ACK_OCTETS = 14
BA_OCTETS = 32
BAR_OCTETS = 24
RTS_OCTETS = 20
CTS_OCTETS = 14

# Rates every station can decode; ACK/BA/CTS responses use the highest one
# not exceeding the data rate.
DEFAULT_BASIC_RATES_MBPS = (6.0, 12.0, 24.0)

_DATA_SUBCARRIERS = {20: 52, 40: 108, 80: 234, 160: 468}  # n/ac numerology
_LEGACY_DATA_SUBCARRIERS = 48  # 802.11a/g
_AH_1MHZ_DATA_SUBCARRIERS = 24  # of 32 total

# (modulation bits per subcarrier, coding rate) per per-stream MCS index.
_MCS_CODING = (
    (1, Fraction(1, 2)),  # BPSK 1/2
    (2, Fraction(1, 2)),  # QPSK 1/2
    (2, Fraction(3, 4)),  # QPSK 3/4
    (4, Fraction(1, 2)),  # 16-QAM 1/2
    (4, Fraction(3, 4)),  # 16-QAM 3/4
    (6, Fraction(2, 3)),  # 64-QAM 2/3
    (6, Fraction(3, 4)),  # 64-QAM 3/4
    (6, Fraction(5, 6)),  # 64-QAM 5/6
    (8, Fraction(3, 4)),  # 256-QAM 3/4
    (8, Fraction(5, 6)),  # 256-QAM 5/6
)

# 802.11a/g index -> (modulation bits, coding rate); 6/9/12/18/24/36/48/54 Mbps.
_LEGACY_CODING = (
    (1, Fraction(1, 2)),
    (1, Fraction(3, 4)),
    (2, Fraction(1, 2)),
    (2, Fraction(3, 4)),
    (4, Fraction(1, 2)),
    (4, Fraction(3, 4)),
    (6, Fraction(2, 3)),
    (6, Fraction(3, 4)),
)

# VHT cells excluded by the BCC segment rules: bandwidth -> {(index, n_ss)}.
_VHT_UNDEFINED = {
    20: {(9, 1), (9, 2), (9, 4), (9, 5), (9, 7), (9, 8)},
    40: set(),
    80: {(6, 3), (6, 7), (9, 6)},
    160: {(9, 3)},
}

_BANDWIDTHS = {
    "a": (20,),
    "g": (20,),
    "n": (20, 40),
    "ac": (20, 40, 80, 160),
    "ah": (1, 2, 4, 8, 16),
}
_MAX_SS = {"a": 1, "g": 1, "n": 4, "ac": 8, "ah": 4}

# HT/VHT long training field count per number of space-time streams.
_N_LTF = {1: 1, 2: 2, 3: 4, 4: 4, 5: 6, 6: 6, 7: 8, 8: 8}


@dataclass(frozen=True)
class TimingParams:
    """MAC inter-frame timing. Defaults are the 5 GHz OFDM values, which
    802.11ah reuses unchanged (only the symbol clock is downclocked)."""

    slot_us: float = 9.0
    sifs_us: float = 16.0
    cwmin: int = 15
    cwmax: int = 1023

    @property
    def difs_us(self) -> float:
        return self.sifs_us + 2 * self.slot_us

    @property
    def pifs_us(self) -> float:
        return self.sifs_us + self.slot_us

    def aifs_us(self, aifsn: int) -> float:
        return self.sifs_us + aifsn * self.slot_us


# EDCA access categories: name -> (AIFSN, CWmin, CWmax, TxOP limit us).
# The best-effort TxOP limit of 3,008 us matches the experiment tables.
EDCA_PARAMS = {
    "BK": (7, 15, 1023, 0),
    "BE": (3, 15, 1023, 3008),
    "VI": (2, 7, 15, 3008),
    "VO": (2, 3, 7, 1504),
}


def _check_standard(standard: str) -> None:
    if standard not in STANDARDS:
        raise UndefinedMcs(f"unknown standard {standard!r}")


def _check_bandwidth(standard: str, bandwidth_mhz: int) -> None:
    if bandwidth_mhz not in _BANDWIDTHS[standard]:
        raise UndefinedMcs(f"802.11{standard} has no {bandwidth_mhz} MHz bandwidth")


def _resolve_n(index: int, n_ss: int | None) -> tuple[int, int]:
    """802.11n uses composite MCS indices 0..31 (index // 8 + 1 streams)."""
    if not 0 <= index <= 31:
        raise UndefinedMcs(f"802.11n MCS {index} out of range 0..31")
    derived_ss = index // 8 + 1
    if n_ss is not None and n_ss != derived_ss:
        raise UndefinedMcs(f"802.11n MCS {index} implies {derived_ss} streams, got {n_ss}")
    return index % 8, derived_ss


def bits_per_symbol(standard: str, bandwidth_mhz: int, index: int, n_ss: int | None = None) -> int:
    """Data bits carried by one OFDM symbol, all spatial streams combined.

    Raises UndefinedMcs for cells the standards do not define.
    """
    _check_standard(standard)
    _check_bandwidth(standard, bandwidth_mhz)

    if standard in ("a", "g"):
        if n_ss not in (None, 1):
            raise UndefinedMcs(f"802.11{standard} is single-stream")
        if not 0 <= index < len(_LEGACY_CODING):
            raise UndefinedMcs(f"802.11{standard} rate index {index} out of range 0..7")
        mod_bits, code = _LEGACY_CODING[index]
        bits = Fraction(_LEGACY_DATA_SUBCARRIERS * mod_bits) * code
    elif standard == "n":
        per_stream, n_ss = _resolve_n(index, n_ss)
        mod_bits, code = _MCS_CODING[per_stream]
        bits = Fraction(_DATA_SUBCARRIERS[bandwidth_mhz] * mod_bits * n_ss) * code
    elif standard == "ac":
        if n_ss is None:
            n_ss = 1
        if not 1 <= n_ss <= _MAX_SS["ac"]:
            raise UndefinedMcs(f"802.11ac supports 1..8 streams, got {n_ss}")
        if not 0 <= index <= 9:
            raise UndefinedMcs(f"802.11ac MCS {index} out of range 0..9")
        if (index, n_ss) in _VHT_UNDEFINED[bandwidth_mhz]:
            raise UndefinedMcs(
                f"802.11ac MCS {index} with {n_ss} streams is undefined at {bandwidth_mhz} MHz"
            )
        mod_bits, code = _MCS_CODING[index]
        bits = Fraction(_DATA_SUBCARRIERS[bandwidth_mhz] * mod_bits * n_ss) * code
    else:  # ah
        if n_ss is None:
            n_ss = 1
        if not 1 <= n_ss <= _MAX_SS["ah"]:
            raise UndefinedMcs(f"802.11ah supports 1..4 streams, got {n_ss}")
        if bandwidth_mhz == 1:
            # 24 data subcarriers of 32, one stream; index -1 is MCS0 with
            # 2x repetition (half rate).
            if n_ss != 1:
                raise UndefinedMcs("802.11ah 1 MHz is single-stream")
            if not -1 <= index <= 8:
                raise UndefinedMcs(f"802.11ah 1 MHz MCS {index} out of range -1..8")
            mod_bits, code = _MCS_CODING[max(index, 0)]
            bits = Fraction(_AH_1MHZ_DATA_SUBCARRIERS * mod_bits) * code
            if index == -1:
                bits = bits / 2
        else:
            # Same symbol content as 802.11ac at 10x the bandwidth.
            return bits_per_symbol("ac", bandwidth_mhz * 10, index, n_ss)

    if bits.denominator != 1:
        raise UndefinedMcs(
            f"802.11{standard} MCS {index} with {n_ss or 1} streams is undefined"
            f" at {bandwidth_mhz} MHz"
        )
    return int(bits)


def symbol_us(standard: str, gi: str = "long") -> float:
    _check_standard(standard)
    if gi == "long":
        return SYMBOL_US[standard]
    if gi == "short":
        return SYMBOL_US[standard] * 0.9
    raise ValueError(f"gi must be 'long' or 'short', got {gi!r}")


def lookup_rate(
    standard: str,
    bandwidth_mhz: int,
    index: int,
    n_ss: int | None = None,
    gi: str = "long",
) -> float:
    """PHY data rate in Mbps. Short GI is exactly 10/9 of the long-GI rate."""
    bits = bits_per_symbol(standard, bandwidth_mhz, index, n_ss)
    rate = bits / SYMBOL_US[standard]
    if gi == "short":
        return rate * 10 / 9
    if gi != "long":
        raise ValueError(f"gi must be 'long' or 'short', got {gi!r}")
    return rate


def preamble_us(standard: str, bandwidth_mhz: int = 20, n_sts: int = 1) -> float:
    """PLCP preamble duration including all training and signaling fields.

    802.11n is the mixed (legacy compatible) format; greenfield is not
    modeled. 802.11ah at 2..16 MHz is the downclocked 802.11ac preamble;
    the 1 MHz format spends 14 symbols on STF/LTF1/SIG.
    """
    _check_standard(standard)
    _check_bandwidth(standard, bandwidth_mhz)
    legacy = 8.0 + 8.0 + 4.0  # L-STF + L-LTF + L-SIG
    if standard in ("a", "g"):
        return legacy
    if not 1 <= n_sts <= _MAX_SS[standard]:
        raise StreamOverflow(f"{n_sts} space-time streams exceeds 802.11{standard} limit")
    if standard == "n":
        return legacy + 8.0 + 4.0 + 4.0 * _N_LTF[n_sts]  # HT-SIG, HT-STF, HT-LTFs
    if standard == "ac":
        # VHT-SIG-A, VHT-STF, VHT-LTFs, VHT-SIG-B
        return legacy + 8.0 + 4.0 + 4.0 * _N_LTF[n_sts] + 4.0
    # ah
    if bandwidth_mhz == 1:
        return (14 + (_N_LTF[n_sts] - 1)) * SYMBOL_US["ah"]
    return 10.0 * preamble_us("ac", bandwidth_mhz * 10, n_sts)


def psdu_symbols(standard: str, bandwidth_mhz: int, index: int, n_ss: int | None, psdu_octets: int) -> int:
    """OFDM symbol count for a PSDU: ceil((service + payload + tail) / bps)."""
    if psdu_octets < 0:
        raise ValueError("psdu_octets must be >= 0")
    if psdu_octets == 0:
        return 0
    bits = SERVICE_BITS + 8 * psdu_octets + TAIL_BITS
    return math.ceil(bits / bits_per_symbol(standard, bandwidth_mhz, index, n_ss))


def ppdu_duration_us(
    standard: str,
    bandwidth_mhz: int,
    index: int,
    n_ss: int | None = None,
    gi: str = "long",
    psdu_octets: int = 0,
    n_sts: int | None = None,
) -> float:
    """Air duration of one PPDU. psdu_octets = 0 gives a sounding NDP
    (preamble only)."""
    if n_sts is None:
        if standard == "n" and n_ss is None:
            n_sts = _resolve_n(index, None)[1]
        else:
            n_sts = n_ss or 1
    symbols = psdu_symbols(standard, bandwidth_mhz, index, n_ss, psdu_octets)
    return preamble_us(standard, bandwidth_mhz, n_sts) + symbols * symbol_us(standard, gi)


def mu_ppdu_duration_us(
    standard: str,
    bandwidth_mhz: int,
    users: Sequence[tuple[int, int, int]],
    gi: str = "long",
) -> float:
    """Duration of a multi-user PPDU; users are (mcs_index, n_ss, psdu_octets).

    All users share the preamble (training fields cover the total stream
    count) and the PPDU lasts until the slowest user's PSDU ends; shorter
    PSDUs are padded to the common duration.
    """
    if not users:
        raise ValueError("users must be non-empty")
    total_sts = sum(n_ss for _, n_ss, _ in users)
    if total_sts > _MAX_SS[standard]:
        raise StreamOverflow(f"{total_sts} total streams exceeds 802.11{standard} limit")
    symbols = max(
        psdu_symbols(standard, bandwidth_mhz, idx, n_ss, psdu)
        for idx, n_ss, psdu in users
    )
    return preamble_us(standard, bandwidth_mhz, total_sts) + symbols * symbol_us(standard, gi)


def control_response_rate(
    data_rate_mbps: float, basic_rates_mbps: Sequence[float] = DEFAULT_BASIC_RATES_MBPS
) -> float:
    """Highest basic rate not exceeding the data rate (lowest basic rate if
    the data rate undercuts them all)."""
    eligible = [r for r in basic_rates_mbps if r <= data_rate_mbps + 1e-9]
    return max(eligible) if eligible else min(basic_rates_mbps)


def mpdu_octets(msdu_octets: int, standard: str, qos: bool = False, ah_header: str = "short") -> int:
    """MPDU size: MSDU + MAC header + FCS.

    802.11n/ac QoS data adds the 2-octet QoS control field. The 802.11ah
    short header carries an AID in place of one full address
    (FC 2 + AID 2 + BSSID 6 + sequence 2, then a 4-octet FCS).
    """
    _check_standard(standard)
    if msdu_octets < 0:
        raise ValueError("msdu_octets must be >= 0")
    if msdu_octets > MAX_MSDU_OCTETS:
        raise OversizeMsdu(f"{msdu_octets} octets exceeds the {MAX_MSDU_OCTETS}-octet MSDU maximum")
    if standard == "ah" and ah_header == "short":
        return msdu_octets + 12 + 4
    header = 24 + (2 if qos else 0)
    return msdu_octets + header + 4


def ampdu_psdu_octets(mpdu_sizes: Sequence[int]) -> int:
    """A-MPDU PSDU size: 4-octet delimiter per subframe, each padded to a
    4-octet boundary except the last."""
    if not mpdu_sizes:
        return 0
    total = 0
    for i, size in enumerate(mpdu_sizes):
        sub = 4 + size
        if i < len(mpdu_sizes) - 1:
            sub += (-sub) % 4
        total += sub
    return total


@dataclass(frozen=True)
class AmpduBlock:
    channels: tuple[int, ...]  # 20 MHz channel ids, 1-based
    n_mpdus: int


@dataclass(frozen=True)
class AmpduLayout:
    scheme: str  # "horizontal" | "vertical"
    blocks: tuple[AmpduBlock, ...]

    @property
    def n_mpdus(self) -> int:
        return sum(b.n_mpdus for b in self.blocks)


def build_ampdu_layout(n_mpdus: int, scheme: str, b_blocks: int, n_channels: int) -> AmpduLayout:
    """Partition an aggregate over bonded 20 MHz channels.

    Vertical keeps the classical single A-MPDU spanning every channel.
    Horizontal splits the aggregate into B blocks, each confined to an
    equal share of the channels so a narrowband collision can only corrupt
    one block's MPDUs.
    """
    if n_mpdus < 0:
        raise ValueError("n_mpdus must be >= 0")
    if n_channels < 1:
        raise InvalidPartition("need at least one channel")
    if scheme == "vertical":
        if b_blocks != 1:
            raise InvalidPartition("vertical aggregation is a single block")
        return AmpduLayout("vertical", (AmpduBlock(tuple(range(1, n_channels + 1)), n_mpdus),))
    if scheme != "horizontal":
        raise InvalidPartition(f"unknown scheme {scheme!r}")
    if b_blocks < 1 or b_blocks > n_channels or n_channels % b_blocks != 0:
        raise InvalidPartition(f"{b_blocks} blocks do not tile {n_channels} channels")
    per_block = n_channels // b_blocks
    base, extra = divmod(n_mpdus, b_blocks)
    blocks = []
    for i in range(b_blocks):
        chans = tuple(range(1 + i * per_block, 1 + (i + 1) * per_block))
        blocks.append(AmpduBlock(chans, base + (1 if i < extra else 0)))
    return AmpduLayout("horizontal", tuple(blocks))


def mcs_catalog() -> Iterator[dict]:
    """Every defined (standard, bandwidth, index, n_ss, gi) rate record."""
    for standard in STANDARDS:
        for bw in _BANDWIDTHS[standard]:
            if standard in ("a", "g"):
                indices = [(i, 1) for i in range(8)]
                gis = ("long",)
            elif standard == "n":
                indices = [(i, i // 8 + 1) for i in range(32)]
                gis = ("long", "short")
            elif standard == "ac":
                indices = [(i, ss) for ss in range(1, 9) for i in range(10)]
                gis = ("long", "short")
            else:
                if bw == 1:
                    indices = [(i, 1) for i in range(-1, 9)]
                else:
                    indices = [(i, ss) for ss in range(1, 5) for i in range(10)]
                gis = ("long", "short")
            for index, n_ss in indices:
                for gi in gis:
                    try:
                        rate = lookup_rate(standard, bw, index, n_ss, gi)
                    except UndefinedMcs:
                        continue
                    yield {
                        "standard": standard,
                        "bandwidth_mhz": bw,
                        "index": index,
                        "n_ss": n_ss,
                        "gi": gi,
                        "rate_bps": round(rate * 1e6),
                    }
