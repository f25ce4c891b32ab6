"""MAC protocol building blocks.

EDCA contention state, A-MPDU sizing against a TxOP budget, AMRR rate
adaptation, channel sounding exchanges with beamforming reports, block-ACK
chains, beacons, NAV bookkeeping, and the secondary-channel idle rule.
Everything here is engine-agnostic: durations and decisions come out as
plain numbers so both the event loop and the closed-form calculators can
share them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import UndefinedMcs
from .precoding import QUANT_BITS, givens_angle_count
from .rates import (
    BA_OCTETS,
    BAR_OCTETS,
    EDCA_PARAMS,
    TimingParams,
    AmpduLayout,
    _resolve_n,
    ampdu_psdu_octets,
    build_ampdu_layout,
    mpdu_octets,
    ppdu_duration_us,
    preamble_us,
    psdu_symbols,
    symbol_us,
)

# Control frames ride the highest mandatory OFDM rate, management frames the
# lowest. Neither is spelled out by the experiment tables; both are the
# conventional 5 GHz choices.
CONTROL_RATE_MBPS = 24.0
MANAGEMENT_RATE_MBPS = 6.0

NDPA_OCTETS = 25
BF_POLL_OCTETS = 20

BEACON_BODY_OCTETS = 80
BEACON_PERIOD_US = 100_000

# Sub-1 GHz short beaconing: a compressed beacon every 100 ms plus a full
# one every 10 s. Sizes are whole-MPDU octets (the short format drops most
# of the management body).
AH_SHORT_BEACON_OCTETS = 32
AH_LONG_BEACON_OCTETS = 96
AH_SHORT_BEACON_PERIOD_US = 100_000
AH_LONG_BEACON_PERIOD_US = 10_000_000

_LEGACY_INDEX = {6.0: 0, 9.0: 1, 12.0: 2, 18.0: 3, 24.0: 4, 36.0: 5, 48.0: 6, 54.0: 7}


def legacy_index(rate_mbps: float) -> int:
    """802.11a rate table index for a nominal legacy rate in Mbps."""
    try:
        return _LEGACY_INDEX[float(rate_mbps)]
    except KeyError:
        raise UndefinedMcs(f"{rate_mbps} Mbps is not an 802.11a rate") from None


def control_ppdu_us(octets: int, rate_mbps: float = CONTROL_RATE_MBPS) -> float:
    """Air duration of a control/management MPDU sent as a legacy PPDU."""
    return ppdu_duration_us("a", 20, legacy_index(rate_mbps), psdu_octets=octets)


def beacon_ppdu_us(body_octets: int = BEACON_BODY_OCTETS) -> float:
    """Beacon air duration: management body + header at the lowest rate."""
    frame = mpdu_octets(body_octets, "a")
    return control_ppdu_us(frame, MANAGEMENT_RATE_MBPS)


def bf_report_octets(
    n_rows: int,
    n_cols: int,
    flavor: str,
    n_subcarriers: int = 52,
    grouping: int = 1,
) -> int:
    """Compressed beamforming report MPDU size in octets.

    The steering matrix is encoded as Givens angles; half the angles use the
    psi width and half the phi width for the feedback flavor ("su" or "mu").
    On top of the angle payload: an 8-octet MIMO control field, one SNR
    octet per column, and the 28-octet management header + FCS.
    """
    if flavor not in QUANT_BITS:
        raise ValueError(f"unknown feedback flavor {flavor!r}")
    if grouping < 1:
        raise ValueError("grouping must be >= 1")
    psi_bits, phi_bits = QUANT_BITS[flavor]
    angles = givens_angle_count(n_rows, n_cols)
    bits_per_carrier = (angles // 2) * (psi_bits + phi_bits)
    carriers = math.ceil(n_subcarriers / grouping)
    payload = math.ceil(bits_per_carrier * carriers / 8)
    return 28 + 8 + n_cols + payload


@dataclass(frozen=True)
class SoundingFrame:
    kind: str  # "ndpa" | "ndp" | "bf_report" | "bf_poll"
    duration_us: float
    member: int | None = None  # which group member the frame concerns


@dataclass(frozen=True)
class SoundingSequence:
    frames: tuple[SoundingFrame, ...]
    total_us: float  # air time plus the SIFS gaps; medium access not included

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def sounding_sequence(
    flavor: str,
    ap_antennas: int,
    sta_antennas: int,
    n_members: int,
    standard: str = "ac",
    bandwidth_mhz: int = 20,
    n_subcarriers: int = 52,
    grouping: int = 1,
    timing: TimingParams | None = None,
) -> SoundingSequence:
    """Frame sequence of one sounding exchange.

    NDPA, the NDP itself, then the first member's report; every further
    member is polled for its report. The NDP trains all AP antennas, so its
    preamble carries ap_antennas space-time streams and no PSDU.
    """
    if n_members < 1:
        raise ValueError("a sounding exchange needs at least one member")
    timing = timing or TimingParams()
    report = control_ppdu_us(
        bf_report_octets(ap_antennas, sta_antennas, flavor, n_subcarriers, grouping)
    )
    ndp = ppdu_duration_us(standard, bandwidth_mhz, 0, n_sts=ap_antennas)
    frames = [
        SoundingFrame("ndpa", control_ppdu_us(NDPA_OCTETS)),
        SoundingFrame("ndp", ndp),
        SoundingFrame("bf_report", report, member=0),
    ]
    for m in range(1, n_members):
        frames.append(SoundingFrame("bf_poll", control_ppdu_us(BF_POLL_OCTETS), member=m))
        frames.append(SoundingFrame("bf_report", report, member=m))
    total = sum(f.duration_us for f in frames) + timing.sifs_us * (len(frames) - 1)
    return SoundingSequence(tuple(frames), total)


def ba_chain_us(n_members: int, timing: TimingParams | None = None) -> float:
    """Response chain after a (MU) data PPDU.

    The first member replies with a block ACK one SIFS after the PPDU;
    every further member is solicited with a BAR and answers with a BA.
    """
    if n_members < 1:
        raise ValueError("n_members must be >= 1")
    timing = timing or TimingParams()
    ba = control_ppdu_us(BA_OCTETS)
    bar = control_ppdu_us(BAR_OCTETS)
    first = timing.sifs_us + ba
    extra = (n_members - 1) * (timing.sifs_us + bar + timing.sifs_us + ba)
    return first + extra


def max_mpdus_in_txop(
    mpdu_size: int,
    standard: str,
    bandwidth_mhz: int,
    index: int,
    n_ss: int | None = None,
    txop_limit_us: float = EDCA_PARAMS["BE"][3],
    gi: str = "long",
    n_members: int = 1,
    n_sts: int | None = None,
    timing: TimingParams | None = None,
) -> int:
    """Largest per-user A-MPDU count whose PPDU plus the full response
    chain fits in the TxOP limit.

    A limit of 0 (the BK default) means no limit and returns a huge count
    for the caller to cap. One MPDU may always be sent, even when its
    exchange alone overruns the limit; the standard does not fragment it.
    """
    if txop_limit_us <= 0:
        return 1 << 20
    if n_sts is None:
        if standard == "n" and n_ss is None:
            per_user = _resolve_n(index, None)[1]  # composite MCS encodes streams
        else:
            per_user = n_ss or 1
        n_sts = per_user * n_members
    responses = ba_chain_us(n_members, timing)
    preamble = preamble_us(standard, bandwidth_mhz, n_sts)
    sym = symbol_us(standard, gi)
    best = 1
    for k in itertools.count(2):
        psdu = ampdu_psdu_octets([mpdu_size] * k)
        airtime = preamble + psdu_symbols(standard, bandwidth_mhz, index, n_ss, psdu) * sym
        if airtime + responses > txop_limit_us:
            return best
        best = k
    return best


def assemble_ampdu(
    n_queued: int,
    mpdu_size: int,
    standard: str,
    bandwidth_mhz: int,
    index: int,
    n_ss: int | None = None,
    txop_limit_us: float = EDCA_PARAMS["BE"][3],
    max_aggregation: int = 64,
    gi: str = "long",
    n_members: int = 1,
    layout_scheme: str = "vertical",
    b_blocks: int = 1,
    n_channels: int = 1,
) -> AmpduLayout:
    """Pick the A-MPDU size for the head of a queue and lay it out.

    The count is the queue depth capped by the configured aggregation
    maximum and by what fits in the TxOP at the current first-try rate.
    """
    if n_queued < 1:
        raise ValueError("nothing queued")
    fit = max_mpdus_in_txop(
        mpdu_size, standard, bandwidth_mhz, index, n_ss,
        txop_limit_us=txop_limit_us, gi=gi, n_members=n_members,
    )
    n = min(n_queued, max_aggregation, fit)
    return build_ampdu_layout(n, layout_scheme, b_blocks, n_channels)


class EdcaContender:
    """Per-AC contention state: AIFS wait, backoff draw, CW evolution.

    The engine drives time; this object only answers how many idle slots
    remain. A frozen backoff resumes without a redraw. CW doubles as
    2*(CW+1)-1 on failure and snaps back to CWmin on success.
    """

    def __init__(self, ac: str = "BE", timing: TimingParams | None = None):
        if ac not in EDCA_PARAMS:
            raise ValueError(f"unknown access category {ac!r}")
        self.ac = ac
        self.timing = timing or TimingParams()
        self.aifsn, self.cwmin, self.cwmax, self.txop_limit_us = EDCA_PARAMS[ac]
        self.cw = self.cwmin
        self.residual_slots: int | None = None

    @property
    def aifs_us(self) -> float:
        return self.timing.aifs_us(self.aifsn)

    def draw_backoff(self, rng) -> int:
        """Draw a fresh backoff uniformly over [0, CW] unless one is frozen."""
        if self.residual_slots is None:
            self.residual_slots = int(rng.integers(0, self.cw + 1))
        return self.residual_slots

    def countdown_us(self, rng) -> float:
        """Access delay on an otherwise empty medium: AIFS + backoff slots."""
        return self.aifs_us + self.draw_backoff(rng) * self.timing.slot_us

    def consume_idle_slots(self, n: int) -> bool:
        """Advance the countdown by n idle slots; True when it reaches zero."""
        if self.residual_slots is None:
            raise RuntimeError("no backoff drawn")
        self.residual_slots = max(0, self.residual_slots - n)
        return self.residual_slots == 0

    def on_success(self) -> None:
        self.cw = self.cwmin
        self.residual_slots = None

    def on_failure(self) -> None:
        self.cw = min(2 * (self.cw + 1) - 1, self.cwmax)
        self.residual_slots = None


def micro_stage(counts: Sequence[int], n_prior_failures: int) -> int | None:
    """Retry-chain stage for the next attempt after some failures.

    Stage s hosts counts[s] attempts; once every stage is exhausted the
    MPDU is dropped and None comes back.
    """
    if n_prior_failures < 0:
        raise ValueError("failure count cannot be negative")
    edge = 0
    for stage, c in enumerate(counts):
        edge += c
        if n_prior_failures < edge:
            return stage
    return None


@dataclass
class AmrrConfig:
    """Rate adaptation knobs.

    ladder orders the usable rates from most robust to fastest; entries are
    opaque references (MCS indices in practice). Watermarks bound the
    failed/successful attempt ratio for the interval decision.
    """

    ladder: tuple
    counts: tuple[int, int, int, int] = (3, 3, 1, 3)
    low_watermark: float = 0.10
    high_watermark: float = 0.33
    success_threshold: int = 10
    threshold_cap: int = 160
    update_interval_ms: float = 25.0

    def __post_init__(self):
        if len(self.ladder) < 1:
            raise ValueError("empty rate ladder")
        if len(self.counts) != 4 or any(c < 1 for c in self.counts):
            raise ValueError("counts must be four positive attempt budgets")


@dataclass
class AmrrState:
    """Two-speed rate control.

    The retry chain reacts per frame: attempts step through
    (r0,c0)..(r3,c3) with r1/r2 one and two ladder steps below r0 and r3
    pinned at the minimum; after sum(counts) failures the MPDU is dropped.
    The interval decision reacts to statistics: every attempt outcome feeds
    the failed/successful counters, and at interval close the first-try
    rate moves up (ratio under the low watermark with enough successes for
    the ratio to mean anything), down (over the high watermark), or stays.
    Each increase is probed by its first frame; a failed probe reverts the
    rate and doubles the success threshold up to a cap, a passed probe
    re-arms the threshold at its configured floor.
    """

    config: AmrrConfig
    position: int = 0
    successes: int = 0
    failures: int = 0
    probing: bool = False
    success_threshold: int = field(default=0)
    _revert_position: int = field(default=0, repr=False)

    def __post_init__(self):
        if not 0 <= self.position < len(self.config.ladder):
            raise ValueError("initial position outside the ladder")
        if self.success_threshold <= 0:
            self.success_threshold = self.config.success_threshold

    @property
    def rate(self):
        return self.config.ladder[self.position]

    def chain_positions(self) -> tuple[int, int, int, int]:
        return (
            self.position,
            max(self.position - 1, 0),
            max(self.position - 2, 0),
            0,
        )

    def chain(self) -> tuple[tuple[object, int], ...]:
        """The (rate, attempts) pairs loaded for the retry hardware."""
        return tuple(
            (self.config.ladder[p], c)
            for p, c in zip(self.chain_positions(), self.config.counts)
        )

    def rate_for_failures(self, n_prior_failures: int):
        """Rate of the next attempt, or None when the MPDU must be dropped."""
        stage = micro_stage(self.config.counts, n_prior_failures)
        if stage is None:
            return None
        return self.config.ladder[self.chain_positions()[stage]]

    @property
    def attempts_until_drop(self) -> int:
        return sum(self.config.counts)

    def on_attempt_result(self, acked: bool) -> None:
        """Record one transmission attempt; resolves a pending probe."""
        if self.probing:
            self.probing = False
            if acked:
                self.success_threshold = self.config.success_threshold
            else:
                self.position = self._revert_position
                self.success_threshold = min(
                    2 * self.success_threshold, self.config.threshold_cap
                )
        if acked:
            self.successes += 1
        else:
            self.failures += 1

    def on_interval_close(self) -> str:
        """Apply the interval decision and reset the counters."""
        action = "hold"
        if self.successes == 0:
            ratio = math.inf if self.failures else None
        else:
            ratio = self.failures / self.successes
        if (
            ratio is not None
            and ratio < self.config.low_watermark
            and self.successes >= self.success_threshold
            and self.position < len(self.config.ladder) - 1
        ):
            self._revert_position = self.position
            self.position += 1
            self.probing = True
            action = "increase"
        elif ratio is not None and ratio > self.config.high_watermark and self.position > 0:
            self.position -= 1
            self.probing = False
            action = "decrease"
        self.successes = 0
        self.failures = 0
        return action


@dataclass
class NavState:
    """Virtual carrier sense: medium reserved until the latest NAV expiry."""

    expiry_us: float = 0.0

    def update(self, until_us: float) -> None:
        self.expiry_us = max(self.expiry_us, until_us)

    def busy(self, now_us: float) -> bool:
        return now_us < self.expiry_us


def multichannel_grant(
    idle_since_us: Sequence[float | None],
    now_us: float,
    timing: TimingParams | None = None,
    widths: Sequence[int] = (80, 40, 20),
) -> int:
    """Usable bandwidth once the primary is won.

    idle_since_us lists, per 20 MHz subchannel starting at the primary,
    when the channel last went idle (None while busy). The widest
    configured width whose secondaries have all been idle for at least a
    PIFS wins; otherwise fall back to the next width down. The primary
    itself was cleared by the EDCA grant and is not re-checked.
    """
    timing = timing or TimingParams()
    for width in sorted(widths, reverse=True):
        needed = width // 20
        if needed > len(idle_since_us):
            continue
        secondaries = idle_since_us[1:needed]
        if all(
            t is not None and now_us - t >= timing.pifs_us for t in secondaries
        ):
            return width
    return min(widths)


@dataclass
class CsiSnapshot:
    """What the AP keeps per beamformee after a sounding exchange."""

    v_matrix: object
    timestamp_us: float
    stale: bool = False


@dataclass
class StationMacState:
    """Mutable per-station MAC bookkeeping the engine drives."""

    station_id: int
    contender: EdcaContender
    amrr: AmrrState | None = None
    nav: NavState = field(default_factory=NavState)
    queue: list = field(default_factory=list)
    retry_counts: dict = field(default_factory=dict)  # mpdu id -> failures so far
    csi_cache: dict = field(default_factory=dict)  # peer id -> CsiSnapshot
    association_id: int = 0
    group_memberships: dict = field(default_factory=dict)  # group id -> member order
