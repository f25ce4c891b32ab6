"""Link abstraction: SINR in, per-MPDU error probabilities and collision
verdicts out.

Data-plane error behaviour comes from a frozen PER lookup table (see
_lutgen for its provenance); collisions, ADC capture and the multichannel
collision probability are closed-form rules layered on top.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from . import _lutgen
from .errors import UndefinedMcs
from .rates import _LEGACY_CODING, _MCS_CODING, _resolve_n

REF_OCTETS = _lutgen.REF_OCTETS
PER_FLOOR = _lutgen.PER_FLOOR

# (modulation bits, code rate) -> LUT family name
_FAMILY_BY_CODING = {
    (1, (1, 2)): "bpsk_12",
    (2, (1, 2)): "qpsk_12",
    (2, (3, 4)): "qpsk_34",
    (4, (1, 2)): "qam16_12",
    (4, (3, 4)): "qam16_34",
    (6, (2, 3)): "qam64_23",
    (6, (3, 4)): "qam64_34",
    (6, (5, 6)): "qam64_56",
    (8, (3, 4)): "qam256_34",
    (8, (5, 6)): "qam256_56",
}

HEADER_FAMILY = "header"


def mcs_family(standard: str, index: int, n_ss: int | None = None) -> str:
    """LUT family for an MCS; bandwidth does not matter in the PER model."""
    if standard in ("a", "g"):
        if not 0 <= index < len(_LEGACY_CODING):
            raise UndefinedMcs(f"802.11{standard} rate index {index}")
        mod_bits, code = _LEGACY_CODING[index]
    elif standard == "n":
        per_stream, _ = _resolve_n(index, n_ss)
        mod_bits, code = _MCS_CODING[per_stream]
    elif standard in ("ac", "ah"):
        if standard == "ah" and index == -1:
            return "bpsk_rep2"
        if not 0 <= index <= 9:
            raise UndefinedMcs(f"802.11{standard} MCS {index}")
        mod_bits, code = _MCS_CODING[index]
    else:
        raise UndefinedMcs(f"unknown standard {standard!r}")
    return _FAMILY_BY_CODING[(mod_bits, (code.numerator, code.denominator))]


class PerLut:
    """PER table on a uniform SNR grid per MCS family, with the reference
    length baked in. Lookups interpolate log10(PER) between grid points;
    below the grid the PER is 1, above it the floor applies."""

    def __init__(self, rows: list[tuple[str, float, float]]):
        by_family: dict[str, list[tuple[float, float]]] = {}
        for family, snr, per in rows:
            by_family.setdefault(family, []).append((snr, per))
        self._tables: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for family, pts in by_family.items():
            pts.sort()
            snrs = np.array([p[0] for p in pts])
            pers = np.array([p[1] for p in pts])
            if np.any(np.diff(pers) > 1e-12):
                raise ValueError(f"PER not monotone in SNR for {family}")
            self._tables[family] = (snrs, pers)

    @property
    def families(self) -> tuple[str, ...]:
        return tuple(self._tables)

    def per_reference(self, family: str, snr_db: float) -> float:
        try:
            snrs, pers = self._tables[family]
        except KeyError:
            raise UndefinedMcs(f"no PER table for MCS family {family!r}") from None
        if snr_db < snrs[0]:
            return 1.0
        if snr_db >= snrs[-1]:
            return float(pers[-1])
        log_per = np.interp(snr_db, snrs, np.log10(pers))
        return float(10.0**log_per)

    def mpdu_error_prob(self, sinr_db: float, family: str, mpdu_octets: int) -> float:
        if mpdu_octets < 1:
            raise ValueError("mpdu_octets must be >= 1")
        p_ref = self.per_reference(family, sinr_db)
        p = 1.0 - (1.0 - p_ref) ** (mpdu_octets / REF_OCTETS)
        return min(1.0, max(0.0, p))


def _load_packaged_lut() -> PerLut:
    data = resources.files("xlwifi").joinpath("data")
    text = data.joinpath("per_lut.csv").read_text(encoding="ascii")
    want = data.joinpath("per_lut.csv.sha256").read_text(encoding="ascii").split()[0]
    got = hashlib.sha256(text.encode("ascii")).hexdigest()
    if got != want:
        raise ValueError(f"per_lut.csv checksum mismatch: {got} != {want}")
    rows = []
    for rec in csv.DictReader(text.splitlines()):
        rows.append((rec["mcs_id"], float(rec["snr_db"]), float(rec["per"])))
    return PerLut(rows)


@lru_cache(maxsize=1)
def default_lut() -> PerLut:
    return _load_packaged_lut()


def mpdu_error_prob(sinr_db: float, family: str, mpdu_octets: int) -> float:
    return default_lut().mpdu_error_prob(sinr_db, family, mpdu_octets)


def adc_capped_snr(snr_max_db: float, sir_db: float, beta_over_alpha: float) -> float:
    """Effective SNR when an interferer present at AGC time compresses the
    ADC range: SNR = SNR_max / (1 + (beta/alpha)/SIR), all in linear terms."""
    if beta_over_alpha < 0:
        raise ValueError("beta_over_alpha must be >= 0")
    if beta_over_alpha == 0:
        return snr_max_db
    snr_max = 10.0 ** (snr_max_db / 10.0)
    sir = 10.0 ** (sir_db / 10.0)
    return 10.0 * math.log10(snr_max / (1.0 + beta_over_alpha / sir))


def collision_probability(p_per_channel: float, n_channels: int) -> float:
    """Chance that at least one of n independent channels takes a hit."""
    if not 0.0 <= p_per_channel <= 1.0:
        raise ValueError("p_per_channel must be in [0, 1]")
    if n_channels < 1:
        raise ValueError("n_channels must be >= 1")
    return 1.0 - (1.0 - p_per_channel) ** n_channels


def combined_sinr_db(snr_db: float, sir_db: float) -> float:
    """Interference adds to noise: 1/sinr = 1/snr + 1/sir (linear)."""
    snr = 10.0 ** (snr_db / 10.0)
    sir = 10.0 ** (sir_db / 10.0)
    return 10.0 * math.log10(1.0 / (1.0 / snr + 1.0 / sir))


def diversity_bonus_db(block_span_channels: int, total_channels: int, cap_db: float = 1.0) -> float:
    """Effective-SNR credit for interleaving across a wider band. Scales with
    the fraction of the full bond the block spans, reaching cap_db for a
    full-width (classical vertical) aggregate."""
    if block_span_channels < 1 or total_channels < 1:
        raise ValueError("channel counts must be >= 1")
    if total_channels == 1 or block_span_channels == 1:
        return 0.0
    return cap_db * math.log(block_span_channels) / math.log(total_channels)


# AGC capture thresholds (interferer power relative to the locked-on signal).
SATURATION_DB = 0.0
RECOVERABLE_DB = -3.0


@dataclass(frozen=True)
class CollisionSpec:
    """One interfering burst against a victim frame. Times are relative to
    the victim frame's start; channels are the hit 20 MHz channel ids."""

    overlap_start_us: float
    overlap_end_us: float
    sir_db: float
    channels: frozenset[int] = field(default_factory=frozenset)
    hits_header: bool = False
    beta_over_alpha: float = 1.0


@dataclass(frozen=True)
class CollisionVerdict:
    saturated: bool  # ADC capture: the whole frame is lost
    header_sinr_db: float  # SINR at which to draw PLCP header success
    base_sinr_db: float  # SINR away from the burst (clean or AGC-capped)
    block_sinr_db: tuple[float, ...]  # effective SINR inside the burst, per block
    overlap_fraction: float  # fraction of the payload duration overlapped


def apply_collision(
    block_channels: tuple[tuple[int, ...], ...],
    clean_sinr_db: float,
    frame_duration_us: float,
    header_duration_us: float,
    spec: CollisionSpec | None,
    rng: np.random.Generator | None = None,
) -> CollisionVerdict:
    """Resolve an interfering burst into per-block effective SINRs.

    The rules, in precedence order: an interferer at or above the signal
    level during the payload saturates the ADC and kills the frame (between
    the recoverable and saturation thresholds the loss is a Bernoulli draw
    on a linear ramp); an interferer already present at frame start caps the
    SNR through the AGC scaling rule; otherwise only blocks sharing channels
    with the burst see their SINR degraded, and only for the overlapped
    stretch.
    """
    n_blocks = len(block_channels)
    if spec is None:
        return CollisionVerdict(False, clean_sinr_db, clean_sinr_db, (clean_sinr_db,) * n_blocks, 0.0)
    start = max(spec.overlap_start_us, 0.0)
    end = min(spec.overlap_end_us, frame_duration_us)
    if end <= start:
        return CollisionVerdict(False, clean_sinr_db, clean_sinr_db, (clean_sinr_db,) * n_blocks, 0.0)

    rel_power_db = -spec.sir_db  # interferer power relative to the signal
    payload_us = frame_duration_us - header_duration_us
    overlaps_payload = end > header_duration_us

    if overlaps_payload and spec.overlap_start_us > 0:
        # post-AGC arrival: capture effect decides the whole frame
        if rel_power_db >= SATURATION_DB:
            return CollisionVerdict(True, clean_sinr_db, clean_sinr_db, (clean_sinr_db,) * n_blocks, 1.0)
        if rel_power_db > RECOVERABLE_DB:
            p_loss = (rel_power_db - RECOVERABLE_DB) / (SATURATION_DB - RECOVERABLE_DB)
            if rng is not None and rng.random() < p_loss:
                return CollisionVerdict(True, clean_sinr_db, clean_sinr_db, (clean_sinr_db,) * n_blocks, 1.0)

    capped = clean_sinr_db
    if spec.overlap_start_us <= 0:
        # interferer present while the AGC locks on
        capped = adc_capped_snr(clean_sinr_db, spec.sir_db, spec.beta_over_alpha)

    header_sinr = capped
    if spec.hits_header and start < header_duration_us:
        header_sinr = combined_sinr_db(capped, spec.sir_db)

    overlap_payload_us = max(0.0, end - max(start, header_duration_us))
    frac = overlap_payload_us / payload_us if payload_us > 0 else 0.0
    degraded = combined_sinr_db(capped, spec.sir_db)
    blocks = []
    for chans in block_channels:
        hit = not spec.channels or bool(spec.channels.intersection(chans))
        blocks.append(degraded if (hit and frac > 0) else capped)
    return CollisionVerdict(False, header_sinr, capped, tuple(blocks), frac)
