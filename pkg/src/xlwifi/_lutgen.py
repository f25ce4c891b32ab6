"""Generator for the bundled PER lookup tables.

PER curves come from the textbook AWGN per-bit error approximation for
Gray-coded square QAM plus a fixed effective coding gain per convolutional
rate, evaluated at a 1000-octet reference length. The real tables behind the
original experiments were produced by offline link-level simulation and never
published; these stand-ins only promise the directional properties the tests
rely on (monotone in SNR, ordered by MCS robustness, plausible waterfall
positions).

Run `python -m xlwifi._lutgen` to regenerate; output is deterministic and
must match the committed checksum.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

SNR_MIN_DB = -5.0
SNR_MAX_DB = 40.0
SNR_STEP_DB = 0.5
REF_OCTETS = 1000
PER_FLOOR = 1e-6

# family -> (modulation bits, coding gain dB). Ordered most to least robust.
# rep2 is BPSK 1/2 with 2x time repetition (3 dB combining); header is the
# PLCP signaling field, BPSK 1/2 with a 2 dB robustness margin.
FAMILIES: dict[str, tuple[int, float]] = {
    "header": (1, 8.0),
    "bpsk_rep2": (1, 9.0),
    "bpsk_12": (1, 6.0),
    "qpsk_12": (2, 6.0),
    "qpsk_34": (2, 4.5),
    "qam16_12": (4, 6.0),
    "qam16_34": (4, 4.5),
    "qam64_23": (6, 5.0),
    "qam64_34": (6, 4.5),
    "qam64_56": (6, 4.0),
    "qam256_34": (8, 4.5),
    "qam256_56": (8, 4.0),
}


def _q(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def bit_error_rate(mod_bits: int, snr_db: float) -> float:
    """Per-bit error probability at a given per-symbol SNR."""
    snr = 10.0 ** (snr_db / 10.0)
    if mod_bits == 1:
        return _q(math.sqrt(2.0 * snr))
    m = 2**mod_bits
    return (4.0 / mod_bits) * (1.0 - 1.0 / math.sqrt(m)) * _q(math.sqrt(3.0 * snr / (m - 1)))


def per_reference(family: str, snr_db: float) -> float:
    """PER at the 1000-octet reference length, floored and capped."""
    mod_bits, gain_db = FAMILIES[family]
    ber = bit_error_rate(mod_bits, snr_db + gain_db)
    per = 1.0 - (1.0 - ber) ** (8 * REF_OCTETS)
    return min(1.0, max(per, PER_FLOOR))


def generate_csv_text() -> str:
    lines = ["mcs_id,snr_db,per"]
    n = int(round((SNR_MAX_DB - SNR_MIN_DB) / SNR_STEP_DB)) + 1
    for family in FAMILIES:
        for i in range(n):
            snr = SNR_MIN_DB + i * SNR_STEP_DB
            lines.append(f"{family},{snr:.1f},{per_reference(family, snr):.6e}")
    return "\n".join(lines) + "\n"


def write_lut(data_dir: Path) -> Path:
    data_dir.mkdir(parents=True, exist_ok=True)
    out = data_dir / "per_lut.csv"
    text = generate_csv_text()
    out.write_text(text, encoding="ascii")
    digest = hashlib.sha256(text.encode("ascii")).hexdigest()
    (data_dir / "per_lut.csv.sha256").write_text(f"{digest}  per_lut.csv\n", encoding="ascii")
    return out


if __name__ == "__main__":
    target = Path(__file__).resolve().parent / "data"
    path = write_lut(target)
    print(f"wrote {path}")
