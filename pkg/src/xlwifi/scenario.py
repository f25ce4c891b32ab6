"""Scenario configuration: typed dataclasses plus a flat text format.

A scenario file is a sequence of ``section.key = value`` lines. ``#``
starts a comment, blank lines are skipped, and values are typed by shape:
``true``/``false`` become booleans, digit strings integers, anything
float() accepts (including ``inf``) floats, comma-separated values tuples,
and the rest plain strings. Station and app sections are numbered
(``station1``, ``app2``). Every scenario carries an explicit seed; there
is no silent default.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields

from .errors import ConfigError

SCHEMES = ("su_bf", "mu_cti", "mu_no_cti")
LINK_MODES = ("fine", "lut", "hybrid")
STANDARDS = ("a", "g", "n", "ac", "ah")
DIRECTIONS = ("down", "up")
AGGREGATION_SCHEMES = ("vertical", "horizontal")
ACK_SCHEMES = ("normal", "short", "ultra")


def _parse_scalar(token: str):
    text = token.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        return text
    if value != value:  # NaN never appears in a valid scenario
        return text
    return value


def _format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ", ".join(_format_scalar(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_text(text: str) -> dict[str, dict[str, object]]:
    """Parse scenario text into a {section: {key: value}} mapping."""
    mapping: dict[str, dict[str, object]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'section.key = value', got {raw!r}")
        name, value = line.split("=", 1)
        name = name.strip()
        if "." not in name:
            raise ConfigError(name or f"line {lineno}", "key must be written as section.key")
        section, key = name.split(".", 1)
        if not section or not key:
            raise ConfigError(name, "key must be written as section.key")
        if "," in value:
            parsed: object = tuple(_parse_scalar(v) for v in value.split(","))
        else:
            parsed = _parse_scalar(value)
        bucket = mapping.setdefault(section, {})
        if key in bucket:
            raise ConfigError(f"{section}.{key}", "duplicate key")
        bucket[key] = parsed
    return mapping


def _section_order(section: str) -> tuple:
    m = re.fullmatch(r"([a-z_]+)(\d+)", section)
    if m:
        return (m.group(1), int(m.group(2)))
    return (section, 0)


def serialize_mapping(mapping: dict[str, dict[str, object]]) -> str:
    lines = []
    for section in sorted(mapping, key=_section_order):
        for key in sorted(mapping[section]):
            lines.append(f"{section}.{key} = {_format_scalar(mapping[section][key])}")
        lines.append("")
    return "\n".join(lines)


@dataclass(frozen=True)
class StationConfig:
    """One station; distance is a signed coordinate on the AP's axis so
    stations can sit on opposite sides of the AP."""

    distance_m: float
    antennas: int = 1
    mobility_step_m: float = 0.0
    mobility_period_s: float = 2.0


@dataclass(frozen=True)
class AppConfig:
    """Constant-bit-rate flow; stop_s = -1 runs to the end of the scenario."""

    station: int
    rate_mbps: float
    direction: str = "down"
    msdu_octets: int = 1500
    start_s: float = 0.0
    stop_s: float = -1.0

    @property
    def interarrival_us(self) -> float:
        return 8.0 * self.msdu_octets / self.rate_mbps


@dataclass
class ScenarioConfig:
    seed: int
    duration_s: float = 1.0
    standard: str = "ac"
    bandwidth_mhz: int = 20
    gi: str = "long"
    link_mode: str = "hybrid"
    scheme: str = "su_bf"
    ap_antennas: int = 1
    # channel
    rms_delay_ns: float = 30.0
    coherence_ms: float = 30.0  # inf freezes the fading process
    inter_user_correlation: float = 0.0
    n_subcarriers: int = 8
    reseed_per_txop: bool = False
    # mac
    ac: str = "BE"
    max_aggregation: int = 64
    txop_limit_us: float = -1.0  # -1 uses the EDCA default of the AC
    sounding_interval_ms: float = 0.0  # 0 disables sounding
    amrr: bool = True
    amrr_counts: tuple = (3, 3, 1, 3)
    amrr_interval_ms: float = 25.0
    fixed_mcs: int = 0  # first-try MCS while amrr is off
    aggregation_scheme: str = "vertical"
    b_blocks: int = 1
    n_channels: int = 0  # 0 derives bandwidth/20
    ack_scheme: str = "normal"
    # external interferer knob
    collision_probability: float = 0.0
    collision_sir_low_db: float = 0.0
    collision_sir_high_db: float = 6.0
    collision_burst_us: float = 300.0
    stations: dict = field(default_factory=dict)  # id -> StationConfig
    apps: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_channels == 0:
            self.n_channels = max(1, self.bandwidth_mhz // 20)
        _validate(self)


_GENERAL_KEYS = {
    "seed", "duration_s", "standard", "bandwidth_mhz", "gi", "link_mode", "scheme",
}
_CHANNEL_KEYS = {
    "rms_delay_ns", "coherence_ms", "inter_user_correlation", "n_subcarriers",
    "reseed_per_txop",
}
_MAC_KEYS = {
    "ac", "max_aggregation", "txop_limit_us", "sounding_interval_ms", "amrr",
    "amrr_counts", "amrr_interval_ms", "fixed_mcs", "aggregation_scheme",
    "b_blocks", "n_channels", "ack_scheme",
}
_COLLISION_KEYS = {"probability", "sir_low_db", "sir_high_db", "burst_us"}
_STATION_KEYS = {f.name for f in fields(StationConfig)}
_APP_KEYS = {f.name for f in fields(AppConfig)}


def _take(section: str, data: dict, allowed: set) -> dict:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{section}.{key}", "unknown key")
    return dict(data)


def _coerce(path: str, value, kind):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    return value


def config_from_mapping(mapping: dict[str, dict[str, object]]) -> ScenarioConfig:
    mapping = {s: dict(kv) for s, kv in mapping.items()}
    general = _take("general", mapping.pop("general", {}), _GENERAL_KEYS)
    if "seed" not in general:
        raise ConfigError("general.seed", "a scenario must pin its seed")
    ap = _take("ap", mapping.pop("ap", {}), {"antennas"})
    chan = _take("channel", mapping.pop("channel", {}), _CHANNEL_KEYS)
    mac = _take("mac", mapping.pop("mac", {}), _MAC_KEYS)
    coll = _take("collision", mapping.pop("collision", {}), _COLLISION_KEYS)

    stations: dict[int, StationConfig] = {}
    apps: list[tuple[int, AppConfig]] = []
    for section in sorted(mapping, key=_section_order):
        m = re.fullmatch(r"(station|app)(\d+)", section)
        if not m:
            raise ConfigError(section, "unknown section")
        kind, num = m.group(1), int(m.group(2))
        data = mapping[section]
        if kind == "station":
            _take(section, data, _STATION_KEYS)
            if "distance_m" not in data:
                raise ConfigError(f"{section}.distance_m", "required")
            kwargs = {
                "distance_m": _coerce(f"{section}.distance_m", data["distance_m"], float),
                "antennas": _coerce(f"{section}.antennas", data.get("antennas", 1), int),
                "mobility_step_m": _coerce(
                    f"{section}.mobility_step_m", data.get("mobility_step_m", 0.0), float
                ),
                "mobility_period_s": _coerce(
                    f"{section}.mobility_period_s", data.get("mobility_period_s", 2.0), float
                ),
            }
            stations[num] = StationConfig(**kwargs)
        else:
            _take(section, data, _APP_KEYS)
            for required in ("station", "rate_mbps"):
                if required not in data:
                    raise ConfigError(f"{section}.{required}", "required")
            apps.append((num, AppConfig(
                station=_coerce(f"{section}.station", data["station"], int),
                rate_mbps=_coerce(f"{section}.rate_mbps", data["rate_mbps"], float),
                direction=data.get("direction", "down"),
                msdu_octets=_coerce(f"{section}.msdu_octets", data.get("msdu_octets", 1500), int),
                start_s=_coerce(f"{section}.start_s", data.get("start_s", 0.0), float),
                stop_s=_coerce(f"{section}.stop_s", data.get("stop_s", -1.0), float),
            )))

    kwargs = dict(
        seed=_coerce("general.seed", general["seed"], int),
        duration_s=_coerce("general.duration_s", general.get("duration_s", 1.0), float),
        standard=general.get("standard", "ac"),
        bandwidth_mhz=_coerce("general.bandwidth_mhz", general.get("bandwidth_mhz", 20), int),
        gi=general.get("gi", "long"),
        link_mode=general.get("link_mode", "hybrid"),
        scheme=general.get("scheme", "su_bf"),
        ap_antennas=_coerce("ap.antennas", ap.get("antennas", 1), int),
        rms_delay_ns=_coerce("channel.rms_delay_ns", chan.get("rms_delay_ns", 30.0), float),
        coherence_ms=_coerce("channel.coherence_ms", chan.get("coherence_ms", 30.0), float),
        inter_user_correlation=_coerce(
            "channel.inter_user_correlation", chan.get("inter_user_correlation", 0.0), float
        ),
        n_subcarriers=_coerce("channel.n_subcarriers", chan.get("n_subcarriers", 8), int),
        reseed_per_txop=_coerce("channel.reseed_per_txop", chan.get("reseed_per_txop", False), bool),
        ac=mac.get("ac", "BE"),
        max_aggregation=_coerce("mac.max_aggregation", mac.get("max_aggregation", 64), int),
        txop_limit_us=_coerce("mac.txop_limit_us", mac.get("txop_limit_us", -1.0), float),
        sounding_interval_ms=_coerce(
            "mac.sounding_interval_ms", mac.get("sounding_interval_ms", 0.0), float
        ),
        amrr=_coerce("mac.amrr", mac.get("amrr", True), bool),
        amrr_counts=mac.get("amrr_counts", (3, 3, 1, 3)),
        amrr_interval_ms=_coerce("mac.amrr_interval_ms", mac.get("amrr_interval_ms", 25.0), float),
        fixed_mcs=_coerce("mac.fixed_mcs", mac.get("fixed_mcs", 0), int),
        aggregation_scheme=mac.get("aggregation_scheme", "vertical"),
        b_blocks=_coerce("mac.b_blocks", mac.get("b_blocks", 1), int),
        n_channels=_coerce("mac.n_channels", mac.get("n_channels", 0), int),
        ack_scheme=mac.get("ack_scheme", "normal"),
        collision_probability=_coerce(
            "collision.probability", coll.get("probability", 0.0), float
        ),
        collision_sir_low_db=_coerce("collision.sir_low_db", coll.get("sir_low_db", 0.0), float),
        collision_sir_high_db=_coerce("collision.sir_high_db", coll.get("sir_high_db", 6.0), float),
        collision_burst_us=_coerce("collision.burst_us", coll.get("burst_us", 300.0), float),
        stations=stations,
        apps=[a for _, a in apps],
    )
    return ScenarioConfig(**kwargs)


def _validate(cfg: ScenarioConfig) -> None:
    if cfg.seed < 0:
        raise ConfigError("general.seed", "seed must be >= 0")
    if cfg.duration_s <= 0:
        raise ConfigError("general.duration_s", "duration must be positive")
    if cfg.standard not in STANDARDS:
        raise ConfigError("general.standard", f"unknown standard {cfg.standard!r}")
    if cfg.scheme not in SCHEMES:
        raise ConfigError("general.scheme", f"scheme must be one of {SCHEMES}")
    if cfg.link_mode not in LINK_MODES:
        raise ConfigError("general.link_mode", f"link_mode must be one of {LINK_MODES}")
    if cfg.gi not in ("long", "short"):
        raise ConfigError("general.gi", "gi must be long or short")
    if cfg.ap_antennas < 1:
        raise ConfigError("ap.antennas", "the AP needs at least one antenna")
    if not 0.0 <= cfg.inter_user_correlation <= 1.0:
        raise ConfigError("channel.inter_user_correlation", "correlation lies in [0, 1]")
    if cfg.n_subcarriers < 1:
        raise ConfigError("channel.n_subcarriers", "need at least one subcarrier")
    if cfg.coherence_ms <= 0:
        raise ConfigError("channel.coherence_ms", "coherence must be positive (inf freezes)")
    if cfg.max_aggregation < 1:
        raise ConfigError("mac.max_aggregation", "aggregation limit must be >= 1")
    if len(cfg.amrr_counts) != 4 or any(
        isinstance(c, bool) or not isinstance(c, int) or c < 1 for c in cfg.amrr_counts
    ):
        raise ConfigError("mac.amrr_counts", "expected four positive attempt counts")
    if cfg.amrr_interval_ms <= 0:
        raise ConfigError("mac.amrr_interval_ms", "interval must be positive")
    if cfg.sounding_interval_ms < 0:
        raise ConfigError("mac.sounding_interval_ms", "interval cannot be negative")
    if cfg.aggregation_scheme not in AGGREGATION_SCHEMES:
        raise ConfigError("mac.aggregation_scheme", f"must be one of {AGGREGATION_SCHEMES}")
    if cfg.aggregation_scheme == "vertical" and cfg.b_blocks != 1:
        raise ConfigError("mac.b_blocks", "vertical aggregation is a single block")
    if cfg.b_blocks < 1 or cfg.n_channels % cfg.b_blocks != 0:
        raise ConfigError("mac.b_blocks", f"{cfg.b_blocks} blocks do not tile {cfg.n_channels} channels")
    if cfg.ack_scheme not in ACK_SCHEMES:
        raise ConfigError("mac.ack_scheme", f"must be one of {ACK_SCHEMES}")
    if cfg.ack_scheme != "normal" and cfg.standard != "ah":
        raise ConfigError("mac.ack_scheme", "shortened ACKs only exist for 802.11ah")
    if not 0.0 <= cfg.collision_probability <= 1.0:
        raise ConfigError("collision.probability", "probability lies in [0, 1]")
    if cfg.collision_sir_high_db < cfg.collision_sir_low_db:
        raise ConfigError("collision.sir_high_db", "high bound undercuts the low bound")
    if cfg.collision_burst_us <= 0:
        raise ConfigError("collision.burst_us", "burst must be positive")
    for sid, st in cfg.stations.items():
        if st.distance_m == 0.0:
            raise ConfigError(f"station{sid}.distance_m", "station cannot sit on the AP")
        if st.antennas < 1:
            raise ConfigError(f"station{sid}.antennas", "need at least one antenna")
        if st.mobility_period_s <= 0:
            raise ConfigError(f"station{sid}.mobility_period_s", "period must be positive")
    for i, app in enumerate(cfg.apps, start=1):
        if app.station not in cfg.stations:
            raise ConfigError(f"app{i}.station", f"station {app.station} is not defined")
        if app.direction not in DIRECTIONS:
            raise ConfigError(f"app{i}.direction", f"direction must be one of {DIRECTIONS}")
        if app.rate_mbps <= 0:
            raise ConfigError(f"app{i}.rate_mbps", "rate must be positive")
        if app.msdu_octets < 1:
            raise ConfigError(f"app{i}.msdu_octets", "MSDU must be at least one octet")
        if app.start_s < 0:
            raise ConfigError(f"app{i}.start_s", "start cannot be negative")
    if cfg.scheme.startswith("mu"):
        downlink = {a.station for a in cfg.apps if a.direction == "down"}
        if len(downlink) < 2:
            raise ConfigError("general.scheme", "multi-user schemes need two downlink stations")


def config_to_mapping(cfg: ScenarioConfig) -> dict[str, dict[str, object]]:
    mapping: dict[str, dict[str, object]] = {
        "general": {
            "seed": cfg.seed,
            "duration_s": cfg.duration_s,
            "standard": cfg.standard,
            "bandwidth_mhz": cfg.bandwidth_mhz,
            "gi": cfg.gi,
            "link_mode": cfg.link_mode,
            "scheme": cfg.scheme,
        },
        "ap": {"antennas": cfg.ap_antennas},
        "channel": {
            "rms_delay_ns": cfg.rms_delay_ns,
            "coherence_ms": cfg.coherence_ms,
            "inter_user_correlation": cfg.inter_user_correlation,
            "n_subcarriers": cfg.n_subcarriers,
            "reseed_per_txop": cfg.reseed_per_txop,
        },
        "mac": {
            "ac": cfg.ac,
            "max_aggregation": cfg.max_aggregation,
            "txop_limit_us": cfg.txop_limit_us,
            "sounding_interval_ms": cfg.sounding_interval_ms,
            "amrr": cfg.amrr,
            "amrr_counts": tuple(cfg.amrr_counts),
            "amrr_interval_ms": cfg.amrr_interval_ms,
            "fixed_mcs": cfg.fixed_mcs,
            "aggregation_scheme": cfg.aggregation_scheme,
            "b_blocks": cfg.b_blocks,
            "n_channels": cfg.n_channels,
            "ack_scheme": cfg.ack_scheme,
        },
        "collision": {
            "probability": cfg.collision_probability,
            "sir_low_db": cfg.collision_sir_low_db,
            "sir_high_db": cfg.collision_sir_high_db,
            "burst_us": cfg.collision_burst_us,
        },
    }
    for sid in sorted(cfg.stations):
        st = cfg.stations[sid]
        mapping[f"station{sid}"] = {
            "distance_m": st.distance_m,
            "antennas": st.antennas,
            "mobility_step_m": st.mobility_step_m,
            "mobility_period_s": st.mobility_period_s,
        }
    for i, app in enumerate(cfg.apps, start=1):
        mapping[f"app{i}"] = {
            "station": app.station,
            "rate_mbps": app.rate_mbps,
            "direction": app.direction,
            "msdu_octets": app.msdu_octets,
            "start_s": app.start_s,
            "stop_s": app.stop_s,
        }
    return mapping


def loads(text: str) -> ScenarioConfig:
    return config_from_mapping(parse_text(text))


def dumps(cfg: ScenarioConfig) -> str:
    return serialize_mapping(config_to_mapping(cfg))


def load(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())
