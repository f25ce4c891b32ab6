"""Event-driven PHY+MAC simulation of one BSS.

Time advances on an integer-microsecond base through a (time, seq) heap;
durations are rounded half-up at frame boundaries. All randomness comes
from named PCG64 streams derived from the scenario seed (fading taps keep
their own per-pair streams inside the channel module), so the same
scenario text reproduces the metric log byte for byte.

Model boundaries, chosen so one TxOP is one unit of work:

- Contention is resolved per idle period, not per slot: every contender
  draws its backoff, the earliest candidate transmits, stations that can
  hear the winner freeze their residual, and stations that cannot (hidden
  nodes) start on their own schedule and overlap.
- Data frames take the fine path (fading channel, precoder, per-block
  SINR) in fine/hybrid mode and a flat pathloss-SNR lookup in lut mode;
  control and management frames always resolve through the PER table.
- Downlink spatial multiplexing sends one stream per user. Precoders are
  channel inversion on the quantized feedback rows captured at sounding
  time (the dominant singular direction per user); single-user
  beamforming uses the same feedback through an SVD precoder, and with
  sounding disabled the AP falls back to a single fixed antenna.
- Block ACKs are solicited per member; a horizontal aggregate answers
  with one BAR/BA round per extra block, which is the scheme's overhead.
"""

from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from . import link as lnk
from . import mac
from . import rates
from .errors import ConfigError, SchedulingFault, UndefinedMcs
from .precoding import (
    QUANT_BITS,
    PrecoderSet,
    evaluate_sinr,
    perturb_precoder,
    quantization_sigma,
    svd_su_precoder,
    zf_precoders,
)
from .scenario import ScenarioConfig

AP_ID = 0
SENSE_FLOOR_DBM = -82.0
WINDOW_US = 100_000
WINDOW_STEP_US = 10_000
BEACON_PERIOD_US = mac.BEACON_PERIOD_US

# named RNG stream ids; disjoint from the channel module's client indices
# (group users 0..7, uplink pairs 100+station id)
_STREAMS = {"backoff": 11, "traffic": 12, "link": 13, "collision": 14, "quantize": 15}
_DECORRELATE_US = 10**9
_UPLINK_CLIENT_BASE = 100


def _us(duration: float) -> int:
    """Round a duration in microseconds half-up to the integer grid."""
    return int(math.floor(duration + 0.5))


@dataclass
class MsduJob:
    msdu_octets: int
    mpdu_octets: int
    failures: int = 0


@dataclass
class _Node:
    node_id: int
    position_m: float
    antennas: int
    contender: mac.EdcaContender
    queues: dict = field(default_factory=dict)  # peer id -> deque[MsduJob]
    amrr: dict = field(default_factory=dict)  # peer id -> AmrrState | None
    rr_cycle: int = 0

    def queued(self) -> int:
        return sum(len(q) for q in self.queues.values())


@dataclass
class _MemberPlan:
    dst: int
    src: int
    mcs_index: int
    jobs: list
    layout: rates.AmpduLayout
    sinr_db: float
    fails: list
    collided: bool


@dataclass
class _TxPlan:
    src: int
    start_us: int
    air_end_us: int
    chain_end_us: int
    kind: str  # data | beacon | sounding
    members: list = field(default_factory=list)
    air_us: float = 0.0
    header_us: float = 0.0
    clean_sinrs: dict = field(default_factory=dict)  # dst -> pre-collision SINR


class MetricsLog:
    """Append-only metric rows plus the end-of-run summary.

    Rows render as ``time_s,station,direction,metric,value`` sorted by
    time with ties kept in insertion order, so a run's CSV is stable.
    """

    def __init__(self):
        self._rows: list[tuple[int, int, int, str, str, float]] = []
        self.summary: dict = {}

    def add(self, time_us: int, station: int, direction: str, metric: str, value: float) -> None:
        self._rows.append((time_us, len(self._rows), station, direction, metric, float(value)))

    def rows(self) -> list[tuple[float, int, str, str, float]]:
        out = []
        for time_us, _, station, direction, metric, value in sorted(self._rows)[: len(self._rows)]:
            out.append((time_us / 1e6, station, direction, metric, value))
        return out

    def csv_text(self) -> str:
        lines = ["time_s,station,direction,metric,value"]
        for t, station, direction, metric, value in self.rows():
            lines.append(f"{t:.6f},{station},{direction},{metric},{value:.6f}")
        return "\n".join(lines) + "\n"

    def json_text(self) -> str:
        return json.dumps(self.summary, sort_keys=True, indent=2) + "\n"

    def series(self, metric: str, station: int | None = None, direction: str | None = None):
        return [
            (t, v)
            for t, s, d, m, v in self.rows()
            if m == metric
            and (station is None or s == station)
            and (direction is None or d == direction)
        ]


@dataclass
class SimulationResult:
    config: ScenarioConfig
    log: MetricsLog

    @property
    def summary(self) -> dict:
        return self.log.summary

    def mean_throughput_mbps(self, station: int | None = None, direction: str | None = None) -> float:
        bits = 0
        for key, c in self.summary["flows"].items():
            sid, _, d = key.partition("/")
            if station is not None and int(sid) != station:
                continue
            if direction is not None and d != direction:
                continue
            bits += c["delivered_bits"]
        return bits / self.config.duration_s / 1e6

    def conservation_residues(self) -> dict[str, int]:
        out = {}
        for key, c in self.summary["flows"].items():
            out[key] = c["generated"] - (
                c["delivered"] + c["dropped"] + c["queued"] + c["in_flight"]
            )
        return out


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        if cfg.standard == "ah":
            raise ConfigError(
                "general.standard",
                "the event engine covers a/g/n/ac; sub-GHz capacity comes from the analytics module",
            )
        self.cfg = cfg
        self.now = 0
        self.end_us = _us(cfg.duration_s * 1e6)
        self._seq = 0
        self._heap: list = []
        self._busy_until = 0
        self._beacon_due = False
        self._sounding_due = False
        self._beacon_count = 0

        self._timing = rates.TimingParams()
        self._budget = chan.LinkBudget()
        self._rng = {
            name: np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, sid))))
            for name, sid in _STREAMS.items()
        }
        self._lut = lnk.default_lut()
        self._n_ss_arg = None if cfg.standard in ("a", "g") else 1
        self._ladder = self._rate_ladder()
        if not cfg.amrr and cfg.fixed_mcs not in self._ladder:
            raise ConfigError("mac.fixed_mcs", f"MCS {cfg.fixed_mcs} is not defined for this PHY")
        if cfg.scheme.startswith("mu") and cfg.sounding_interval_ms <= 0:
            raise ConfigError("mac.sounding_interval_ms", "multi-user schemes need sounding")

        self.nodes: dict[int, _Node] = {}
        self.nodes[AP_ID] = _Node(AP_ID, 0.0, cfg.ap_antennas, mac.EdcaContender(cfg.ac, self._timing))
        for sid in sorted(cfg.stations):
            st = cfg.stations[sid]
            self.nodes[sid] = _Node(sid, st.distance_m, st.antennas, mac.EdcaContender(cfg.ac, self._timing))

        self._group_ids = sorted(cfg.stations)
        max_rx = max((cfg.stations[s].antennas for s in self._group_ids), default=1)
        self._group = None
        if self._group_ids and cfg.link_mode in ("fine", "hybrid"):
            self._group = chan.UserGroupChannel(
                cfg.seed,
                n_users=len(self._group_ids),
                n_tx=cfg.ap_antennas,
                n_rx=max_rx,
                n_subcarriers=cfg.n_subcarriers,
                correlation=cfg.inter_user_correlation,
                rms_delay_ns=cfg.rms_delay_ns,
                coherence_ms=cfg.coherence_ms,
            )
        self._group_evolved_us = 0.0
        self._up_channels: dict[int, chan.ChannelState] = {}

        self._csi: dict[int, mac.CsiSnapshot] = {}
        self._mu_precoders: list[PrecoderSet] | None = None
        self._su_precoders: dict[int, list[PrecoderSet]] = {}
        self._sounding_count = 0
        self._collision_count = 0
        self._txop_count = 0

        txop_limit = cfg.txop_limit_us
        if txop_limit < 0:
            txop_limit = mac.EDCA_PARAMS[cfg.ac][3]
        self._txop_limit_us = txop_limit

        self.log = MetricsLog()
        self._flows: dict[tuple[int, str], dict] = {}
        self._ring: dict[tuple[int, str], deque] = {}
        self._ring_sum: dict[tuple[int, str], int] = {}
        for app in cfg.apps:
            key = (app.station, app.direction)
            self._flows.setdefault(
                key, {"generated": 0, "delivered": 0, "dropped": 0, "delivered_bits": 0}
            )
            self._ring.setdefault(key, deque())
            self._ring_sum.setdefault(key, 0)
        self._in_flight: dict[tuple[int, str], int] = {k: 0 for k in self._flows}
        self._arrival_next: list[float] = []

        for sid in self._group_ids:
            peer_amrr = self._make_amrr()
            self.nodes[AP_ID].queues[sid] = deque()
            self.nodes[AP_ID].amrr[sid] = peer_amrr
            self.nodes[sid].queues[AP_ID] = deque()
            self.nodes[sid].amrr[AP_ID] = self._make_amrr()

    # -- setup helpers -------------------------------------------------

    def _rate_ladder(self) -> tuple[int, ...]:
        ladder = []
        for idx in range(0, 10):
            try:
                rates.lookup_rate(self.cfg.standard, self.cfg.bandwidth_mhz, idx, self._n_ss_arg, self.cfg.gi)
            except UndefinedMcs:
                continue
            ladder.append(idx)
        return tuple(ladder)

    def _make_amrr(self) -> mac.AmrrState | None:
        if not self.cfg.amrr:
            return None
        config = mac.AmrrConfig(
            ladder=self._ladder,
            counts=tuple(self.cfg.amrr_counts),
            update_interval_ms=self.cfg.amrr_interval_ms,
        )
        # start optimistic: the ratio pulls an overambitious rate down far
        # faster than the gated increase path could ever climb
        return mac.AmrrState(config, position=len(self._ladder) - 1)

    def _schedule(self, t_us: int, kind: str, **data) -> None:
        if t_us < self.now:
            raise SchedulingFault(f"{kind} scheduled at {t_us} before now={self.now}")
        heapq.heappush(self._heap, (t_us, self._seq, kind, data))
        self._seq += 1

    # -- channel and link helpers --------------------------------------

    def _distance(self, a: int, b: int) -> float:
        d = abs(self.nodes[a].position_m - self.nodes[b].position_m)
        return max(d, 0.5)

    def _snr_db(self, a: int, b: int) -> float:
        return chan.snr_db(self._budget, self._distance(a, b), self.cfg.bandwidth_mhz)

    def _can_sense(self, listener: int, talker: int) -> bool:
        rx = chan.rx_power_dbm(self._budget, self._distance(listener, talker))
        return rx >= SENSE_FLOOR_DBM

    def _evolve_group(self, t_us: int) -> None:
        if self._group is None:
            return
        if self.cfg.reseed_per_txop:
            self._group.evolve(_DECORRELATE_US)
            return
        dt = t_us - self._group_evolved_us
        if dt > 0:
            self._group.evolve(dt)
            self._group_evolved_us = t_us
    def _uplink_channel(self, sid: int) -> chan.ChannelState:
        ch = self._up_channels.get(sid)
        if ch is None:
            ch = chan.ChannelState(
                self.cfg.seed,
                n_tx=self.nodes[sid].antennas,
                n_rx=self.cfg.ap_antennas,
                n_subcarriers=self.cfg.n_subcarriers,
                rms_delay_ns=self.cfg.rms_delay_ns,
                coherence_ms=self.cfg.coherence_ms,
                client_index=_UPLINK_CLIENT_BASE + sid,
            )
            self._up_channels[sid] = ch
        return ch

    def _group_row(self, sid: int) -> int:
        return self._group_ids.index(sid)

    def _feedback_rows(self, sid: int, sigma: float) -> np.ndarray:
        """Quantized one-stream feedback: per subcarrier the dominant right
        singular direction with the true gain, as a (1, n_tx) row."""
        H = self._group.user_matrices(self._group_row(sid))
        H = H[:, : self.nodes[sid].antennas, :]
        rows = np.empty((self.cfg.n_subcarriers, 1, self.cfg.ap_antennas), dtype=complex)
        rng = self._rng["quantize"]
        for k in range(self.cfg.n_subcarriers):
            u, s, vh = np.linalg.svd(H[k])
            direction = vh.conj().T[:, :1]
            q = perturb_precoder(direction, sigma, rng)
            rows[k] = s[0] * q.conj().T
        return rows

    def _fallback_pset(self) -> PrecoderSet:
        e0 = np.zeros((self.cfg.ap_antennas, 1), dtype=complex)
        e0[0, 0] = 1.0
        return PrecoderSet("fixed", (e0,), (float(self.cfg.ap_antennas),), 0.0)

    def _capture_csi(self, t_us: int) -> None:
        flavor = "mu" if self.cfg.scheme.startswith("mu") else "su"
        sigma = quantization_sigma(*QUANT_BITS[flavor])
        scaled: dict[int, np.ndarray] = {}
        for sid in self._group_ids:
            rows = self._feedback_rows(sid, sigma)
            rho = 10.0 ** (self._snr_db(AP_ID, sid) / 10.0)
            scaled[sid] = rows * math.sqrt(rho / self.cfg.ap_antennas)
            self._csi[sid] = mac.CsiSnapshot(v_matrix=rows, timestamp_us=float(t_us))
        if flavor == "mu":
            self._mu_precoders = [
                zf_precoders([scaled[sid][k] for sid in self._group_ids], snapshot_time_us=float(t_us))
                for k in range(self.cfg.n_subcarriers)
            ]
        else:
            for sid in self._group_ids:
                self._su_precoders[sid] = [
                    svd_su_precoder(scaled[sid][k], n_ss=1, snapshot_time_us=float(t_us))
                    for k in range(self.cfg.n_subcarriers)
                ]

    def _downlink_sinr(self, active: list[int]) -> dict[int, float]:
        """Mean per-user SINR of a downlink PPDU at the current channel."""
        cfg = self.cfg
        include_cti = cfg.scheme != "mu_no_cti"
        mu = cfg.scheme.startswith("mu")
        acc = {sid: 0.0 for sid in active}
        if cfg.link_mode == "lut" or self._group is None:
            return {sid: self._snr_db(AP_ID, sid) for sid in active}
        rho = {
            sid: 10.0 ** (self._snr_db(AP_ID, sid) / 10.0) / cfg.ap_antennas
            for sid in active
        }
        keep = [self._group_row(sid) for sid in active]
        for k in range(cfg.n_subcarriers):
            H_list = []
            for sid in active:
                H = self._group.user_matrices(self._group_row(sid))[k]
                H_list.append(H[: self.nodes[sid].antennas, :] * math.sqrt(rho[sid]))
            if mu:
                pset = self._mu_precoders[k]
                sub = PrecoderSet(
                    pset.scheme,
                    tuple(pset.bases[i] for i in keep),
                    tuple(pset.powers[i] for i in keep),
                    pset.csi_snapshot_time_us,
                )
                sinrs = evaluate_sinr(H_list, sub, 1.0, include_cti=include_cti)
            else:
                sid = active[0]
                psets = self._su_precoders.get(sid)
                pset = psets[k] if psets else self._fallback_pset()
                sinrs = evaluate_sinr(H_list, pset, 1.0)
            for sid, s in zip(active, sinrs):
                acc[sid] += 10.0 ** (s / 10.0)
        return {sid: 10.0 * math.log10(acc[sid] / cfg.n_subcarriers) for sid in active}

    def _uplink_sinr(self, sid: int) -> float:
        if self.cfg.link_mode == "lut":
            return self._snr_db(sid, AP_ID)
        ch = self._uplink_channel(sid)
        dt = self.now - ch.last_update_us
        if dt > 0:
            ch.evolve(dt)
        rho = 10.0 ** (self._snr_db(sid, AP_ID) / 10.0) / ch.n_tx
        e0 = np.zeros((ch.n_tx, 1), dtype=complex)
        e0[0, 0] = 1.0
        pset = PrecoderSet("fixed", (e0,), (float(ch.n_tx),), 0.0)
        acc = 0.0
        for k in range(self.cfg.n_subcarriers):
            s = evaluate_sinr([ch.matrix(k) * math.sqrt(rho)], pset, 1.0)[0]
            acc += 10.0 ** (s / 10.0)
        return 10.0 * math.log10(acc / self.cfg.n_subcarriers)

    def _control_family(self) -> str:
        return lnk.mcs_family("a", mac.legacy_index(mac.CONTROL_RATE_MBPS))

    def _control_ok(self, snr: float, octets: int) -> bool:
        p = self._lut.mpdu_error_prob(snr, self._control_family(), octets)
        return float(self._rng["link"].random()) >= p

    # -- event loop ----------------------------------------------------

    def run(self) -> SimulationResult:
        cfg = self.cfg
        self._schedule(0, "beacon-due", k=0)
        if cfg.sounding_interval_ms > 0 and self._group is not None:
            self._schedule(0, "sounding-due", k=0)
        for i, app in enumerate(cfg.apps):
            period = app.interarrival_us
            phase = float(self._rng["traffic"].random()) * period
            first = app.start_s * 1e6 + phase
            self._arrival_next.append(first)
            if _us(first) <= self.end_us:
                self._schedule(_us(first), "app-arrival", app=i)
        if cfg.amrr:
            step = _us(cfg.amrr_interval_ms * 1000.0)
            self._schedule(step, "amrr-interval", k=1)
        if self.end_us >= WINDOW_US:
            self._schedule(WINDOW_US, "window-sample", k=1)
        for sid in self._group_ids:
            st = cfg.stations[sid]
            if st.mobility_step_m != 0.0:
                self._schedule(_us(st.mobility_period_s * 1e6), "mobility-step", sid=sid)
        self._schedule(self.end_us, "end")

        handlers = {
            "app-arrival": self._on_arrival,
            "beacon-due": self._on_beacon_due,
            "sounding-due": self._on_sounding_due,
            "amrr-interval": self._on_amrr_interval,
            "window-sample": self._on_window_sample,
            "mobility-step": self._on_mobility,
            "txop-end": self._on_txop_end,
            "medium-free": self._on_medium_free,
            "end": lambda **_: None,
        }
        while self._heap:
            t, _, kind, data = heapq.heappop(self._heap)
            if t > self.end_us:
                break
            self.now = t
            handlers[kind](**data)
        self._finalize()
        return SimulationResult(cfg, self.log)

    # -- handlers ------------------------------------------------------

    def _on_arrival(self, app: int) -> None:
        spec = self.cfg.apps[app]
        stop_us = spec.stop_s * 1e6 if spec.stop_s >= 0 else float(self.end_us)
        if self.now <= stop_us:
            src = AP_ID if spec.direction == "down" else spec.station
            dst = spec.station if spec.direction == "down" else AP_ID
            job = MsduJob(
                spec.msdu_octets, rates.mpdu_octets(spec.msdu_octets, self.cfg.standard, qos=True)
            )
            self.nodes[src].queues[dst].append(job)
            self._flows[(spec.station, spec.direction)]["generated"] += 1
        self._arrival_next[app] += spec.interarrival_us
        nxt = _us(self._arrival_next[app])
        if nxt <= self.end_us and (spec.stop_s < 0 or self._arrival_next[app] <= spec.stop_s * 1e6):
            self._schedule(nxt, "app-arrival", app=app)
        if self.now >= self._busy_until:
            self._resolve_access()

    def _on_beacon_due(self, k: int) -> None:
        self._beacon_due = True
        nxt = (k + 1) * BEACON_PERIOD_US
        if nxt <= self.end_us:
            self._schedule(nxt, "beacon-due", k=k + 1)
        if self.now >= self._busy_until:
            self._resolve_access()

    def _on_sounding_due(self, k: int) -> None:
        self._sounding_due = True
        nxt = _us((k + 1) * self.cfg.sounding_interval_ms * 1000.0)
        if nxt <= self.end_us:
            self._schedule(nxt, "sounding-due", k=k + 1)
        if self.now >= self._busy_until:
            self._resolve_access()

    def _on_amrr_interval(self, k: int) -> None:
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            for peer in sorted(node.amrr):
                state = node.amrr[peer]
                if state is None:
                    continue
                state.on_interval_close()
                station = peer if nid == AP_ID else nid
                direction = "down" if nid == AP_ID else "up"
                self.log.add(self.now, station, direction, "mcs_index", float(state.rate))
        nxt = _us((k + 1) * self.cfg.amrr_interval_ms * 1000.0)
        if nxt <= self.end_us:
            self._schedule(nxt, "amrr-interval", k=k + 1)

    def _on_window_sample(self, k: int) -> None:
        for key in sorted(self._ring):
            ring, floor = self._ring[key], self.now - WINDOW_US
            while ring and ring[0][0] <= floor:
                self._ring_sum[key] -= ring.popleft()[1]
            mbps = self._ring_sum[key] / (WINDOW_US / 1e6) / 1e6
            self.log.add(self.now, key[0], key[1], "throughput_mbps", mbps)
        nxt = WINDOW_US + k * WINDOW_STEP_US
        if nxt <= self.end_us:
            self._schedule(nxt, "window-sample", k=k + 1)

    def _on_mobility(self, sid: int) -> None:
        st = self.cfg.stations[sid]
        node = self.nodes[sid]
        node.position_m += st.mobility_step_m
        self.log.add(self.now, sid, "up", "distance_m", self._distance(sid, AP_ID))
        nxt = self.now + _us(st.mobility_period_s * 1e6)
        if nxt <= self.end_us:
            self._schedule(nxt, "mobility-step", sid=sid)

    def _on_medium_free(self) -> None:
        if self.now >= self._busy_until:
            self._resolve_access()

    # -- access resolution ----------------------------------------------

    def _has_work(self, nid: int) -> bool:
        if nid == AP_ID and (self._beacon_due or self._sounding_due):
            return True
        return self.nodes[nid].queued() > 0

    def _resolve_access(self) -> None:
        if self.now < self._busy_until:
            return
        contenders = [nid for nid in sorted(self.nodes) if self._has_work(nid)]
        if not contenders:
            return
        rng = self._rng["backoff"]
        slot = self._timing.slot_us
        cands = []
        for nid in contenders:
            c = self.nodes[nid].contender
            r = c.draw_backoff(rng)
            cands.append((self.now + _us(c.aifs_us + r * slot), nid, r))
        cands.sort()
        start_w, _, r_w = cands[0]
        winners = [(nid, r) for s, nid, r in cands if s == start_w]

        plans: list[_TxPlan] = []
        for nid, _ in winners:
            plan = self._build_txop(nid, start_w)
            if plan is not None:
                plans.append(plan)
        if not plans:
            # contender had stale work flags only; try again immediately
            return
        air_end = max(p.air_end_us for p in plans)

        for s_i, nid, r_i in cands:
            if any(nid == p.src for p in plans):
                continue
            if any(self._can_sense(nid, p.src) for p in plans):
                self.nodes[nid].contender.residual_slots = max(r_i - r_w, 1)
            elif s_i < air_end:
                hidden = self._build_txop(nid, s_i)
                if hidden is not None:
                    plans.append(hidden)
                    air_end = max(air_end, hidden.air_end_us)
            else:
                self.nodes[nid].contender.residual_slots = 0

        if len(plans) > 1:
            self._cross_interfere(plans)
        busy = max(p.chain_end_us for p in plans)
        for p in plans:
            self._schedule(p.chain_end_us, "txop-end", plan=p)
        self._busy_until = busy
        self._schedule(busy, "medium-free")

    def _cross_interfere(self, plans: list[_TxPlan]) -> None:
        """Re-draw verdicts for frames that overlap on air (same-slot ties
        and hidden-node starts). Interference is broadband; the strongest
        concurrent interferer at the receiver decides the SIR."""
        self._collision_count += len(plans) - 1
        for p in plans:
            others = [o for o in plans if o is not p and o.start_us < p.air_end_us and o.air_end_us > p.start_us]
            if not others or p.kind != "data":
                continue
            for m in p.members:
                rx = m.dst
                own = chan.rx_power_dbm(self._budget, self._distance(rx, p.src))
                worst = None
                for o in others:
                    inter = chan.rx_power_dbm(self._budget, self._distance(rx, o.src))
                    sir = own - inter
                    ov = (
                        max(p.start_us, o.start_us) - p.start_us,
                        min(p.air_end_us, o.air_end_us) - p.start_us,
                    )
                    if worst is None or sir < worst[0]:
                        worst = (sir, ov)
                sir, (ov_a, ov_b) = worst
                spec = lnk.CollisionSpec(
                    overlap_start_us=float(ov_a),
                    overlap_end_us=float(ov_b),
                    sir_db=sir,
                    channels=frozenset(),
                    hits_header=ov_a <= 0.0,
                )
                self._apply_verdict(p, m, spec)
                m.collided = True

    # -- txop construction ----------------------------------------------

    def _build_txop(self, nid: int, start: int) -> _TxPlan | None:
        if nid == AP_ID:
            if self._beacon_due:
                return self._build_beacon(start)
            if self._sounding_due:
                return self._build_sounding(start)
            return self._build_data(AP_ID, start)
        return self._build_data(nid, start)

    def _build_beacon(self, start: int) -> _TxPlan:
        self._beacon_due = False
        self._beacon_count += 1
        air = mac.beacon_ppdu_us()
        end = start + _us(air)
        return _TxPlan(AP_ID, start, end, end, "beacon")

    def _build_sounding(self, start: int) -> _TxPlan | None:
        self._sounding_due = False
        if not self._group_ids or self._group is None:
            return None
        flavor = "mu" if self.cfg.scheme.startswith("mu") else "su"
        sta_ant = self.nodes[self._group_ids[0]].antennas
        if flavor == "mu":
            total = mac.sounding_sequence(
                "mu", self.cfg.ap_antennas, sta_ant, len(self._group_ids),
                standard=self.cfg.standard, bandwidth_mhz=self.cfg.bandwidth_mhz,
            ).total_us
        else:
            per = mac.sounding_sequence(
                "su", self.cfg.ap_antennas, sta_ant, 1,
                standard=self.cfg.standard, bandwidth_mhz=self.cfg.bandwidth_mhz,
            ).total_us
            total = per * len(self._group_ids) + self._timing.sifs_us * (len(self._group_ids) - 1)
        self._evolve_group(start)
        self._capture_csi(start)
        self._sounding_count += 1
        end = start + _us(total)
        return _TxPlan(AP_ID, start, end, end, "sounding")

    def _pick_destinations(self, nid: int) -> list[int]:
        node = self.nodes[nid]
        if nid != AP_ID:
            return [AP_ID] if node.queues[AP_ID] else []
        busy_dsts = [d for d in self._group_ids if node.queues[d]]
        if not busy_dsts:
            return []
        if self.cfg.scheme.startswith("mu"):
            return [d for d in busy_dsts if d in self._csi] or []
        for _ in range(len(self._group_ids)):
            d = self._group_ids[node.rr_cycle % len(self._group_ids)]
            node.rr_cycle += 1
            if d in busy_dsts:
                return [d]
        return []

    def _build_data(self, nid: int, start: int) -> _TxPlan | None:
        cfg = self.cfg
        node = self.nodes[nid]
        active = self._pick_destinations(nid)
        if not active:
            return None
        downlink = nid == AP_ID
        mu = downlink and cfg.scheme.startswith("mu") and len(active) >= 1
        horizontal = cfg.aggregation_scheme == "horizontal" and not mu

        members: list[_MemberPlan] = []
        users = []
        for dst in active:
            queue = node.queues[dst]
            amrr = node.amrr[dst]
            head = queue[0]
            if amrr is not None:
                idx = amrr.rate_for_failures(head.failures)
                if idx is None:
                    idx = amrr.rate  # drop happens at apply time, not here
            else:
                idx = cfg.fixed_mcs
            layout = mac.assemble_ampdu(
                len(queue),
                head.mpdu_octets,
                cfg.standard,
                cfg.bandwidth_mhz,
                idx,
                self._n_ss_arg,
                txop_limit_us=self._txop_limit_us,
                max_aggregation=cfg.max_aggregation,
                gi=cfg.gi,
                n_members=len(active),
                layout_scheme="horizontal" if horizontal else "vertical",
                b_blocks=cfg.b_blocks if horizontal else 1,
                n_channels=cfg.n_channels,
            )
            jobs = [queue.popleft() for _ in range(layout.n_mpdus)]
            members.append(_MemberPlan(dst, nid, idx, jobs, layout, 0.0, [], False))
            psdu = rates.ampdu_psdu_octets([j.mpdu_octets for j in jobs])
            users.append((idx, psdu))
            flow = (dst, "down") if downlink else (nid, "up")
            self._in_flight[flow] += len(jobs)

        if mu:
            air = rates.mu_ppdu_duration_us(
                cfg.standard, cfg.bandwidth_mhz, [(i, 1, p) for i, p in users], cfg.gi
            )
            n_sts = len(active)
        else:
            idx, psdu = users[0]
            air = rates.ppdu_duration_us(
                cfg.standard, cfg.bandwidth_mhz, idx, self._n_ss_arg, cfg.gi, psdu_octets=psdu
            )
            n_sts = 1
        header = rates.preamble_us(cfg.standard, cfg.bandwidth_mhz, n_sts)
        resp = mac.ba_chain_us(len(active), self._timing)
        if horizontal and cfg.b_blocks > 1:
            # every extra block answers with its own BA, chained a SIFS apart
            resp += (cfg.b_blocks - 1) * (self._timing.sifs_us + mac.control_ppdu_us(mac.BA_OCTETS))
        air_end = start + _us(air)
        plan = _TxPlan(nid, start, air_end, air_end + _us(resp), "data")
        plan.members = members
        plan.air_us = air
        plan.header_us = header

        if downlink:
            self._evolve_group(start)
            sinrs = self._downlink_sinr(active)
        else:
            sinrs = {AP_ID: self._uplink_sinr(nid)}
        plan.clean_sinrs = sinrs

        spec = self._draw_interferer(air)
        for m in members:
            m.sinr_db = sinrs[m.dst if downlink else AP_ID]
            self._apply_verdict(plan, m, spec)
            if spec is not None:
                m.collided = True
        if spec is not None:
            self._collision_count += 1
        self._txop_count += 1
        return plan

    def _draw_interferer(self, air_us: float) -> lnk.CollisionSpec | None:
        cfg = self.cfg
        if cfg.collision_probability <= 0.0:
            return None
        rng = self._rng["collision"]
        if float(rng.random()) >= cfg.collision_probability:
            return None
        sir = cfg.collision_sir_low_db + float(rng.random()) * (
            cfg.collision_sir_high_db - cfg.collision_sir_low_db
        )
        hit = int(rng.integers(1, cfg.n_channels + 1))
        head = rates.preamble_us(cfg.standard, cfg.bandwidth_mhz, 1)
        latest = max(air_us - cfg.collision_burst_us, head)
        offset = head + float(rng.random()) * max(latest - head, 0.0)
        return lnk.CollisionSpec(
            overlap_start_us=offset,
            overlap_end_us=offset + cfg.collision_burst_us,
            sir_db=sir,
            channels=frozenset((hit,)),
        )

    def _apply_verdict(self, plan: _TxPlan, m: _MemberPlan, spec: lnk.CollisionSpec | None) -> None:
        rng = self._rng["link"]
        verdict = lnk.apply_collision(
            tuple(b.channels for b in m.layout.blocks),
            m.sinr_db,
            plan.air_us,
            plan.header_us,
            spec,
            rng,
        )
        family = lnk.mcs_family(self.cfg.standard, m.mcs_index, self._n_ss_arg)
        fails: list[bool] = []
        if verdict.saturated:
            fails = [True] * len(m.jobs)
        else:
            header_ok = True
            if spec is not None and spec.hits_header:
                p_hdr = self._lut.mpdu_error_prob(verdict.header_sinr_db, self._control_family(), 4)
                header_ok = float(rng.random()) >= p_hdr
            job_iter = iter(m.jobs)
            for block, bsinr in zip(m.layout.blocks, verdict.block_sinr_db):
                eff = bsinr + lnk.diversity_bonus_db(len(block.channels), self.cfg.n_channels)
                for _ in range(block.n_mpdus):
                    job = next(job_iter)
                    p = self._lut.mpdu_error_prob(eff, family, job.mpdu_octets)
                    fails.append(not header_ok or float(rng.random()) < p)
        m.fails = fails

    # -- txop completion -------------------------------------------------

    def _on_txop_end(self, plan: _TxPlan) -> None:
        if plan.kind != "data":
            self.nodes[plan.src].contender.on_success()
            if self.now >= self._busy_until:
                self._resolve_access()
            return
        node = self.nodes[plan.src]
        downlink = plan.src == AP_ID
        any_delivered = False
        for m in plan.members:
            flow = (m.dst, "down") if downlink else (plan.src, "up")
            counters = self._flows[flow]
            amrr = node.amrr[m.dst]
            fails = list(m.fails)
            delivered = [j for j, f in zip(m.jobs, fails) if not f]
            if delivered and not self._control_ok(
                self._snr_db(plan.src, m.dst), mac.BA_OCTETS
            ):
                # the block ACK itself was lost; nothing can be confirmed
                fails = [True] * len(m.jobs)
                delivered = []
            bits = 0
            requeue = []
            for job, failed in zip(m.jobs, fails):
                if amrr is not None:
                    amrr.on_attempt_result(not failed)
                if not failed:
                    counters["delivered"] += 1
                    bits += 8 * job.msdu_octets
                else:
                    job.failures += 1
                    if job.failures >= sum(self.cfg.amrr_counts):
                        counters["dropped"] += 1
                    else:
                        requeue.append(job)
            for job in reversed(requeue):
                node.queues[m.dst].appendleft(job)
            self._in_flight[flow] -= len(m.jobs)
            if bits:
                counters["delivered_bits"] += bits
                self._ring[flow].append((self.now, bits))
                self._ring_sum[flow] += bits
                any_delivered = True
            station, direction = flow
            self.log.add(self.now, station, direction, "phy_rate_mbps",
                         rates.lookup_rate(self.cfg.standard, self.cfg.bandwidth_mhz,
                                           m.mcs_index, self._n_ss_arg, self.cfg.gi))
            self.log.add(self.now, station, direction, "sinr_db", m.sinr_db)
            self.log.add(self.now, station, direction, "mpdus_ok", len(m.jobs) - sum(fails))
            self.log.add(self.now, station, direction, "mpdus_fail", sum(fails))
            if m.collided:
                self.log.add(self.now, station, direction, "collision", 1.0)
        if any_delivered:
            node.contender.on_success()
        else:
            node.contender.on_failure()
        if self.now >= self._busy_until:
            self._resolve_access()

    # -- wrap-up ---------------------------------------------------------

    def _finalize(self) -> None:
        flows = {}
        balanced = True
        for key in sorted(self._flows):
            station, direction = key
            c = dict(self._flows[key])
            if direction == "down":
                c["queued"] = len(self.nodes[AP_ID].queues[station])
            else:
                c["queued"] = len(self.nodes[station].queues[AP_ID])
            c["in_flight"] = self._in_flight[key]
            residue = c["generated"] - (c["delivered"] + c["dropped"] + c["queued"] + c["in_flight"])
            balanced = balanced and residue == 0
            flows[f"{station}/{direction}"] = c
        self.log.summary = {
            "seed": self.cfg.seed,
            "duration_s": self.cfg.duration_s,
            "standard": self.cfg.standard,
            "scheme": self.cfg.scheme,
            "flows": flows,
            "conserved": balanced,
            "txops": self._txop_count,
            "collisions": self._collision_count,
            "beacons": self._beacon_count,
            "soundings": self._sounding_count,
        }


def run_scenario(cfg: ScenarioConfig) -> SimulationResult:
    return Simulation(cfg).run()
