"""Time-correlated frequency-selective MIMO fading with log-distance pathloss.

The full cluster-based indoor models are replaced by exponential-power-delay
Rayleigh taps evolving as an AR(1) process. That keeps the two effects the
experiments actually probe, correlation in time (channel estimate aging) and
correlation between users, as explicit knobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = 17.0
    system_loss_db: float = 8.5
    antenna_gain_db: float = 0.0
    noise_figure_db: float = 7.0
    carrier_freq_ghz: float = 5.2


# Log-distance pathloss: free space up to the breakpoint, then exponent 3.5.
BREAKPOINT_M = 5.0
PATHLOSS_EXPONENT = 3.5

# 20·log10(4·pi/c) with c in m/s
_FSPL_CONST_DB = 20.0 * math.log10(4.0 * math.pi / 299_792_458.0)


def pathloss_db(distance_m: float, carrier_freq_ghz: float = 5.2) -> float:
    if distance_m <= 0:
        raise ValueError("distance_m must be > 0")
    d_fs = min(distance_m, BREAKPOINT_M)
    loss = 20.0 * math.log10(d_fs) + 20.0 * math.log10(carrier_freq_ghz * 1e9) + _FSPL_CONST_DB
    if distance_m > BREAKPOINT_M:
        loss += 10.0 * PATHLOSS_EXPONENT * math.log10(distance_m / BREAKPOINT_M)
    return loss


def rx_power_dbm(budget: LinkBudget, distance_m: float) -> float:
    return (
        budget.tx_power_dbm
        - budget.system_loss_db
        + budget.antenna_gain_db
        - pathloss_db(distance_m, budget.carrier_freq_ghz)
    )


def noise_floor_dbm(bandwidth_mhz: float = 20.0, noise_figure_db: float = 7.0) -> float:
    return -174.0 + 10.0 * math.log10(bandwidth_mhz * 1e6) + noise_figure_db


def snr_db(budget: LinkBudget, distance_m: float, bandwidth_mhz: float = 20.0) -> float:
    return rx_power_dbm(budget, distance_m) - noise_floor_dbm(bandwidth_mhz, budget.noise_figure_db)


def _tap_profile(rms_delay_ns: float, tap_spacing_ns: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """Exponential power delay profile sampled on a uniform tap grid,
    normalized to unit total power."""
    if rms_delay_ns < 0:
        raise ValueError("rms_delay_ns must be >= 0")
    if rms_delay_ns == 0:
        return np.zeros(1), np.ones(1)
    n_taps = max(2, 1 + math.ceil(5.0 * rms_delay_ns / tap_spacing_ns))
    delays = np.arange(n_taps) * tap_spacing_ns
    powers = np.exp(-delays / rms_delay_ns)
    return delays, powers / powers.sum()


class ChannelState:
    """Fading state for one ordered station pair.

    H has shape (n_subcarriers, n_rx, n_tx) with unit average entry power
    before pathloss. The same (seed, client_index) and evolution schedule
    reproduce the matrix sequence bit for bit.
    """

    def __init__(
        self,
        seed: int,
        n_tx: int,
        n_rx: int,
        n_subcarriers: int,
        rms_delay_ns: float = 15.0,
        coherence_ms: float = 30.0,
        distance_m: float = 10.0,
        client_index: int = 0,
        subcarrier_spacing_khz: float = 312.5,
    ):
        if n_tx < 1 or n_rx < 1 or n_subcarriers < 1:
            raise ValueError("n_tx, n_rx and n_subcarriers must be >= 1")
        self.seed = seed
        self.n_tx = n_tx
        self.n_rx = n_rx
        self.n_subcarriers = n_subcarriers
        self.rms_delay_ns = rms_delay_ns
        self.coherence_ms = coherence_ms
        self.distance_m = distance_m
        self.client_index = client_index
        self.last_update_us = 0.0
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, client_index))))
        delays, powers = _tap_profile(rms_delay_ns)
        # steering matrix: subcarrier x tap, tap power folded in
        freqs = np.arange(n_subcarriers) * subcarrier_spacing_khz * 1e3
        self._steering = np.exp(-2j * np.pi * np.outer(freqs, delays * 1e-9)) * np.sqrt(powers)
        self._taps = self._draw((len(delays), n_rx, n_tx))
        self._H = np.einsum("kl,lij->kij", self._steering, self._taps)

    def _draw(self, shape: tuple[int, ...]) -> np.ndarray:
        return (self._rng.standard_normal(shape) + 1j * self._rng.standard_normal(shape)) / math.sqrt(2.0)

    @property
    def H(self) -> np.ndarray:
        return self._H

    def matrix(self, subcarrier: int = 0, reverse: bool = False) -> np.ndarray:
        """Channel matrix on one subcarrier; reverse gives the reciprocal
        direction (transpose)."""
        h = self._H[subcarrier]
        return h.T if reverse else h

    def evolve(self, dt_us: float) -> "ChannelState":
        """AR(1) step: taps' = rho*taps + sqrt(1-rho^2)*fresh, rho = exp(-dt/tau).

        Mutates in place and returns self. dt = 0 is an identity (no draw)."""
        if dt_us < 0:
            raise ValueError("dt_us must be >= 0")
        if dt_us == 0:
            return self
        rho = math.exp(-dt_us / (self.coherence_ms * 1e3))
        fresh = self._draw(self._taps.shape)
        self._taps = rho * self._taps + math.sqrt(1.0 - rho * rho) * fresh
        self._H = np.einsum("kl,lij->kij", self._steering, self._taps)
        self.last_update_us += dt_us
        return self


def new_channel(seed: int, n_tx: int, n_rx: int, n_subcarriers: int, **kwargs) -> ChannelState:
    return ChannelState(seed, n_tx, n_rx, n_subcarriers, **kwargs)


def evolve(state: ChannelState, dt_us: float) -> ChannelState:
    return state.evolve(dt_us)


class UserGroupChannel:
    """Per-user channels with a tunable shared component.

    correlation = 0 gives independent users, 1 identical ones; intermediate
    values mix amplitudes as sqrt(c)*shared + sqrt(1-c)*own so entry power
    stays at unity and the pairwise complex correlation equals c.
    """

    def __init__(
        self,
        seed: int,
        n_users: int,
        n_tx: int,
        n_rx: int,
        n_subcarriers: int,
        correlation: float = 0.0,
        **kwargs,
    ):
        if not 0.0 <= correlation <= 1.0:
            raise ValueError("correlation must be in [0, 1]")
        if n_users < 1:
            raise ValueError("n_users must be >= 1")
        self.correlation = correlation
        self.n_users = n_users
        self._shared = ChannelState(seed, n_tx, n_rx, n_subcarriers, client_index=n_users, **kwargs)
        self._own = [
            ChannelState(seed, n_tx, n_rx, n_subcarriers, client_index=u, **kwargs)
            for u in range(n_users)
        ]

    def user_matrices(self, user: int) -> np.ndarray:
        c = self.correlation
        if c == 0.0:
            return self._own[user].H
        if c == 1.0:
            return self._shared.H
        return math.sqrt(c) * self._shared.H + math.sqrt(1.0 - c) * self._own[user].H

    def snapshot(self, user: int) -> np.ndarray:
        return self.user_matrices(user).copy()

    def evolve(self, dt_us: float) -> "UserGroupChannel":
        self._shared.evolve(dt_us)
        for ch in self._own:
            ch.evolve(dt_us)
        return self
