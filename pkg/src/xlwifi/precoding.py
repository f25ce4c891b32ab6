"""Linear MU-MIMO precoders (SVD, channel inversion, MMSE, block
diagonalization) and SINR evaluation under possibly stale channel knowledge.

All schemes share one power convention: the total radiated power equals n_T
(unit power per transmit antenna), so per-user comparisons across schemes are
power-fair. Precoder bases are kept orthonormal where the scheme produces
them that way (SVD, BD) with the power split carried separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateProduct, NoNullSpace, NonFinite, RankDeficient

_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray  # n_R x n_R unitary
    sigma: np.ndarray  # min(n_T, n_R) singular values, descending
    V: np.ndarray  # n_T x n_T unitary


def svd(H: np.ndarray) -> SvdResult:
    H = np.asarray(H, dtype=complex)
    if not np.all(np.isfinite(H.view(float))):
        raise NonFinite("channel matrix has non-finite entries")
    U, s, Vh = np.linalg.svd(H, full_matrices=True)
    return SvdResult(U, s, Vh.conj().T)


@dataclass(frozen=True)
class PrecoderSet:
    """Per-user precoders W_c (n_T x n_ss_c) plus the power split.

    bases[c] columns are orthonormal for svd_su and bd; for zf/mmse they are
    the scaled pseudo-inverse columns (powers[c] then equals their squared
    norm). effective(c) always returns the transmit-ready precoder with
    sum_c ||effective(c)||_F^2 = n_T.
    """

    scheme: str
    bases: tuple[np.ndarray, ...]
    powers: tuple[float, ...]
    csi_snapshot_time_us: float = 0.0

    @property
    def n_users(self) -> int:
        return len(self.bases)

    @property
    def n_tx(self) -> int:
        return self.bases[0].shape[0]

    def effective(self, user: int) -> np.ndarray:
        b = self.bases[user]
        norm_sq = float(np.vdot(b, b).real)
        return b * math.sqrt(self.powers[user] / norm_sq)


def svd_su_precoder(H: np.ndarray, n_ss: int | None = None, snapshot_time_us: float = 0.0) -> PrecoderSet:
    """Single-user beamforming on the leading right singular vectors."""
    res = svd(H)
    n_tx = res.V.shape[0]
    if n_ss is None:
        n_ss = int(np.sum(res.sigma > _RANK_RTOL * max(res.sigma[0], 1e-300)))
        n_ss = max(n_ss, 1)
    basis = res.V[:, :n_ss]
    return PrecoderSet("svd_su", (basis,), (float(n_tx),), snapshot_time_us)


def _stack(H_list: Sequence[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    mats = [np.atleast_2d(np.asarray(H, dtype=complex)) for H in H_list]
    n_tx = mats[0].shape[1]
    if any(m.shape[1] != n_tx for m in mats):
        raise ValueError("users must share the transmit antenna count")
    return np.vstack(mats), [m.shape[0] for m in mats]


def _split_and_normalize(
    W: np.ndarray, rows: list[int], scheme: str, snapshot_time_us: float
) -> PrecoderSet:
    n_tx = W.shape[0]
    scale = math.sqrt(n_tx) / float(np.linalg.norm(W))
    W = W * scale
    bases = []
    powers = []
    col = 0
    for r in rows:
        b = W[:, col : col + r]
        bases.append(b)
        powers.append(float(np.vdot(b, b).real))
        col += r
    return PrecoderSet(scheme, tuple(bases), tuple(powers), snapshot_time_us)


def zf_precoders(H_list: Sequence[np.ndarray], snapshot_time_us: float = 0.0) -> PrecoderSet:
    """Channel inversion: W = H* (H H*)^-1, then one global power scaling so
    H W stays a positive multiple of the identity."""
    H, rows = _stack(H_list)
    n_rx_total, n_tx = H.shape
    if n_rx_total > n_tx:
        raise RankDeficient(f"{n_rx_total} receive antennas exceed {n_tx} transmit antennas")
    s = np.linalg.svd(H, compute_uv=False)
    if s[-1] < _RANK_RTOL * s[0]:
        raise RankDeficient("stacked channel matrix is (numerically) row-rank deficient")
    gram = H @ H.conj().T
    W = H.conj().T @ np.linalg.inv(gram)
    return _split_and_normalize(W, rows, "zf", snapshot_time_us)


def mmse_precoders(
    H_list: Sequence[np.ndarray], rho: float, snapshot_time_us: float = 0.0
) -> PrecoderSet:
    """Regularized inversion: W = H* (H H* + rho I)^-1. rho = 0 reduces to
    channel inversion on full-rank stacks."""
    if rho < 0:
        raise ValueError("rho must be >= 0")
    H, rows = _stack(H_list)
    gram = H @ H.conj().T + rho * np.eye(H.shape[0])
    W = H.conj().T @ np.linalg.inv(gram)
    return _split_and_normalize(W, rows, f"mmse({rho:g})", snapshot_time_us)


def null_space_basis(H_stacked: np.ndarray, n_tx: int) -> np.ndarray:
    """Orthonormal basis of the right null space of the stacked matrix."""
    if H_stacked.size == 0:
        return np.eye(n_tx, dtype=complex)
    _, s, Vh = np.linalg.svd(H_stacked, full_matrices=True)
    rank = int(np.sum(s > _RANK_RTOL * max(float(s[0]), 1e-300)))
    if rank >= n_tx:
        raise NoNullSpace("stacked interference channel spans the whole transmit space")
    return Vh.conj().T[:, rank:]


def bd_precoders(
    H_list: Sequence[np.ndarray],
    n_ss: Sequence[int] | None = None,
    snapshot_time_us: float = 0.0,
) -> PrecoderSet:
    """Block diagonalization: steer each user inside the null space of all
    other users' channels, then pick the throughput-maximizing directions
    there via a second SVD. Power is split equally across users."""
    mats = [np.atleast_2d(np.asarray(H, dtype=complex)) for H in H_list]
    n_users = len(mats)
    n_tx = mats[0].shape[1]
    bases = []
    for c, H_c in enumerate(mats):
        others = [m for e, m in enumerate(mats) if e != c]
        stacked = np.vstack(others) if others else np.empty((0, n_tx), dtype=complex)
        ns = null_space_basis(stacked, n_tx)
        product = H_c @ ns
        _, s, Vh = np.linalg.svd(product, full_matrices=False)
        if s.size == 0 or s[0] < 1e-12:
            raise DegenerateProduct(f"user {c} channel is orthogonal to its usable null space")
        want = min(H_c.shape[0], ns.shape[1]) if n_ss is None else n_ss[c]
        if want > ns.shape[1]:
            raise NoNullSpace(f"user {c}: requested {want} streams, null space has {ns.shape[1]}")
        bases.append(ns @ Vh.conj().T[:, :want])
    powers = tuple(n_tx / n_users for _ in range(n_users))
    return PrecoderSet("bd", tuple(bases), powers, snapshot_time_us)


def evaluate_sinr(
    H_list: Sequence[np.ndarray],
    precoders: PrecoderSet,
    noise_power: float,
    include_cti: bool = True,
) -> list[float]:
    """Per-user SINR in dB: useful power through H_c W_c over cross-user
    leakage plus noise. H_list is the CURRENT channel; the precoders may have
    been computed from an older snapshot, which is exactly how estimate aging
    enters. include_cti=False zeroes the leakage term (the idealised
    independent-beams comparison mode).
    """
    if noise_power <= 0:
        raise ValueError("noise_power must be > 0")
    effectives = [precoders.effective(c) for c in range(precoders.n_users)]
    out = []
    for c, H_c in enumerate(H_list):
        H_c = np.atleast_2d(np.asarray(H_c, dtype=complex))
        signal = float(np.linalg.norm(H_c @ effectives[c]) ** 2)
        cti = 0.0
        if include_cti:
            for e, W_e in enumerate(effectives):
                if e != c:
                    cti += float(np.linalg.norm(H_c @ W_e) ** 2)
        out.append(10.0 * math.log10(signal / (cti + noise_power)) if signal > 0 else -math.inf)
    return out


def leakage_norms(H_list: Sequence[np.ndarray], precoders: PrecoderSet) -> np.ndarray:
    """Matrix L[c, e] = ||H_c @ W_e||_F, the cross-user leakage map."""
    n = precoders.n_users
    L = np.zeros((n, n))
    for c, H_c in enumerate(H_list):
        H_c = np.atleast_2d(np.asarray(H_c, dtype=complex))
        for e in range(n):
            L[c, e] = float(np.linalg.norm(H_c @ precoders.effective(e)))
    return L


def givens_angle_count(n_rows: int, n_cols: int) -> int:
    """Number of Givens angles parameterizing an n_rows x n_cols unitary
    feedback matrix: 2 * sum_{i=1..min(n_cols, n_rows-1)} (n_rows - i),
    split evenly between the two angle families."""
    if n_rows < 1 or n_cols < 1:
        raise ValueError("matrix dimensions must be >= 1")
    return 2 * sum(n_rows - i for i in range(1, min(n_cols, n_rows - 1) + 1))


# Angle quantization bit widths (psi, phi) per feedback flavour.
QUANT_BITS = {"su": (2, 4), "mu": (5, 7)}


def quantization_sigma(psi_bits: int, phi_bits: int) -> float:
    """Std-dev of the additive entry perturbation standing in for Givens
    angle quantization: the two families' uniform quantization errors
    (step/sqrt(12) each) combined and shared between the entries."""
    step_psi = math.pi / (2 ** (psi_bits + 1))
    step_phi = 2.0 * math.pi / (2**phi_bits)
    return math.sqrt((step_psi**2 + step_phi**2) / 24.0)


def perturb_precoder(basis: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Apply the quantization-noise model: add CN(0, sigma^2) to every entry
    and re-orthonormalize, so the result is still a valid steering basis."""
    if sigma == 0:
        return basis.copy()
    noise = (rng.standard_normal(basis.shape) + 1j * rng.standard_normal(basis.shape)) * (
        sigma / math.sqrt(2.0)
    )
    q, r = np.linalg.qr(basis + noise)
    # keep column phases aligned with the unperturbed basis
    signs = np.sign(np.real(np.diag(r)))
    signs[signs == 0] = 1.0
    return q[:, : basis.shape[1]] * signs
