"""Deterministic multipath channel kernel.

Spherical geometry, per-antenna channel coefficients, channel vectors,
maximum-ratio transmission and capacity. Everything here is a pure function
of its inputs; positions are meters, angles radians, powers linear watts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class DegenerateChannelError(ValueError):
    """Raised when a channel vector is identically zero where a direction is needed."""


def spherical_unit_vector(theta_rad: float, phi_rad: float) -> np.ndarray:
    """Unit direction for elevation theta (from +z) and azimuth phi (from +x).

    Returns [sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)].
    """
    if not (np.isfinite(theta_rad) and np.isfinite(phi_rad)):
        raise ValueError("angles must be finite")
    st = np.sin(theta_rad)
    return np.array([st * np.cos(phi_rad), st * np.sin(phi_rad), np.cos(theta_rad)])


def unit_vector_angles(r: np.ndarray) -> tuple[float, float]:
    """Inverse of spherical_unit_vector: (theta, phi) with theta in [0, pi]."""
    theta = float(np.arccos(np.clip(r[2], -1.0, 1.0)))
    phi = float(np.arctan2(r[1], r[0]))
    return theta, phi


@dataclass
class Path:
    """One propagation path: complex gain, departure/arrival directions, Doppler, delay.

    The gain already folds both per-path complex factors into a single number.
    delay_s is excess delay relative to the first (LoS) path, so the LoS
    carrier-phase reference is zero.
    """

    gain: complex
    r_tx: np.ndarray
    r_rx: np.ndarray
    doppler_hz: float
    delay_s: float

    def __post_init__(self):
        self.r_tx = np.asarray(self.r_tx, dtype=float)
        self.r_rx = np.asarray(self.r_rx, dtype=float)
        for r in (self.r_tx, self.r_rx):
            if abs(np.linalg.norm(r) - 1.0) > 1e-12:
                raise ValueError("path direction vectors must be unit norm")
        if self.delay_s < 0:
            raise ValueError("delay_s must be nonnegative")


@dataclass
class PathSet:
    """Ordered multipath parameters for one BS-user link at one instant.

    Array storage (length P+1 each): gains complex, r_tx/r_rx unit rows,
    doppler_hz, delay_s. When is_los_first, row 0 is the LoS path and its
    r_tx is the geometric BS-to-user direction.
    """

    gains: np.ndarray
    r_tx: np.ndarray
    r_rx: np.ndarray
    doppler_hz: np.ndarray
    delay_s: np.ndarray
    is_los_first: bool = True

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=complex)
        self.r_tx = np.atleast_2d(np.asarray(self.r_tx, dtype=float))
        self.r_rx = np.atleast_2d(np.asarray(self.r_rx, dtype=float))
        self.doppler_hz = np.asarray(self.doppler_hz, dtype=float)
        self.delay_s = np.asarray(self.delay_s, dtype=float)
        if len(self.gains) < 1:
            raise ValueError("a PathSet needs at least one path")
        norms = np.linalg.norm(self.r_tx, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("r_tx rows must be unit vectors")
        if np.any(self.delay_s < 0):
            raise ValueError("delays must be nonnegative")

    @classmethod
    def from_paths(cls, paths: list[Path], is_los_first: bool = True) -> "PathSet":
        return cls(
            gains=np.array([p.gain for p in paths]),
            r_tx=np.stack([p.r_tx for p in paths]),
            r_rx=np.stack([p.r_rx for p in paths]),
            doppler_hz=np.array([p.doppler_hz for p in paths]),
            delay_s=np.array([p.delay_s for p in paths]),
            is_los_first=is_los_first,
        )

    @property
    def paths(self) -> list[Path]:
        return [
            Path(self.gains[p], self.r_tx[p], self.r_rx[p],
                 float(self.doppler_hz[p]), float(self.delay_s[p]))
            for p in range(len(self.gains))
        ]

    def __len__(self) -> int:
        return len(self.gains)


@dataclass
class MAPlacement:
    """Local antenna coordinates of the movable array, one [0, y, z] row per element."""

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise ValueError("coords must be N_t x 3")

    @property
    def n_t(self) -> int:
        return self.coords.shape[0]

    def min_spacing(self) -> float:
        """Smallest pairwise distance; inf for a single element."""
        n = self.n_t
        if n < 2:
            return np.inf
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        d = np.linalg.norm(diff, axis=-1)
        return float(d[np.triu_indices(n, k=1)].min())

    def is_feasible(self, region_bounds: np.ndarray, lambda_m: float) -> bool:
        """C1 check: every element inside its own region and spacing >= lambda/2."""
        y, z = self.coords[:, 1], self.coords[:, 2]
        inside = (
            (y >= region_bounds[:, 0]) & (y <= region_bounds[:, 1])
            & (z >= region_bounds[:, 2]) & (z <= region_bounds[:, 3])
        )
        return bool(inside.all()) and self.min_spacing() >= lambda_m / 2.0


@dataclass
class Beamformer:
    """Transmit weight vector with its power budget."""

    w: np.ndarray
    p_max: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if np.linalg.norm(self.w) ** 2 > self.p_max + 1e-9:
            raise ValueError("beamformer exceeds power budget")


def channel_coefficient(paths: PathSet, p_n: np.ndarray, t: float,
                        lambda_m: float, f_hz: float) -> complex:
    """Coefficient between one antenna at local position p_n and the user at time t.

    Sum over paths of gain * exp(j 2pi r_tx.p_n / lambda) * exp(j 2pi w t)
    * exp(j 2pi f delay).
    """
    if lambda_m <= 0:
        raise ValueError("lambda_m must be positive")
    if len(paths) == 0:
        raise ValueError("empty PathSet")
    p_n = np.asarray(p_n, dtype=float)
    phase = (paths.r_tx @ p_n) / lambda_m + paths.doppler_hz * t + f_hz * paths.delay_s
    return complex(np.sum(paths.gains * np.exp(1j * TWO_PI * phase)))


def channel_vector(paths: PathSet, placement: MAPlacement, t: float,
                   lambda_m: float, f_hz: float) -> np.ndarray:
    """Length-N_t channel vector; element n is channel_coefficient at coords[n]."""
    if lambda_m <= 0:
        raise ValueError("lambda_m must be positive")
    if len(paths) == 0:
        raise ValueError("empty PathSet")
    # (N_t, P) spatial phases + per-path temporal/carrier phases
    phase = placement.coords @ paths.r_tx.T / lambda_m
    phase = phase + (paths.doppler_hz * t + f_hz * paths.delay_s)[None, :]
    return np.exp(1j * TWO_PI * phase) @ paths.gains


def channel_vectors_batch(paths: PathSet, coords_batch: np.ndarray, t: float,
                          lambda_m: float, f_hz: float) -> np.ndarray:
    """Channel vectors for a batch of placements, shape (B, N_t, 3) -> (B, N_t).

    Used by swarm-style optimizers that score many candidate placements at once.
    """
    static = paths.gains * np.exp(1j * TWO_PI * (paths.doppler_hz * t + f_hz * paths.delay_s))
    phase = np.einsum("bnc,pc->bnp", coords_batch, paths.r_tx) / lambda_m
    return np.exp(1j * TWO_PI * phase) @ static


def mrt_beamformer(h_bob: np.ndarray, p_max: float) -> Beamformer:
    """Full-power maximum-ratio transmission aligned with the intended channel."""
    h_bob = np.asarray(h_bob, dtype=complex)
    nrm = np.linalg.norm(h_bob)
    if nrm == 0:
        raise DegenerateChannelError("cannot beamform toward a zero channel")
    return Beamformer(w=np.sqrt(p_max) * h_bob / nrm, p_max=p_max)


def capacity(h: np.ndarray, w: Beamformer | np.ndarray, noise_power: float) -> float:
    """log2(1 + |h^H w|^2 / noise_power), in bps/Hz."""
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    wv = w.w if isinstance(w, Beamformer) else np.asarray(w, dtype=complex)
    gain = np.abs(np.vdot(h, wv)) ** 2
    return float(np.log2(1.0 + gain / noise_power))


def secrecy_rate(h_bob: np.ndarray, h_eve: np.ndarray, p_max: float,
                 noise_power: float) -> float:
    """Clamped capacity gap [C_b - C_e]^+ under MRT toward Bob at full power."""
    w = mrt_beamformer(h_bob, p_max)
    cb = capacity(h_bob, w, noise_power)
    ce = capacity(h_eve, w, noise_power)
    return max(cb - ce, 0.0)
