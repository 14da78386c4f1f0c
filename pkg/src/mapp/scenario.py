"""Reproducible dynamic scenarios.

BS/array geometry, straight-line Bob/Eve trajectories, and temporally
correlated multipath parameter sequences. Every random quantity comes from
counter-based Philox streams keyed by (seed, purpose), so trajectories are
independent and bit-reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, asdict

import numpy as np
import yaml

from .channel import PathSet, spherical_unit_vector, unit_vector_angles

SPEED_OF_LIGHT = 299792458.0

BOB = "bob"
EVE = "eve"


class ConfigError(ValueError):
    pass


class GeometryError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """Scenario knobs. Lengths in meters, powers linear, angles radians.

    region_side_wl / aperture_side_wl are in carrier wavelengths; the array
    is an n_h x n_v grid of per-element movement regions. NLoS statistics
    (relative power, angular spread, delay spread, AR coefficient) are
    exposed because the path synthesizer is a simplified stand-in for a
    full geometry-based generator.
    """

    f_hz: float = 2.8e10
    bs_height_m: float = 25.0
    vehicle_height_m: float = 1.5
    n_h: int = 3
    n_v: int = 3
    region_side_wl: float = 4.0
    aperture_side_wl: float = 12.0
    p_nlos: int = 5
    noise_power_db: float = 0.0
    p_max: float = 1.0
    dt_s: float = 0.1
    snapshots_per_trajectory: int = 20
    speed_kmh_range: tuple[float, float] = (10.0, 100.0)
    k_users: int = 2
    nlos_rel_db: float = -3.0
    angle_spread_rad: float = 0.2
    delay_spread_s: float = 1e-7
    ar_rho: float = 0.95
    pathloss_exp: float = 2.0
    ref_distance_m: float = 100.0
    spawn_radius_m: tuple[float, float] = (40.0, 160.0)
    csi_noise_std: float = 0.0

    def __post_init__(self):
        self.speed_kmh_range = tuple(float(v) for v in self.speed_kmh_range)
        self.spawn_radius_m = tuple(float(v) for v in self.spawn_radius_m)
        if self.f_hz <= 0:
            raise ConfigError("carrier frequency must be positive")
        if self.n_h < 1 or self.n_v < 1:
            raise ConfigError("array grid must be at least 1x1")
        if self.aperture_side_wl < self.n_h * self.region_side_wl - 1e-12 or \
                self.aperture_side_wl < self.n_v * self.region_side_wl - 1e-12:
            raise ConfigError("aperture cannot hold the region grid")
        if self.speed_kmh_range[0] <= 0 or self.speed_kmh_range[1] < self.speed_kmh_range[0]:
            raise ConfigError("speed range must be positive and ordered")
        if self.k_users != 2:
            raise ConfigError("exactly one Bob and one Eve are supported")
        if self.p_nlos < 0:
            raise ConfigError("p_nlos must be nonnegative")
        if not 0.0 <= self.ar_rho <= 1.0:
            raise ConfigError("ar_rho must lie in [0, 1]")

    @property
    def lambda_m(self) -> float:
        return SPEED_OF_LIGHT / self.f_hz

    @property
    def n_t(self) -> int:
        return self.n_h * self.n_v

    @property
    def region_side_m(self) -> float:
        return self.region_side_wl * self.lambda_m

    @property
    def aperture_side_m(self) -> float:
        return self.aperture_side_wl * self.lambda_m

    @property
    def noise_power(self) -> float:
        return 10.0 ** (self.noise_power_db / 10.0)

    @property
    def bs_pos(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.bs_height_m])

    def to_mapping(self) -> dict:
        d = asdict(self)
        d["speed_kmh_range"] = list(self.speed_kmh_range)
        d["spawn_radius_m"] = list(self.spawn_radius_m)
        return d

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ScenarioConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(mapping) - names
        if unknown:
            raise ConfigError(f"unknown scenario config keys: {sorted(unknown)}")
        return cls(**mapping)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_mapping(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_scenario_config(path) -> ScenarioConfig:
    """Read a flat key/value YAML file; only scenario keys are consumed."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError("scenario config must be a flat key/value mapping")
    names = {f.name for f in fields(ScenarioConfig)}
    return ScenarioConfig.from_mapping({k: v for k, v in raw.items() if k in names})


def save_scenario_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_mapping(), fh, sort_keys=True)


@dataclass
class UserState:
    role: str
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)

    @property
    def speed_kmh(self) -> float:
        return float(np.linalg.norm(self.velocity) * 3.6)


@dataclass
class Snapshot:
    t: float
    bob: UserState
    eve: UserState
    bob_paths: PathSet
    eve_paths: PathSet
    noise_power: float


def array_regions(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-element movement regions inside the array aperture.

    Returns (bounds, centers): bounds is (N_t, 4) rows [ymin, ymax, zmin, zmax],
    centers is (N_t, 2) rows [yc, zc]. Element n = iv * n_h + ih sits at grid
    cell (iv, ih); centers are one region side apart in y and z.
    """
    rs = cfg.region_side_m
    half_ap = cfg.aperture_side_m / 2.0
    yc = (np.arange(cfg.n_h) - (cfg.n_h - 1) / 2.0) * rs
    zc = (np.arange(cfg.n_v) - (cfg.n_v - 1) / 2.0) * rs
    if np.any(np.abs(yc) + rs / 2.0 > half_ap + 1e-12) or \
            np.any(np.abs(zc) + rs / 2.0 > half_ap + 1e-12):
        raise ConfigError("region grid exceeds the aperture")
    centers = np.array([[y, z] for z in zc for y in yc])
    bounds = np.column_stack([
        centers[:, 0] - rs / 2.0, centers[:, 0] + rs / 2.0,
        centers[:, 1] - rs / 2.0, centers[:, 1] + rs / 2.0,
    ])
    return bounds, centers


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), purpose])))


def _spawn_user(role: str, rng: np.random.Generator, cfg: ScenarioConfig) -> UserState:
    speed = rng.uniform(*cfg.speed_kmh_range) / 3.6
    heading = rng.uniform(0.0, 2.0 * np.pi)
    spawn_az = rng.uniform(0.0, 2.0 * np.pi)
    dist = rng.uniform(*cfg.spawn_radius_m)
    pos = np.array([dist * np.cos(spawn_az), dist * np.sin(spawn_az), cfg.vehicle_height_m])
    vel = speed * np.array([np.cos(heading), np.sin(heading), 0.0])
    return UserState(role=role, position=pos, velocity=vel)


def generate_trajectory(seed: int, cfg: ScenarioConfig) -> dict[str, list[UserState]]:
    """Constant-velocity straight-line motion for Bob and Eve, one state per snapshot."""
    rng = _stream(seed, 0)
    out: dict[str, list[UserState]] = {}
    for role in (BOB, EVE):
        start = _spawn_user(role, rng, cfg)
        out[role] = [
            UserState(role=role,
                      position=start.position + start.velocity * (i * cfg.dt_s),
                      velocity=start.velocity.copy())
            for i in range(cfg.snapshots_per_trajectory)
        ]
    return out


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return np.mod(a + np.pi, 2.0 * np.pi) - np.pi


def synthesize_paths(cfg: ScenarioConfig, user: UserState,
                     rng: np.random.Generator | int,
                     prev: PathSet | None = None) -> PathSet:
    """One LoS plus p_nlos NLoS paths for the BS-user link.

    LoS gain follows a log-distance amplitude law with the deterministic
    carrier phase exp(-j 2 pi d / lambda). NLoS gains are complex Gaussian
    relative to the LoS amplitude, NLoS angles are LoS angles plus wrapped
    Gaussian offsets, and delays are exponential-flavored excess delays.
    Given prev, gains, angle offsets and delays evolve by a stationary AR(1)
    with coefficient ar_rho; Doppler is always recomputed from the current
    velocity as r_tx . v / lambda.
    """
    rng = np.random.default_rng(rng)
    lam = cfg.lambda_m
    d_vec = user.position - cfg.bs_pos
    dist = float(np.linalg.norm(d_vec))
    if dist < 1e-6:
        raise GeometryError("user coincides with the BS")
    r_los_tx = d_vec / dist
    r_los_rx = -r_los_tx
    a_los = (cfg.ref_distance_m / dist) ** (cfg.pathloss_exp / 2.0)
    g_los = a_los * np.exp(-1j * 2.0 * np.pi * dist / lam)

    p = cfg.p_nlos
    rho = cfg.ar_rho
    mix = np.sqrt(max(0.0, 1.0 - rho * rho))
    sigma_c2 = 10.0 ** (cfg.nlos_rel_db / 10.0) / max(p, 1)

    def draw_gains(n):
        return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(sigma_c2 / 2.0)

    def draw_offsets(n):
        return rng.normal(0.0, cfg.angle_spread_rad, size=(n, 4))  # tx az/el, rx az/el

    if prev is None or p == 0:
        c = draw_gains(p)
        off = draw_offsets(p)
        delays = rng.exponential(cfg.delay_spread_s, size=p)
    else:
        a_prev = abs(prev.gains[0])
        c_prev = prev.gains[1:] / a_prev
        th_tx0, ph_tx0 = unit_vector_angles(prev.r_tx[0])
        th_rx0, ph_rx0 = unit_vector_angles(prev.r_rx[0])
        off_prev = np.empty((p, 4))
        for i in range(p):
            th_t, ph_t = unit_vector_angles(prev.r_tx[i + 1])
            th_r, ph_r = unit_vector_angles(prev.r_rx[i + 1])
            off_prev[i] = [_wrap_angle(ph_t - ph_tx0), th_t - th_tx0,
                           _wrap_angle(ph_r - ph_rx0), th_r - th_rx0]
        c = rho * c_prev + mix * draw_gains(p)
        off = _wrap_angle(rho * off_prev + mix * draw_offsets(p))
        delays = cfg.delay_spread_s + rho * (prev.delay_s[1:] - cfg.delay_spread_s) \
            + mix * cfg.delay_spread_s * rng.standard_normal(p)
        delays = np.maximum(delays, 0.0)

    th_tx, ph_tx = unit_vector_angles(r_los_tx)
    th_rx, ph_rx = unit_vector_angles(r_los_rx)
    gains = [g_los]
    r_tx_rows = [r_los_tx]
    r_rx_rows = [r_los_rx]
    delay_rows = [0.0]
    for i in range(p):
        th_t = float(np.clip(th_tx + off[i, 1], 1e-9, np.pi - 1e-9))
        th_r = float(np.clip(th_rx + off[i, 3], 1e-9, np.pi - 1e-9))
        r_tx_rows.append(spherical_unit_vector(th_t, float(ph_tx + off[i, 0])))
        r_rx_rows.append(spherical_unit_vector(th_r, float(ph_rx + off[i, 2])))
        gains.append(a_los * c[i])
        delay_rows.append(float(delays[i]))
    r_tx = np.stack(r_tx_rows)
    doppler = r_tx @ user.velocity / lam
    return PathSet(gains=np.array(gains), r_tx=r_tx, r_rx=np.stack(r_rx_rows),
                   doppler_hz=doppler, delay_s=np.array(delay_rows), is_los_first=True)


def build_snapshot_sequence(seed: int, cfg: ScenarioConfig) -> list[Snapshot]:
    """Aligned Bob/Eve states and path sets at t_i = i * dt for one trajectory."""
    traj = generate_trajectory(seed, cfg)
    rng_bob = _stream(seed, 1)
    rng_eve = _stream(seed, 2)
    snaps: list[Snapshot] = []
    bob_paths = eve_paths = None
    for i in range(cfg.snapshots_per_trajectory):
        bob_paths = synthesize_paths(cfg, traj[BOB][i], rng_bob, bob_paths)
        eve_paths = synthesize_paths(cfg, traj[EVE][i], rng_eve, eve_paths)
        snaps.append(Snapshot(t=i * cfg.dt_s, bob=traj[BOB][i], eve=traj[EVE][i],
                              bob_paths=bob_paths, eve_paths=eve_paths,
                              noise_power=cfg.noise_power))
    return snaps


def doppler_consistent(snapshot: Snapshot, lambda_m: float, tol: float = 1e-9) -> bool:
    """Check w_p == r_tx . v / lambda for every path of both users."""
    for state, paths in ((snapshot.bob, snapshot.bob_paths), (snapshot.eve, snapshot.eve_paths)):
        expect = paths.r_tx @ state.velocity / lambda_m
        if np.any(np.abs(expect - paths.doppler_hz) > tol):
            return False
    return True
