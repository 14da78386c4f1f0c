"""Ground-truth placement labels via constrained particle swarm optimization.

Each snapshot is treated as an independent static secrecy-maximization
problem over the 2*N_t free (y, z) coordinates. Constraints are handled by
a quadratic penalty during the search, a hard clamp into each element's
region every iteration, and a final minimum-displacement spacing repair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import MAPlacement, channel_vectors_batch
from .scenario import ScenarioConfig, Snapshot, array_regions


@dataclass
class PsoConfig:
    swarm_size: int = 50
    iterations: int = 100
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    velocity_clamp: float = 0.2
    penalty_weight: float = 1e3
    seed: int = 0

    def __post_init__(self):
        if min(self.swarm_size, self.iterations) < 1:
            raise ValueError("swarm_size and iterations must be positive")
        if not 0.0 < self.inertia < 1.0:
            raise ValueError("inertia must lie in (0, 1)")
        if min(self.cognitive, self.social, self.velocity_clamp) <= 0:
            raise ValueError("PSO coefficients must be positive")
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be nonnegative")


@dataclass
class LabelRecord:
    placement: MAPlacement
    secrecy_rate: float
    fitness_history: list[float] = field(default_factory=list)
    feasible: bool = False


def region_center_placement(cfg: ScenarioConfig) -> MAPlacement:
    """Static reference: every element parked at its region center."""
    _, centers = array_regions(cfg)
    coords = np.zeros((cfg.n_t, 3))
    coords[:, 1:] = centers
    return MAPlacement(coords)


def _coords_from_flat(flat: np.ndarray, n_t: int) -> np.ndarray:
    """(B, 2*N_t) y/z vectors -> (B, N_t, 3) coordinates with x = 0."""
    coords = np.zeros((flat.shape[0], n_t, 3))
    coords[:, :, 1:] = flat.reshape(flat.shape[0], n_t, 2)
    return coords


def _secrecy_batch(coords: np.ndarray, snapshot: Snapshot, cfg: ScenarioConfig) -> np.ndarray:
    """Vectorized [C_b - C_e]^+ under MRT for a batch of placements."""
    lam, f = cfg.lambda_m, cfg.f_hz
    hb = channel_vectors_batch(snapshot.bob_paths, coords, snapshot.t, lam, f)
    he = channel_vectors_batch(snapshot.eve_paths, coords, snapshot.t, lam, f)
    nb2 = np.sum(np.abs(hb) ** 2, axis=1)
    sig_b = cfg.p_max * nb2
    cross = np.abs(np.einsum("bn,bn->b", np.conj(he), hb)) ** 2
    sig_e = np.divide(cfg.p_max * cross, nb2, out=np.zeros_like(nb2), where=nb2 > 0)
    cb = np.log2(1.0 + sig_b / snapshot.noise_power)
    ce = np.log2(1.0 + sig_e / snapshot.noise_power)
    return np.maximum(cb - ce, 0.0)


def _violations_batch(coords: np.ndarray, bounds: np.ndarray, lambda_m: float
                      ) -> tuple[np.ndarray, np.ndarray]:
    """(spacing penalty, region penalty), both summed squared violations per placement."""
    y, z = coords[:, :, 1], coords[:, :, 2]
    dy = np.maximum(bounds[None, :, 0] - y, 0.0) + np.maximum(y - bounds[None, :, 1], 0.0)
    dz = np.maximum(bounds[None, :, 2] - z, 0.0) + np.maximum(z - bounds[None, :, 3], 0.0)
    region = np.sum(dy ** 2 + dz ** 2, axis=1)
    n_t = coords.shape[1]
    if n_t < 2:
        return np.zeros(coords.shape[0]), region
    diff = coords[:, :, None, :] - coords[:, None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    iu = np.triu_indices(n_t, k=1)
    gap = np.maximum(lambda_m / 2.0 - dist[:, iu[0], iu[1]], 0.0)
    return np.sum(gap ** 2, axis=1), region


def secrecy_fitness(placement: MAPlacement | np.ndarray, snapshot: Snapshot,
                    cfg: ScenarioConfig, pso_cfg: PsoConfig | None = None) -> float:
    """Secrecy objective with quadratic infeasibility penalty. Higher is better."""
    mu = (pso_cfg or PsoConfig()).penalty_weight
    coords = placement.coords if isinstance(placement, MAPlacement) else np.asarray(placement)
    coords = coords[None] if coords.ndim == 2 else coords
    bounds, _ = array_regions(cfg)
    secrecy = _secrecy_batch(coords, snapshot, cfg)
    spacing, region = _violations_batch(coords, bounds, cfg.lambda_m)
    return float((secrecy - mu * (spacing + region))[0])


def repair_spacing(coords: np.ndarray, bounds: np.ndarray, lambda_m: float,
                   centers: np.ndarray, max_rounds: int = 100) -> np.ndarray:
    """Greedy minimum-displacement repair of lambda/2 spacing violations.

    Violating pairs are pushed apart symmetrically along their separation
    axis and clamped back into their regions. If that loop stalls, the still
    violating elements snap to their region centers, which are always
    mutually feasible.
    """
    out = coords.copy()
    n_t = out.shape[0]
    target = lambda_m / 2.0 * (1.0 + 1e-9) + 1e-15
    for _ in range(max_rounds):
        diff = out[:, None, :] - out[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        iu = np.triu_indices(n_t, k=1)
        bad = [(i, j) for i, j in zip(*iu) if dist[i, j] < lambda_m / 2.0]
        if not bad:
            return out
        for i, j in bad:
            d = out[i] - out[j]
            nrm = np.linalg.norm(d)
            if nrm < 1e-15:
                axis = np.zeros(3)
                cdir = centers[i] - centers[j]
                axis[1:] = cdir / np.linalg.norm(cdir) if np.linalg.norm(cdir) > 0 else (1.0, 0.0)
            else:
                axis = d / nrm
            push = (target - nrm) / 2.0
            out[i] += push * axis
            out[j] -= push * axis
        out[:, 1] = np.clip(out[:, 1], bounds[:, 0], bounds[:, 1])
        out[:, 2] = np.clip(out[:, 2], bounds[:, 2], bounds[:, 3])
    # fallback: park whatever still violates at its region center
    diff = out[:, None, :] - out[None, :, :]
    dist = np.linalg.norm(diff, axis=-1) + np.diag(np.full(n_t, np.inf))
    for n in np.nonzero(dist.min(axis=1) < lambda_m / 2.0)[0]:
        out[n, 0] = 0.0
        out[n, 1:] = centers[n]
    return out


def optimize_placement(snapshot: Snapshot, cfg: PsoConfig,
                       scenario: ScenarioConfig,
                       warm_start: MAPlacement | None = None) -> LabelRecord:
    """Best feasible placement found by one PSO run on one snapshot.

    One particle always starts at the region centers (and one at the warm
    start when given), so the returned fitness can never fall below the
    static-array reference.
    """
    bounds, centers = array_regions(scenario)
    n_t = scenario.n_t
    dim = 2 * n_t
    lo = bounds[:, [0, 2]].reshape(-1)
    hi = bounds[:, [1, 3]].reshape(-1)
    vmax = cfg.velocity_clamp * scenario.region_side_m

    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(lo, hi, size=(cfg.swarm_size, dim))
    x[0] = centers.reshape(-1)
    if warm_start is not None:
        x[1 % cfg.swarm_size] = warm_start.coords[:, 1:].reshape(-1)
    v = rng.uniform(-vmax, vmax, size=(cfg.swarm_size, dim))

    def fitness(flat: np.ndarray) -> np.ndarray:
        coords = _coords_from_flat(flat, n_t)
        secrecy = _secrecy_batch(coords, snapshot, scenario)
        spacing, region = _violations_batch(coords, bounds, scenario.lambda_m)
        return secrecy - cfg.penalty_weight * (spacing + region)

    fit = fitness(x)
    if np.all(np.isnan(fit)):
        raise FloatingPointError("PSO swarm produced no finite fitness")
    pbest, pfit = x.copy(), fit.copy()
    g = int(np.argmax(pfit))
    gbest, gfit = pbest[g].copy(), float(pfit[g])
    history = [gfit]

    for _ in range(cfg.iterations):
        r1 = rng.random((cfg.swarm_size, dim))
        r2 = rng.random((cfg.swarm_size, dim))
        v = cfg.inertia * v + cfg.cognitive * r1 * (pbest - x) + cfg.social * r2 * (gbest - x)
        v = np.clip(v, -vmax, vmax)
        x = np.clip(x + v, lo, hi)
        fit = fitness(x)
        improved = fit > pfit
        pbest[improved] = x[improved]
        pfit[improved] = fit[improved]
        g = int(np.argmax(pfit))
        if pfit[g] > gfit:
            gbest, gfit = pbest[g].copy(), float(pfit[g])
        history.append(gfit)

    coords = _coords_from_flat(gbest[None], n_t)[0]
    coords = repair_spacing(coords, bounds, scenario.lambda_m, centers)
    placement = MAPlacement(coords)
    secrecy = float(_secrecy_batch(coords[None], snapshot, scenario)[0])
    return LabelRecord(placement=placement, secrecy_rate=secrecy,
                       fitness_history=history,
                       feasible=placement.is_feasible(bounds, scenario.lambda_m))


def label_trajectory(snapshots: list[Snapshot], cfg: PsoConfig,
                     scenario: ScenarioConfig, warm_start: bool = True) -> list[LabelRecord]:
    """One label per snapshot, optionally seeding each swarm with the previous solution."""
    if not snapshots:
        raise ValueError("no snapshots to label")
    records: list[LabelRecord] = []
    prev: MAPlacement | None = None
    for i, snap in enumerate(snapshots):
        run_cfg = PsoConfig(**{**cfg.__dict__, "seed": cfg.seed + i})
        rec = optimize_placement(snap, run_cfg, scenario,
                                 warm_start=prev if warm_start else None)
        records.append(rec)
        prev = rec.placement
    return records
