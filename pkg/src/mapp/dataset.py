"""Supervised windows from labeled trajectories.

Turns (snapshot, label) sequences into sliding windows of the five input
streams plus future-placement targets, fits grouped z-score statistics on
the training split, splits by trajectory, and persists everything through
the manifest+raw container.

Each window also carries the path physics of its last observed step and of
its future steps, so secrecy losses and evaluation can re-derive channels
at arbitrary placements without regenerating the scenario.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import PathSet, channel_vector
from .containers import CorruptDatasetError, read_container, write_container
from .pso import LabelRecord, PsoConfig, label_trajectory
from .scenario import (ConfigError, ScenarioConfig, Snapshot, array_regions,
                       build_snapshot_sequence)

log = logging.getLogger(__name__)

STREAM_NAMES = ("bob_pos", "eve_pos", "bob_csi", "eve_csi", "ma_pos")
SIGMA_FLOOR = 1e-8

# per-path physics row layout used in the aux tensors
PHYS_COLS = 7  # gain_re, gain_im, rtx_x, rtx_y, rtx_z, doppler_hz, delay_s


def pathset_to_rows(paths: PathSet) -> np.ndarray:
    rows = np.empty((len(paths), PHYS_COLS))
    rows[:, 0] = paths.gains.real
    rows[:, 1] = paths.gains.imag
    rows[:, 2:5] = paths.r_tx
    rows[:, 5] = paths.doppler_hz
    rows[:, 6] = paths.delay_s
    return rows


def rows_to_pathset(rows: np.ndarray) -> PathSet:
    return PathSet(gains=rows[:, 0] + 1j * rows[:, 1], r_tx=rows[:, 2:5],
                   r_rx=-rows[:, 2:5], doppler_hz=rows[:, 5], delay_s=rows[:, 6])


def interleave_complex(h: np.ndarray) -> np.ndarray:
    """Complex vector -> [re_0, im_0, re_1, im_1, ...]."""
    out = np.empty(2 * h.size)
    out[0::2] = h.real
    out[1::2] = h.imag
    return out


@dataclass
class SampleWindow:
    """One supervised sample: T observed steps, F future targets, plus physics."""

    bob_pos: np.ndarray
    eve_pos: np.ndarray
    bob_csi: np.ndarray
    eve_csi: np.ndarray
    ma_pos: np.ndarray
    target: np.ndarray
    traj_id: int
    start: int
    speed_kmh: float
    bob_phys: np.ndarray  # (F+1, P+1, PHYS_COLS); row 0 is the last observed step
    eve_phys: np.ndarray
    times: np.ndarray  # (F+1,)

    def streams(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in STREAM_NAMES}


@dataclass
class NormStats:
    """Grouped z-score statistics, one (mean, std) pair per input stream.

    Stds are floored at SIGMA_FLOOR; floored dimensions are flagged so
    constant streams normalize to zero instead of blowing up. The ma_pos
    pair doubles as the de-normalization parameters for predictions.
    """

    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]
    floored: dict[str, np.ndarray]

    @classmethod
    def fit(cls, streams: dict[str, np.ndarray]) -> "NormStats":
        mean, std, floored = {}, {}, {}
        for name, arr in streams.items():
            flat = arr.reshape(-1, arr.shape[-1]).astype(np.float64)
            mu = flat.mean(axis=0)
            sd = flat.std(axis=0)
            fl = sd < SIGMA_FLOOR
            if fl.any():
                log.warning("stream %s: %d zero-variance dims floored", name, int(fl.sum()))
            mean[name] = mu
            std[name] = np.where(fl, SIGMA_FLOOR, sd)
            floored[name] = fl
        return cls(mean=mean, std=std, floored=floored)

    def apply(self, name: str, arr: np.ndarray) -> np.ndarray:
        return (arr - self.mean[name]) / self.std[name]

    def unapply(self, name: str, arr: np.ndarray) -> np.ndarray:
        return arr * self.std[name] + self.mean[name]

    @property
    def placement_mean(self) -> np.ndarray:
        return self.mean["ma_pos"]

    @property
    def placement_std(self) -> np.ndarray:
        return self.std["ma_pos"]

    def to_mapping(self) -> dict:
        return {
            "mean": {k: v.tolist() for k, v in self.mean.items()},
            "std": {k: v.tolist() for k, v in self.std.items()},
            "floored": {k: v.astype(int).tolist() for k, v in self.floored.items()},
        }

    @classmethod
    def from_mapping(cls, m: dict) -> "NormStats":
        return cls(mean={k: np.array(v) for k, v in m["mean"].items()},
                   std={k: np.array(v) for k, v in m["std"].items()},
                   floored={k: np.array(v, dtype=bool) for k, v in m["floored"].items()})


def normalize(window: dict[str, np.ndarray], stats: NormStats) -> dict[str, np.ndarray]:
    """Z-score every input stream; non-stream keys pass through untouched."""
    return {k: stats.apply(k, v) if k in STREAM_NAMES else v for k, v in window.items()}


def denormalize_positions(pred: np.ndarray, stats: NormStats) -> np.ndarray:
    """Normalized (..., 3*N_t) placements back to meters."""
    return stats.unapply("ma_pos", pred)


def build_windows(snapshots: list[Snapshot], labels: list[LabelRecord],
                  cfg: ScenarioConfig, t_in: int, f_out: int, stride: int = 1,
                  traj_id: int = 0,
                  csi_rng: np.random.Generator | None = None) -> list[SampleWindow]:
    """Sliding windows over one labeled trajectory.

    Historical CSI is evaluated at the label placement of each step. Returns
    an empty list (with a warning) when the trajectory is shorter than
    t_in + f_out.
    """
    if len(snapshots) != len(labels):
        raise ValueError("snapshots and labels must align")
    total = t_in + f_out
    if len(snapshots) < total:
        log.warning("trajectory %d too short for T=%d F=%d: skipped", traj_id, t_in, f_out)
        return []
    lam, f_hz = cfg.lambda_m, cfg.f_hz
    n = len(snapshots)
    n_t = cfg.n_t

    csi = np.empty((n, 2, 2 * n_t))
    for i, (snap, lab) in enumerate(zip(snapshots, labels)):
        hb = channel_vector(snap.bob_paths, lab.placement, snap.t, lam, f_hz)
        he = channel_vector(snap.eve_paths, lab.placement, snap.t, lam, f_hz)
        if csi_rng is not None and cfg.csi_noise_std > 0:
            scale = cfg.csi_noise_std / np.sqrt(2.0)
            hb = hb + scale * (csi_rng.standard_normal(n_t) + 1j * csi_rng.standard_normal(n_t))
            he = he + scale * (csi_rng.standard_normal(n_t) + 1j * csi_rng.standard_normal(n_t))
        csi[i, 0] = interleave_complex(hb)
        csi[i, 1] = interleave_complex(he)

    placements = np.stack([lab.placement.coords.reshape(-1) for lab in labels])
    bob_pos = np.stack([s.bob.position for s in snapshots])
    eve_pos = np.stack([s.eve.position for s in snapshots])
    times = np.array([s.t for s in snapshots])

    windows = []
    for start in range(0, n - total + 1, stride):
        hist = slice(start, start + t_in)
        fut = slice(start + t_in, start + total)
        phys_steps = range(start + t_in - 1, start + total)
        windows.append(SampleWindow(
            bob_pos=bob_pos[hist].copy(),
            eve_pos=eve_pos[hist].copy(),
            bob_csi=csi[hist, 0].copy(),
            eve_csi=csi[hist, 1].copy(),
            ma_pos=placements[hist].copy(),
            target=placements[fut].copy(),
            traj_id=traj_id,
            start=start,
            speed_kmh=snapshots[0].bob.speed_kmh,
            bob_phys=np.stack([pathset_to_rows(snapshots[i].bob_paths) for i in phys_steps]),
            eve_phys=np.stack([pathset_to_rows(snapshots[i].eve_paths) for i in phys_steps]),
            times=times[list(phys_steps)].copy(),
        ))
    return windows


@dataclass
class WindowDataset:
    """Stacked windows plus scenario constants and (optionally) NormStats."""

    streams: dict[str, np.ndarray]  # each (N, T, D), float32
    target: np.ndarray  # (N, F, 3*N_t), float32
    bob_phys: np.ndarray  # (N, F+1, P+1, PHYS_COLS), float64
    eve_phys: np.ndarray
    times: np.ndarray  # (N, F+1), float64
    traj_ids: np.ndarray  # (N,), int64
    starts: np.ndarray
    speeds_kmh: np.ndarray  # (N,), float64
    constants: dict
    norm_stats: NormStats | None = None

    def __len__(self) -> int:
        return self.target.shape[0]

    @property
    def t_in(self) -> int:
        return self.streams["bob_pos"].shape[1]

    @property
    def f_out(self) -> int:
        return self.target.shape[1]

    @property
    def n_t(self) -> int:
        return self.target.shape[2] // 3

    def window(self, i: int) -> SampleWindow:
        return SampleWindow(
            **{name: self.streams[name][i] for name in STREAM_NAMES},
            target=self.target[i], traj_id=int(self.traj_ids[i]),
            start=int(self.starts[i]), speed_kmh=float(self.speeds_kmh[i]),
            bob_phys=self.bob_phys[i], eve_phys=self.eve_phys[i], times=self.times[i],
        )

    def subset(self, idx: np.ndarray) -> "WindowDataset":
        return WindowDataset(
            streams={k: v[idx] for k, v in self.streams.items()},
            target=self.target[idx], bob_phys=self.bob_phys[idx],
            eve_phys=self.eve_phys[idx], times=self.times[idx],
            traj_ids=self.traj_ids[idx], starts=self.starts[idx],
            speeds_kmh=self.speeds_kmh[idx], constants=dict(self.constants),
            norm_stats=self.norm_stats,
        )


def assemble_dataset(windows: list[SampleWindow], constants: dict) -> WindowDataset:
    if not windows:
        raise ConfigError("no windows to assemble")
    return WindowDataset(
        streams={name: np.stack([getattr(w, name) for w in windows]).astype(np.float32)
                 for name in STREAM_NAMES},
        target=np.stack([w.target for w in windows]).astype(np.float32),
        bob_phys=np.stack([w.bob_phys for w in windows]),
        eve_phys=np.stack([w.eve_phys for w in windows]),
        times=np.stack([w.times for w in windows]),
        traj_ids=np.array([w.traj_id for w in windows], dtype=np.int64),
        starts=np.array([w.start for w in windows], dtype=np.int64),
        speeds_kmh=np.array([w.speed_kmh for w in windows]),
        constants=constants,
    )


def scenario_constants(cfg: ScenarioConfig, t_in: int, f_out: int, seed: int) -> dict:
    bounds, centers = array_regions(cfg)
    return {
        "lambda_m": cfg.lambda_m, "f_hz": cfg.f_hz, "p_max": cfg.p_max,
        "noise_power": cfg.noise_power, "dt_s": cfg.dt_s, "n_t": cfg.n_t,
        "p_nlos": cfg.p_nlos, "t_in": t_in, "f_out": f_out, "seed": seed,
        "bs_pos": cfg.bs_pos.tolist(), "region_bounds": bounds.tolist(),
        "region_centers": centers.tolist(), "scenario": cfg.to_mapping(),
        "config_hash": cfg.config_hash(),
    }


def generate_dataset(cfg: ScenarioConfig, pso_cfg: PsoConfig, n_trajectories: int,
                     t_in: int = 16, f_out: int = 4, stride: int = 1,
                     seed: int = 0, warm_start: bool = True
                     ) -> tuple[WindowDataset, list[list[LabelRecord]]]:
    """Full pipeline: trajectories -> PSO labels -> stacked windows."""
    windows: list[SampleWindow] = []
    all_labels: list[list[LabelRecord]] = []
    for k in range(n_trajectories):
        traj_seed = int(np.random.SeedSequence([seed, k]).generate_state(1, np.uint64)[0] >> 1)
        snaps = build_snapshot_sequence(traj_seed, cfg)
        run_pso = PsoConfig(**{**pso_cfg.__dict__, "seed": traj_seed % (2 ** 31)})
        labels = label_trajectory(snaps, run_pso, cfg, warm_start=warm_start)
        all_labels.append(labels)
        csi_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, k, 3])))
        windows.extend(build_windows(snaps, labels, cfg, t_in, f_out, stride,
                                     traj_id=k, csi_rng=csi_rng))
    ds = assemble_dataset(windows, scenario_constants(cfg, t_in, f_out, seed))
    return ds, all_labels


def fit_norm_stats(ds: WindowDataset, indices: np.ndarray | None = None) -> NormStats:
    """Grouped statistics over the given (training) windows only."""
    sub = ds if indices is None else ds.subset(indices)
    return NormStats.fit(sub.streams)


def split_dataset(ds: WindowDataset, ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
                  seed: int = 0) -> dict[str, WindowDataset]:
    """Trajectory-level train/val/test split; no window shares a trajectory across splits.

    NormStats are fitted on the training split and attached to all three parts.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError("split ratios must sum to 1")
    ids = np.unique(ds.traj_ids)
    n = len(ids)
    n_val = int(round(ratios[1] * n))
    n_test = int(round(ratios[2] * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ConfigError(f"{n} trajectories cannot support a {ratios} split")
    perm = np.random.default_rng(seed).permutation(ids)
    groups = {
        "train": perm[:n_train],
        "val": perm[n_train:n_train + n_val],
        "test": perm[n_train + n_val:],
    }
    out = {}
    stats: NormStats | None = None
    for name in ("train", "val", "test"):
        mask = np.isin(ds.traj_ids, groups[name])
        part = ds.subset(np.nonzero(mask)[0])
        if name == "train":
            stats = NormStats.fit(part.streams)
        part.norm_stats = stats
        out[name] = part
    return out


def save_dataset(ds: WindowDataset, path) -> None:
    tensors = {f"stream_{k}": v for k, v in ds.streams.items()}
    tensors.update(target=ds.target, bob_phys=ds.bob_phys, eve_phys=ds.eve_phys,
                   times=ds.times, traj_ids=ds.traj_ids, starts=ds.starts,
                   speeds_kmh=ds.speeds_kmh)
    meta = {
        "kind": "mapp-dataset",
        "input_streams": list(STREAM_NAMES),
        "target": "target",
        "constants": ds.constants,
        "norm_stats": ds.norm_stats.to_mapping() if ds.norm_stats else None,
    }
    write_container(path, tensors, meta)


def load_dataset(path) -> WindowDataset:
    tensors, meta = read_container(path)
    if meta.get("kind") != "mapp-dataset":
        raise CorruptDatasetError("not a dataset container")
    if tuple(meta.get("input_streams", ())) != STREAM_NAMES or meta.get("target") != "target":
        raise CorruptDatasetError("dataset schema mismatch")
    streams = {k: tensors[f"stream_{k}"] for k in STREAM_NAMES}
    stats = meta.get("norm_stats")
    return WindowDataset(
        streams=streams, target=tensors["target"], bob_phys=tensors["bob_phys"],
        eve_phys=tensors["eve_phys"], times=tensors["times"],
        traj_ids=tensors["traj_ids"], starts=tensors["starts"],
        speeds_kmh=tensors["speeds_kmh"], constants=meta["constants"],
        norm_stats=NormStats.from_mapping(stats) if stats else None,
    )
