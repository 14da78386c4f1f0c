"""Secrecy-centric evaluation metrics and model cost accounting."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

REPORT_COLUMNS = ["model", "asr_bps_hz", "spsc", "nmse", "param_count", "flops", "inference_ms"]


@dataclass
class MetricsReport:
    model: str
    asr: float
    spsc: float
    nmse: float
    param_count: int
    flops: int
    inference_ms: float

    def __post_init__(self):
        if not 0.0 <= self.spsc <= 1.0:
            raise ValueError("spsc must lie in [0, 1]")
        if self.nmse < 0 and np.isfinite(self.nmse):
            raise ValueError("nmse must be nonnegative")

    def row(self) -> list:
        return [self.model, self.asr, self.spsc, self.nmse,
                self.param_count, self.flops, self.inference_ms]


def asr(cb, ce) -> float:
    """Time-averaged clamped capacity gap, (1/F) sum [cb_t - ce_t]^+."""
    cb = np.asarray(cb, dtype=float)
    ce = np.asarray(ce, dtype=float)
    if cb.shape != ce.shape or cb.size == 0:
        raise ValueError("cb and ce must be nonempty and equal length")
    return float(np.mean(np.maximum(cb - ce, 0.0)))


def spsc(window_rates) -> float:
    """Fraction of evaluation windows whose secrecy rate is strictly positive."""
    rates = np.asarray(window_rates, dtype=float)
    if rates.size == 0:
        raise ValueError("need at least one window")
    return float(np.mean(rates > 0.0))


def nmse(target: np.ndarray, pred: np.ndarray) -> float:
    """Frobenius ratio ||target - pred||^2 / ||target||^2, batch-averaged.

    Accepts a single (F, D) pair or a batched (B, F, D) pair; with a batch,
    the ratio is computed per sample and then averaged.
    """
    target = np.asarray(target, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if target.shape != pred.shape:
        raise ValueError("target and pred shapes differ")
    if target.ndim <= 2:
        target = target[None]
        pred = pred[None]
    flat_t = target.reshape(target.shape[0], -1)
    flat_p = pred.reshape(pred.shape[0], -1)
    denom = np.sum(flat_t ** 2, axis=1)
    if np.any(denom == 0):
        raise ValueError("target with zero Frobenius norm")
    return float(np.mean(np.sum((flat_t - flat_p) ** 2, axis=1) / denom))


def count_params(model) -> int:
    """Trainable scalar count of a torch module; 0 for parameter-free predictors."""
    params = getattr(model, "parameters", None)
    if params is None:
        return 0
    return sum(int(np.prod(p.shape)) for p in model.parameters() if p.requires_grad)


def linear_flops(d_in: int, d_out: int, tokens: int = 1) -> int:
    """Dense layer cost: one multiply-add per weight per token, counted as 2 FLOPs."""
    return 2 * d_in * d_out * tokens


def attention_flops(t_q: int, t_kv: int, d_model: int, heads: int = 1) -> int:
    """QKV/output projections plus the two score/value matmuls of one attention block."""
    proj = linear_flops(d_model, d_model, t_q) + 2 * linear_flops(d_model, d_model, t_kv) \
        + linear_flops(d_model, d_model, t_q)
    scores = 2 * t_q * t_kv * d_model  # QK^T across all heads
    values = 2 * t_q * t_kv * d_model
    return proj + scores + values


def account_cost(model, sample_window=None, time_forward: bool = False,
                 n_timed: int = 100, n_warmup: int = 10) -> tuple[int, int, float]:
    """(param_count, analytic flops, inference_ms) for one predictor.

    flops comes from the predictor's analytic_flops() (matmul multiply-adds
    x2 for one single-sample forward). Latency is the median of n_timed
    single-sample forwards after n_warmup warmups, and is only measured when
    time_forward is set because wall-clock timing is not reproducible.
    """
    n_params = count_params(model)
    flops = int(model.analytic_flops()) if hasattr(model, "analytic_flops") else 0
    inference_ms = float("nan")
    if time_forward and sample_window is not None:
        for _ in range(n_warmup):
            model.predict(sample_window)
        samples = []
        for _ in range(n_timed):
            t0 = time.perf_counter()
            model.predict(sample_window)
            samples.append((time.perf_counter() - t0) * 1e3)
        inference_ms = float(np.median(samples))
    return n_params, flops, inference_ms


def write_reports_csv(path, reports: list[MetricsReport]) -> None:
    """One row per model, columns in fixed order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for rep in reports:
            writer.writerow(rep.row())
