"""Benchmark datasets: Mackey-Glass forecasting and sine/square classification."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class TaskDataset:
    """Input ``f_k`` and target series with ``fade | train | test`` boundaries."""

    name: str
    inputs: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    fade_end: int
    train_end: int
    dt: float

    def __post_init__(self):
        if self.inputs.shape != self.targets.shape or self.inputs.ndim != 1:
            raise ContractViolation("inputs and targets must be 1-D arrays of equal length")
        if not 0 < self.fade_end < self.train_end < self.test_end:
            raise ContractViolation(
                f"split boundaries must satisfy 0 < {self.fade_end} < {self.train_end} < {self.test_end}"
            )
        if not np.all(np.isfinite(self.targets)):
            raise ContractViolation("targets contain non-finite values")

    @property
    def test_end(self) -> int:
        return len(self.inputs)

    @property
    def train(self) -> slice:
        return slice(self.fade_end, self.train_end)

    @property
    def test(self) -> slice:
        return slice(self.train_end, self.test_end)

    def split_labels(self) -> np.ndarray:
        labels = np.empty(len(self.inputs), dtype=object)
        labels[: self.fade_end] = "fade"
        labels[self.train] = "train"
        labels[self.test] = "test"
        return labels

    def truncated(self, length: int) -> "TaskDataset":
        """First ``length`` samples; the test segment shrinks first."""
        if length <= self.train_end:
            raise ContractViolation(f"length {length} leaves no test segment")
        return TaskDataset(self.name, self.inputs[:length], self.targets[:length],
                           self.fade_end, self.train_end, self.dt)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "t", "f", "target", "split"])
            for k, (f, y, s) in enumerate(zip(self.inputs, self.targets, self.split_labels())):
                w.writerow([k, repr(k * self.dt), repr(float(f)), repr(float(y)), s])


@dataclass(frozen=True)
class MackeyGlassParams:
    beta: float = 0.2
    gamma: float = 0.1
    tau: float = 17.0
    power: int = 10
    buffer: float = 1000.0
    dt_sample: float = 1.0
    delay: int = 20
    history: float = 1.2

    def __post_init__(self):
        if not (self.beta > 0 and self.gamma > 0 and self.tau > 0):
            raise ContractViolation("beta, gamma and tau must be positive")
        if self.delay < 0 or int(self.delay) != self.delay:
            raise ContractViolation(f"delay must be a non-negative integer, got {self.delay}")


def mackey_glass_series(params: MackeyGlassParams, length: int, dt_internal: float = 0.1) -> np.ndarray:
    """Sampled Mackey-Glass series after discarding ``params.buffer`` time units.

    RK4 on the delay equation with a constant history. Delayed values off
    the grid come from a cubic Hermite interpolant of the stored values and
    slopes; plain linear interpolation is only second order and, amplified by
    the chaotic dynamics over the buffer, misses the step-halving check.
    """
    ratio = params.dt_sample / dt_internal
    if abs(ratio - round(ratio)) > 1e-9:
        raise ContractViolation(f"dt_internal={dt_internal} must divide dt_sample={params.dt_sample}")
    per_sample = int(round(ratio))
    lag = params.tau / dt_internal
    lag_int = int(math.floor(lag + 1e-12))
    n_hist = lag_int + 2
    n_steps = int(round((params.buffer + (length - 1) * params.dt_sample) / dt_internal))

    beta, gamma, p, h = params.beta, params.gamma, params.power, dt_internal
    x = np.empty(n_hist + n_steps)
    x[:n_hist] = params.history
    dx = np.zeros_like(x)  # slopes; zero on the constant history

    def delayed(i, offset):
        # value at time (i + offset) * h - tau, offset in {0, 0.5, 1}
        pos = i + offset - lag
        j = int(math.floor(pos))
        w = pos - j
        if w <= 0:
            return x[j]
        w2, w3 = w * w, w * w * w
        if j < n_hist - 1:
            return x[j]  # t <= 0: constant history, slope jumps at t = 0
        return ((2 * w3 - 3 * w2 + 1) * x[j] + (w3 - 2 * w2 + w) * h * dx[j]
                + (3 * w2 - 2 * w3) * x[j + 1] + (w3 - w2) * h * dx[j + 1])

    def rhs(xt, xd):
        return beta * xd / (1.0 + xd**p) - gamma * xt

    for i in range(n_hist - 1, n_hist - 1 + n_steps):
        xt = x[i]
        d0, dh, d1 = delayed(i, 0.0), delayed(i, 0.5), delayed(i, 1.0)
        k1 = rhs(xt, d0)
        dx[i] = k1
        k2 = rhs(xt + 0.5 * h * k1, dh)
        k3 = rhs(xt + 0.5 * h * k2, dh)
        k4 = rhs(xt + h * k3, d1)
        x[i + 1] = xt + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    start = n_hist - 1 + int(round(params.buffer / dt_internal))
    return x[start : start + (length - 1) * per_sample + 1 : per_sample].copy()


def mackey_glass_dataset(params: MackeyGlassParams | None = None, fade_len: int = 200,
                         train_len: int = 600, test_len: int = 300,
                         dt_internal: float = 0.1) -> TaskDataset:
    """Forecasting task with targets ``f_{k + delay}``."""
    params = params or MackeyGlassParams()
    if min(fade_len, train_len, test_len) < 1:
        raise ContractViolation("segment lengths must be >= 1")
    total = fade_len + train_len + test_len
    series = mackey_glass_series(params, total + params.delay, dt_internal)
    return TaskDataset(
        name=f"mackey-glass(delay={params.delay})",
        inputs=series[:total],
        targets=series[params.delay : params.delay + total],
        fade_end=fade_len,
        train_end=fade_len + train_len,
        dt=params.dt_sample,
    )


def sine_square_dataset(n_fade: int = 10, n_train: int = 50, n_test: int = 50, n_ss: int = 16,
                        omega_ss: float = 10.0, seed: int = 0) -> TaskDataset:
    """Random sequence of one-period sine (target 1) and square (target 0) waveforms.

    Sine samples are ``1 + sin(omega t)`` from phase 0; square samples are 2
    for the first half period and 0 for the second.
    """
    if n_ss < 2 or n_ss % 2:
        raise ContractViolation(f"n_ss must be an even integer >= 2, got {n_ss}")
    n_wave = n_fade + n_train + n_test
    rng = np.random.default_rng(seed)
    is_sine = rng.integers(0, 2, size=n_wave).astype(bool)
    dt = 2 * math.pi / (n_ss * omega_ss)
    phase = omega_ss * dt * np.arange(n_ss)
    sine = 1.0 + np.sin(phase)
    square = np.where(np.arange(n_ss) < n_ss // 2, 2.0, 0.0)
    inputs = np.concatenate([sine if s else square for s in is_sine])
    targets = np.repeat(is_sine.astype(float), n_ss)
    return TaskDataset(
        name=f"sine-square(n_ss={n_ss})",
        inputs=inputs,
        targets=targets,
        fade_end=n_fade * n_ss,
        train_end=(n_fade + n_train) * n_ss,
        dt=dt,
    )


def load_csv(path) -> dict:
    """Read a dataset CSV back into column arrays."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        "k": np.array([int(r["k"]) for r in rows]),
        "t": np.array([float(r["t"]) for r in rows]),
        "f": np.array([float(r["f"]) for r in rows]),
        "target": np.array([float(r["target"]) for r in rows]),
        "split": [r["split"] for r in rows],
    }
