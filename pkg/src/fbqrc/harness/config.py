"""Experiment configuration and its YAML file format.

All frequencies and rates are dimensionless; time is measured in units of
the task's input step.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .. import system, tasks
from ..errors import ContractViolation
from ..reservoir import DEFAULT_N_FOCK, DEFAULT_SME_SUBSTEPS

UNITS_NOTE = (
    "# Units: all frequencies and rates are dimensionless; "
    "time is in units of the task input step.\n"
)

OPTIMIZERS = ("none", "brute", "brute-nm", "de")


@dataclass(frozen=True)
class TaskConfig:
    kind: str = "mackey-glass"
    delay: int = 20
    fade: int = 200
    train: int = 600
    test: int = 300
    dt_internal: float = 0.1
    n_ss: int = 16
    omega_ss: float = 10.0
    fade_waves: int = 10
    train_waves: int = 50
    test_waves: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("mackey-glass", "sine-square"):
            raise ContractViolation(f"unknown task kind {self.kind!r}")

    def build(self) -> tasks.TaskDataset:
        if self.kind == "mackey-glass":
            return tasks.mackey_glass_dataset(
                tasks.MackeyGlassParams(delay=self.delay), self.fade, self.train, self.test,
                self.dt_internal,
            )
        return tasks.sine_square_dataset(self.fade_waves, self.train_waves, self.test_waves,
                                         self.n_ss, self.omega_ss, self.seed)


@dataclass(frozen=True)
class ReservoirConfig:
    omega_c: float = 40.0
    omega_i: tuple = (20.0,)
    g_i: tuple = (30.0,)
    epsilon: float = 20.0
    kappa: float = 10.0
    n_fock: int = DEFAULT_N_FOCK
    substeps: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "omega_i", tuple(float(x) for x in self.omega_i))
        object.__setattr__(self, "g_i", tuple(float(x) for x in self.g_i))
        self.params()

    @property
    def n_atom(self) -> int:
        return len(self.omega_i)

    def params(self) -> system.ReservoirParams:
        return system.ReservoirParams(self.omega_c, self.omega_i, self.g_i, self.epsilon, self.kappa)


@dataclass(frozen=True)
class FeedbackSpec:
    channels: tuple = ()
    weights: tuple = ()
    optimizer: str = "none"
    bounds: tuple = (-3.0, 3.0)
    step: float = 0.5
    maxiter: int = 1000
    batches: int = 3
    nm_maxfev: int | None = None
    max_truncation: float | None = None  # top-two Fock population that voids a training point

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))
        w = tuple(float(v) for v in self.weights) or (0.0,) * len(self.channels)
        object.__setattr__(self, "weights", w)
        if len(w) != len(self.channels):
            raise ContractViolation(f"{len(self.channels)} channels but {len(w)} weights")
        if self.optimizer not in OPTIMIZERS:
            raise ContractViolation(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.optimizer != "none" and not self.channels:
            raise ContractViolation("an optimizer needs at least one feedback channel")


@dataclass(frozen=True)
class RegressionConfig:
    """``readouts`` selects the measured channels (1-based); empty means all."""

    mode: str = "linear"
    delta: float = 1e-10
    readouts: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "readouts", tuple(int(c) for c in self.readouts))
        if self.mode not in ("linear", "polynomial"):
            raise ContractViolation(f"unknown regression mode {self.mode!r}")


@dataclass(frozen=True)
class TrajectoryConfig:
    mode: str = "deterministic"
    count: int = 1
    seed: int = 0
    substeps: int = DEFAULT_SME_SUBSTEPS

    def __post_init__(self):
        if self.mode not in ("deterministic", "trajectories"):
            raise ContractViolation(f"unknown trajectory mode {self.mode!r}")
        if self.count < 1:
            raise ContractViolation(f"trajectory count must be >= 1, got {self.count}")


@dataclass(frozen=True)
class EsnConfig:
    n_neuron: int = 4
    n_measured: int | None = None
    diagonal_only: bool = False
    n_networks: int = 100
    seed: int = 0


@dataclass(frozen=True)
class OutputConfig:
    out_dir: str | None = None
    svg: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    task: TaskConfig = field(default_factory=TaskConfig)
    reservoir: ReservoirConfig = field(default_factory=ReservoirConfig)
    feedback: FeedbackSpec = field(default_factory=FeedbackSpec)
    regression: RegressionConfig = field(default_factory=RegressionConfig)
    trajectories: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    esn: EsnConfig = field(default_factory=EsnConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    metadata: dict = field(default_factory=dict)

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with selected fields of nested sections replaced.

        ``replace(task={"delay": 2}, name="x")`` updates ``task.delay`` only.
        """
        updates = {}
        for key, value in sections.items():
            current = getattr(self, key)
            if dataclasses.is_dataclass(current) and isinstance(value, dict):
                updates[key] = dataclasses.replace(current, **value)
            else:
                updates[key] = value
        return dataclasses.replace(self, **updates)

    def to_dict(self) -> dict:
        def plain(x):
            if isinstance(x, tuple):
                return [plain(v) for v in x]
            if isinstance(x, dict):
                return {k: plain(v) for k, v in x.items()}
            return x

        return {k: plain(v) for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data or {})
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ContractViolation(f"unknown config sections {sorted(unknown)}")
        kwargs = {}
        for f in fields(cls):
            if f.name not in data:
                continue
            value = data[f.name]
            section = _SECTIONS.get(f.name)
            if section is not None:
                value = _build_section(section, value or {}, f.name)
            kwargs[f.name] = value
        return cls(**kwargs)

    def dumps(self) -> str:
        return UNITS_NOTE + yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(yaml.safe_load(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.loads(Path(path).read_text())


_SECTIONS = {
    "task": TaskConfig,
    "reservoir": ReservoirConfig,
    "feedback": FeedbackSpec,
    "regression": RegressionConfig,
    "trajectories": TrajectoryConfig,
    "esn": EsnConfig,
    "output": OutputConfig,
}


def _build_section(kind, values: dict, name: str):
    unknown = set(values) - {f.name for f in fields(kind)}
    if unknown:
        raise ContractViolation(f"unknown keys in [{name}]: {sorted(unknown)}")
    return kind(**values)
