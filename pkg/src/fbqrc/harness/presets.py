"""Figure presets at desk scale, with full-scale variants behind ``full=True``.

Each preset records the figure and caption parameters it encodes in
``config.metadata``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import (EsnConfig, ExperimentConfig, FeedbackSpec, RegressionConfig, ReservoirConfig,
                     TaskConfig, TrajectoryConfig)

MG_CAPTION = "Delay=20, kappa=10, omega_c=40, epsilon=20; one atom omega_1=20, g_1=30"
SS_CAPTION = "omega_c=40, kappa=10, epsilon=20, omega_ss=10, N_ss=16"


@dataclass(frozen=True)
class Preset:
    """``kind`` is ``run``, ``sweep`` or ``train``; sweeps carry their axis values."""

    name: str
    kind: str
    config: ExperimentConfig
    axis: str | None = None
    values: tuple = ()
    full_values: tuple = ()
    full_overrides: dict = field(default_factory=dict)
    method: str | None = None

    def resolve(self, full: bool = False) -> tuple[ExperimentConfig, tuple]:
        config, values = self.config, self.values
        if full:
            config = config.replace(**self.full_overrides) if self.full_overrides else config
            values = self.full_values or values
        return config, values


def _mg(name, figure, caption=MG_CAPTION, **sections) -> ExperimentConfig:
    base = ExperimentConfig(name=name, metadata={"figure": figure, "caption": caption})
    return base.replace(**sections) if sections else base


def _ss(name, figure, **sections) -> ExperimentConfig:
    base = ExperimentConfig(name=name, task=TaskConfig(kind="sine-square"),
                            metadata={"figure": figure, "caption": SS_CAPTION})
    return base.replace(**sections) if sections else base


FOUR = FeedbackSpec(channels=(1, 2, 3, 4), optimizer="brute-nm", step=1.5, max_truncation=2e-3)

PRESETS: dict[str, Preset] = {}


def _add(p: Preset) -> None:
    PRESETS[p.name] = p


_add(Preset("fig2-traces", "run",
            _mg("fig2-traces", "Fig. 2", feedback=FeedbackSpec(channels=(1, 2, 3, 4))),
            full_overrides={"feedback": {"optimizer": "brute-nm"}}))
_add(Preset("fig3a-baseline", "run", _mg("fig3a-baseline", "Fig. 3(a), one atom, no feedback")))
_add(Preset("fig3a-feedback1", "run",
            _mg("fig3a-feedback1", "Fig. 3(h), one feedback channel, brute force step 0.5",
                reservoir=ReservoirConfig(n_fock=20),
                feedback=FeedbackSpec(channels=(2,), optimizer="brute", max_truncation=1e-3))))
_add(Preset("fig3a-atoms", "sweep",
            _mg("fig3a-atoms", "Fig. 3(a)", "g_i=30; omega_i ladders [20], [0,40], [0,20,40], "
                "[0,10,30,40], [0,10,20,30,40]; " + MG_CAPTION,
                reservoir=ReservoirConfig(n_fock=8)),
            axis="atoms", values=(1, 2, 3), full_values=(1, 2, 3, 4, 5),
            full_overrides={"reservoir": {"n_fock": 15}}))
_add(Preset("fig3a-atoms-poly", "sweep",
            _mg("fig3a-atoms-poly", "Fig. 3(a) dashed", "polynomial regression; " + MG_CAPTION,
                reservoir=ReservoirConfig(n_fock=8), regression=RegressionConfig(mode="polynomial")),
            axis="atoms", values=(1, 2, 3), full_values=(1, 2, 3, 4, 5),
            full_overrides={"reservoir": {"n_fock": 15}}))
_add(Preset("fig3b-atoms", "sweep",
            _mg("fig3b-atoms", "Fig. 3(b)", "omega_i=20; g_i ladders [30], [10,50], [10,30,50], "
                "[10,20,40,50], [10,20,30,40,50]; " + MG_CAPTION,
                reservoir=ReservoirConfig(n_fock=8)),
            axis="atoms-g", values=(1, 2, 3), full_values=(1, 2, 3, 4, 5),
            full_overrides={"reservoir": {"n_fock": 15}}))
_add(Preset("fig3c-unmeasured", "sweep",
            _mg("fig3c-unmeasured", "Fig. 3(c)", "4 readouts from the cavity and one atom "
                "(omega=20, g=30); " + MG_CAPTION, reservoir=ReservoirConfig(n_fock=8)),
            axis="unmeasured", values=(0, 1, 2), full_values=(0, 1, 2, 3, 4),
            full_overrides={"reservoir": {"n_fock": 15}}))
_add(Preset("fig3h-optimizers", "train",
            _mg("fig3h-optimizers", "Fig. 3(h)",
                feedback=FeedbackSpec(channels=(1,), optimizer="brute-nm", maxiter=30, batches=3)),
            method="brute-nm",
            full_overrides={"feedback": {"channels": (1, 2, 3, 4), "weights": (0.0,) * 4,
                                         "maxiter": 1000, "step": 0.5}}))
_add(Preset("fig4a-delay", "sweep", _mg("fig4a-delay", "Fig. 4(a)"),
            axis="delay", values=(2, 20, 200), full_values=(2, 10, 20, 50, 100, 150, 200)))
_add(Preset("fig4d-kappa", "sweep", _mg("fig4d-kappa", "Fig. 4(d)"),
            axis="kappa", values=(10.0, 1e5), full_values=(1.0, 10.0, 100.0, 1e3, 1e4, 1e5)))
_add(Preset("fig6a-atoms", "sweep",
            _ss("fig6a-atoms", "Fig. 6(a)", reservoir=ReservoirConfig(n_fock=8, substeps=20)),
            axis="atoms", values=(1, 2), full_values=(1, 2, 3, 4, 5),
            full_overrides={"reservoir": {"n_fock": 15}}))
_add(Preset("fig6b-atoms", "sweep",
            _ss("fig6b-atoms", "Fig. 6(b)", reservoir=ReservoirConfig(n_fock=8, substeps=20)),
            axis="atoms-g", values=(1, 2), full_values=(1, 2, 3, 4, 5),
            full_overrides={"reservoir": {"n_fock": 15}}))
_add(Preset("fig7a-trajectories", "sweep",
            _mg("fig7a-trajectories", "Fig. 7(a), no feedback",
                task=TaskConfig(fade=50, train=150, test=100),
                reservoir=ReservoirConfig(n_fock=6),
                trajectories=TrajectoryConfig(mode="trajectories", substeps=50)),
            axis="trajectories", values=(10, 100), full_values=(10, 100, 1000, 10000),
            full_overrides={"task": {"fade": 200, "train": 600, "test": 300},
                            "reservoir": {"n_fock": 15},
                            "trajectories": {"substeps": 200}}))
_add(Preset("figS1-scan", "sweep",
            _mg("figS1-scan", "Supplementary Fig. S1(a), V_1 cross-section",
                feedback=FeedbackSpec(channels=(1,))),
            axis="weight", values=(-3.0, -1.5, 0.0, 1.5, 3.0),
            full_values=tuple(-3.0 + 0.5 * i for i in range(13))))
_add(Preset("figS2a-esn-measured4", "sweep",
            _mg("figS2a-esn-measured4", "Supplementary Fig. S2(a), 4 measured neurons",
                esn=EsnConfig(n_measured=4)),
            axis="esn_size", values=(4, 8, 12), full_values=tuple(range(4, 13)),
            full_overrides={"esn": {"n_networks": 1000}}))
_add(Preset("figS2c-esn-full", "sweep",
            _mg("figS2c-esn-full", "Supplementary Fig. S2(c), all neurons measured"),
            axis="esn_size", values=(4, 8, 12), full_values=tuple(range(4, 13)),
            full_overrides={"esn": {"n_networks": 1000}}))
_add(Preset("figS2d-esn-diagonal", "sweep",
            _mg("figS2d-esn-diagonal", "Supplementary Fig. S2(d), diagonal A",
                esn=EsnConfig(diagonal_only=True)),
            axis="esn_size", values=(4, 8, 12), full_values=tuple(range(4, 13)),
            full_overrides={"esn": {"n_networks": 1000}}))
_add(Preset("figS3-esn-larger", "sweep",
            _mg("figS3-esn-larger", "Supplementary Fig. S3"),
            axis="esn_size", values=(12, 25, 50), full_values=(12, 25, 50, 100, 200),
            full_overrides={"esn": {"n_networks": 1000}}))
_add(Preset("figS4-nss", "sweep",
            _ss("figS4-nss", "Supplementary Fig. S4(b), polynomial regression",
                reservoir=ReservoirConfig(omega_i=(0.0, 40.0), g_i=(30.0, 30.0), n_fock=6,
                                          substeps=20),
                regression=RegressionConfig(mode="polynomial")),
            axis="nss", values=(16, 64), full_values=(8, 16, 32, 64),
            full_overrides={"reservoir": {"omega_i": (0.0, 10.0, 20.0, 30.0, 40.0),
                                          "g_i": (30.0,) * 5, "n_fock": 15}}))


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None
