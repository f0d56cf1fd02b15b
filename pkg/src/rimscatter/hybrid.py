"""Warm-starting closed-loop adaptation from a solution on an assumed pattern."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closedloop import AnnealSettings, ClosedLoopTrace, SignalScenario, anneal_closed_loop, true_gain
from .core import DishConfig, Geometry, build_geometry, to_dbi, total_pattern
from .weights import PhaseAlphabet, WeightVector

DEFAULT_THRESHOLD_DBI = -40.0


def _default_true():
    return DishConfig()


def _default_assumed():
    # same physical dish; only the feed taper is misjudged
    return DishConfig().with_(feed_taper_q=1.5)


@dataclass
class HybridScenario:
    assumed_config: DishConfig = field(default_factory=_default_assumed)
    true_config: DishConfig = field(default_factory=_default_true)
    null_angle_rad: float = math.radians(1.75)
    alphabet: PhaseAlphabet = field(default_factory=lambda: PhaseAlphabet(4))
    seeds: tuple = tuple(range(10))
    stage1_decisions: int = 100_000
    stage2_decisions: int = 20_000
    threshold_dbi: float = DEFAULT_THRESHOLD_DBI
    noiseless: bool = True
    inr_db: float = 30.0
    samples_per_decision: int = 1000
    stage2_metric: str = "power"

    def __post_init__(self):
        a, t = self.assumed_config.as_dict(), self.true_config.as_dict()
        shared = ("diameter_m", "rim_width_m", "frequency_hz", "subtended_half_angle_rad", "element_side_wavelengths")
        bad = [k for k in shared if a[k] != t[k]]
        if bad:
            raise ValueError(f"assumed and true dishes must share geometry; differ in {bad}")


@dataclass
class HybridRun:
    seed: int
    stage1: ClosedLoopTrace
    stage1_weights: WeightVector
    stage1_true_gain_dbi: float
    warm: ClosedLoopTrace
    cold: ClosedLoopTrace
    warm_steps: int | None
    cold_steps: int | None

    @property
    def ratio(self) -> float:
        if self.warm_steps is None:
            return 0.0
        cold = self.cold_steps if self.cold_steps is not None else len(self.cold) - 1
        return cold / max(self.warm_steps, 1)


def stage1(assumed: Geometry, scenario: HybridScenario, seed: int):
    """Noiseless annealing on the assumed geometry only."""
    sc = SignalScenario(scenario.null_angle_rad, seed=seed)
    st = AnnealSettings(schedule_length=scenario.stage1_decisions, alphabet=scenario.alphabet, seed=seed)
    return anneal_closed_loop(sc, assumed, st, noiseless=True)


def stage2(true: Geometry, scenario: HybridScenario, seed: int, initial: WeightVector | None):
    sc = SignalScenario(
        scenario.null_angle_rad,
        inr_db=scenario.inr_db,
        samples_per_decision=scenario.samples_per_decision,
        seed=seed,
    )
    st = AnnealSettings(
        schedule_length=scenario.stage2_decisions,
        alphabet=scenario.alphabet,
        seed=seed,
        init="provided" if initial is not None else "random",
        initial=initial,
    )
    return anneal_closed_loop(sc, true, st, noiseless=scenario.noiseless, noiseless_metric=scenario.stage2_metric)


def run_hybrid(scenario: HybridScenario, assumed: Geometry | None = None, true: Geometry | None = None) -> list[HybridRun]:
    """Stage 1 on the assumed pattern, then warm and cold closed-loop runs on the true one.

    Stage 2 is a closed loop, so its noiseless measurement defaults to the
    noise-free received power G INR + 1 rather than the bare gain used by the
    open-loop stage 1.

    Steps are counted to the first decision whose true gain reaches
    ``scenario.threshold_dbi``.
    """
    assumed = assumed or build_geometry(scenario.assumed_config)
    true = true or build_geometry(scenario.true_config)
    if assumed.n_elements != true.n_elements:
        raise ValueError("assumed and true geometries tile different element counts")
    out = []
    for seed in scenario.seeds:
        s1 = stage1(assumed, scenario, seed)
        w = s1.weights
        g_true = float(to_dbi(true_gain(true, w, scenario.null_angle_rad)))
        warm = stage2(true, scenario, seed, w)
        cold = stage2(true, scenario, seed, None)
        out.append(
            HybridRun(
                seed,
                s1.trace,
                w,
                g_true,
                warm.trace,
                cold.trace,
                warm.trace.decisions_to(scenario.threshold_dbi),
                cold.trace.decisions_to(scenario.threshold_dbi),
            )
        )
    return out


@dataclass
class MismatchReport:
    angles_rad: np.ndarray
    believed_dbi: np.ndarray
    actual_dbi: np.ndarray

    @property
    def delta_db(self) -> np.ndarray:
        return self.actual_dbi - self.believed_dbi


def mismatch_report(assumed: Geometry, true: Geometry, w, angles) -> MismatchReport:
    """Gain of one weight vector on the believed and the actual pattern."""
    if assumed.n_elements != true.n_elements:
        raise ValueError("geometries have different element counts")
    w = np.asarray(getattr(w, "values", w))
    if w.size != true.n_elements:
        raise ValueError("weight vector length does not match the geometries")
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    a = total_pattern(assumed, w, angles)
    t = total_pattern(true, w, angles)
    return MismatchReport(angles, a.gain_dbi, t.gain_dbi)
