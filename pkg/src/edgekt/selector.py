"""Key-frame selection: Kalman-filtered motion gate conjoined with an adaptive
binomial sampler, plus the busy gate that forbids concurrent adaptations.

The selection probability doubles when the training loss moves by more than
``sigma`` between adaptations and decays by 0.05 otherwise, floored at 0.05
so at least a trickle of frames is always sampled.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

import numpy as np

from .tensor import Tensor

P_FLOOR = 0.05
P_DECAY = 0.05
P_CAP = 1.0

# How many binomial successes out of two trials count as "selected".
BINOMIAL_MAPPINGS = ("any_success", "all_success", "single_trial")


@dataclass(frozen=True)
class KalmanState:
    """Scalar random-walk (constant-level) filter state."""

    estimate: float = 0.0
    variance: float = 1.0
    q: float = 1e-4  # process noise
    r: float = 1e-2  # measurement noise


def kalman_update(state: KalmanState, measurement: float) -> tuple[KalmanState, float]:
    """One predict-update cycle; returns (new state, innovation).

    Innovation is the residual against the prior estimate, before the
    measurement is folded in.
    """
    if not math.isfinite(measurement):
        raise ValueError("non-finite measurement")
    prior = state.estimate
    var_pred = state.variance + state.q
    gain = var_pred / (var_pred + state.r)
    estimate = prior + gain * (measurement - prior)
    variance = (1.0 - gain) * var_pred
    return replace(state, estimate=estimate, variance=variance), measurement - prior


def scene_change_statistic(current: Tensor, last_key: Tensor) -> float:
    """Mean absolute elementwise difference between two frames."""
    if current.shape != last_key.shape:
        raise ValueError(f"shape mismatch: {current.shape} vs {last_key.shape}")
    d = np.abs(current.data.astype(np.float64) - last_key.data.astype(np.float64))
    return float(d.mean())


@dataclass
class SelectorConfig:
    sigma: float = 0.5
    tau_motion: float = 0.005
    kalman_q: float = 2e-5
    kalman_r: float = 1e-2
    p_init: float = 1.0  # aggressive at stream start
    seed: int = 0
    binomial_mapping: str = "any_success"

    def __post_init__(self):
        if self.binomial_mapping not in BINOMIAL_MAPPINGS:
            raise ValueError(f"unknown binomial mapping {self.binomial_mapping!r}")
        if not P_FLOOR <= self.p_init <= P_CAP:
            raise ValueError("p_init must be in [0.05, 1.0]")


class KeyFrameSelector:
    """Owns the selection state: probability, last key frame, Kalman filter,
    loss history and the busy flag. Single-task owner; completion of an
    adaptation is reported back via :meth:`complete`."""

    def __init__(self, config: SelectorConfig | None = None):
        self.config = config or SelectorConfig()
        self.p: float = self.config.p_init
        self.last_key_frame: Tensor | None = None
        self.last_loss: float | None = None
        self.sigma: float = self.config.sigma
        self.kalman = KalmanState(q=self.config.kalman_q, r=self.config.kalman_r)
        self.busy: bool = False
        self.rng = random.Random(self.config.seed)

    # -- selection gates -----------------------------------------------------

    def motion_gate(self, frame: Tensor) -> bool:
        """True when the filtered scene-change innovation clears the gate.

        The first frame of a stream is forced True (a model must be trained
        at least once). Updates the Kalman filter as a side effect.
        """
        if self.last_key_frame is None:
            return True
        stat = scene_change_statistic(frame, self.last_key_frame)
        self.kalman, innovation = kalman_update(self.kalman, stat)
        return abs(innovation) > self.config.tau_motion

    def update_probability(self, new_loss: float) -> None:
        """Adapt the selection probability to the training-loss trend.

        The loss delta is taken as an absolute difference; a delta exactly
        equal to sigma takes the decay branch.
        """
        if not math.isfinite(new_loss):
            raise ValueError("non-finite loss")
        if self.last_loss is None:
            self.last_loss = new_loss
            return
        delta = abs(new_loss - self.last_loss)
        if delta > self.sigma:
            self.p = min(2.0 * self.p, P_CAP)
        else:
            self.p = max(self.p - P_DECAY, P_FLOOR)
        self.last_loss = new_loss

    def sample_binomial_gate(self) -> bool:
        """Draw two Bernoulli(p) trials; the mapping decides what counts.

        Always consumes exactly two draws from the seeded stream so the
        mapping choice never perturbs downstream randomness.
        """
        d1 = self.rng.random()
        d2 = self.rng.random()
        successes = (1 if d1 < self.p else 0) + (1 if d2 < self.p else 0)
        mapping = self.config.binomial_mapping
        if mapping == "any_success":
            return successes >= 1
        if mapping == "all_success":
            return successes == 2
        return d1 < self.p  # single_trial

    def select_key_frame(self, frame: Tensor) -> bool:
        """Full Eq.-1 decision with the no-queuing rule.

        Returns False immediately while an adaptation is in flight. The
        motion gate is evaluated first; the binomial sampler is only
        consulted (and its draws consumed) when motion passes.
        """
        if self.busy:
            return False
        if not self.motion_gate(frame):
            return False
        if not self.sample_binomial_gate():
            return False
        self.busy = True
        self.last_key_frame = frame
        return True

    def complete(self, final_loss: float | None = None) -> None:
        """Adaptation finished (or failed, when ``final_loss`` is None)."""
        if final_loss is not None:
            self.update_probability(final_loss)
        self.busy = False
