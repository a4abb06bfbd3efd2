"""Recursive gain inference: the compressor that falls out of the model.

Conditioning the generative model on the observed level sequence turns
gain estimation into a one-dimensional filtering recursion. The update is
implemented twice on purpose:

* :func:`kalman_step` is the closed innovation form, the shape a DSP
  engineer would ship;
* :func:`message_step` executes the thirteen-message schedule on the
  per-frame factor graph.

The two agree to numerical precision, which the test suite leans on
heavily. Everything downstream (sequences, dynamic range characterization,
CSV export) builds on the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import graph as fg
from .messages import GaussianMessage
from .model import (
    DEFAULT_G0_PRIOR,
    ModelId,
    Theta,
    active_slope,
    build_sp_graph,
    thresholds,
    zurek_loss,
)


class CharacterizationDomainError(ValueError):
    """Probe levels outside the compressive region of the loss curve."""


@dataclass(frozen=True)
class GainState:
    """Filtered gain belief N(mean, variance) for one frame, in dB."""

    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise ValueError("gain state must be finite")
        if self.variance <= 0.0:
            raise ValueError(f"gain variance must be > 0, got {self.variance!r}")

    def sd(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class CompressionCharacterization:
    """Static and dynamic compressor figures extracted from the recursion."""

    compression_ratio: float
    attack_steps: int
    release_steps: int
    steady_gain_per_level: dict[float, float]


def kalman_step(prior: GainState, s: float, theta: Theta) -> GainState:
    """One innovation-form update of the gain belief.

    With the branch slope ``a`` picked by the observed level, predicted
    variance ``vu = 1/gain_precision + prior variance`` and Kalman gain
    ``K = a vu / (obs_variance + a^2 vu)``, the mean moves by K times the
    loudness-restoration residual and the variance contracts by (1 - K a).
    """
    if theta.gain_precision <= 0.0:
        raise ValueError(
            "kalman_step needs gain_precision > 0; the unconstrained-gain "
            "model has no transition to filter through"
        )
    a = active_slope(s, theta.hearing)
    vu = 1.0 / theta.gain_precision + prior.variance
    k = a * vu / (theta.obs_variance + a * a * vu)
    residual = s - zurek_loss(s + prior.mean, theta.hearing)
    mean = prior.mean + k * residual
    variance = (1.0 - k * a) * vu
    return GainState(mean, variance)


def message_step(prior: GainState, s: float, theta: Theta) -> GainState:
    """The same update executed as thirteen messages on the frame graph."""
    ts = build_sp_graph(theta, s, GaussianMessage(prior.mean, prior.variance))
    fg.execute_schedule(ts.graph, ts.schedule)
    edge = ts.graph.edges[ts.handles["posterior_edge"]]
    posterior = edge.outgoing(ts.handles["posterior_node"])
    if not isinstance(posterior, GaussianMessage):
        raise fg.GraphError(f"unexpected posterior message {posterior!r}")
    return GainState(posterior.mean, posterior.variance)


def unconstrained_step(s: float, theta: Theta) -> GainState:
    """Per-frame gain belief when the gain transition is cut.

    Without the random-walk constraint each frame is judged on its own:
    the posterior is the observation branch alone.
    """
    ts = build_sp_graph(
        theta, s, DEFAULT_G0_PRIOR, model=ModelId.UNCONSTRAINED_GAIN
    )
    fg.execute_schedule(ts.graph, ts.schedule)
    edge = ts.graph.edges[ts.handles["posterior_edge"]]
    posterior = edge.outgoing(ts.handles["posterior_node"])
    return GainState(posterior.mean, posterior.variance)


def run_sequence(
    levels: Sequence[float] | np.ndarray,
    theta: Theta,
    g0_prior: GaussianMessage = DEFAULT_G0_PRIOR,
    use_graph: bool = False,
) -> list[GainState]:
    """Fold the per-frame update over a level sequence.

    Constant work per frame; the output has one state per input level.
    ``use_graph=True`` routes every step through the message-passing twin
    instead of the closed form.
    """
    seq = np.asarray(levels, dtype=float)
    if seq.size == 0:
        raise ValueError("level sequence must be non-empty")
    step = message_step if use_graph else kalman_step
    state = GainState(g0_prior.mean, g0_prior.variance)
    out: list[GainState] = []
    for s in seq:
        state = step(state, float(s), theta)
        out.append(state)
    return out


def steady_state(
    theta: Theta, level: float, tol: float = 1e-12, max_steps: int = 100_000
) -> GainState:
    """Fixed point of the recursion at a constant input level."""
    state = GainState(DEFAULT_G0_PRIOR.mean, DEFAULT_G0_PRIOR.variance)
    for _ in range(max_steps):
        nxt = kalman_step(state, level, theta)
        if abs(nxt.mean - state.mean) < tol and abs(nxt.variance - state.variance) < tol:
            return nxt
        state = nxt
    raise RuntimeError(f"no steady state reached at level {level} within {max_steps} steps")


def settle_steps(
    theta: Theta,
    from_state: GainState,
    level: float,
    final_gain: float,
    within_db: float = 2.0,
    max_steps: int = 100_000,
) -> int:
    """Steps until the output level sits within ``within_db`` of its final
    value after an input step. At constant input that distance equals the
    distance of the gain from its fixed point."""
    state = from_state
    for k in range(1, max_steps + 1):
        state = kalman_step(state, level, theta)
        if abs(state.mean - final_gain) <= within_db:
            return k
    raise RuntimeError(f"step response did not settle within {max_steps} steps")


def characterize(theta: Theta, low_level: float, high_level: float) -> CompressionCharacterization:
    """Compression ratio and attack/release step counts between two levels.

    Both probe levels must fall in the compressive band of the loss curve
    (at or above zero output, strictly below the recruitment threshold),
    where the steady gains follow the exact-compensation line. The ratio
    is the level swing divided by the output swing; attack and release
    count update steps of the step responses until the output is within
    2 dB of its final value.
    """
    _, rt = thresholds(theta.hearing)
    for level in (low_level, high_level):
        if not (0.0 <= level < rt):
            raise CharacterizationDomainError(
                f"level {level} dB is outside the compressive band [0, {rt})"
            )
    if not low_level < high_level:
        raise CharacterizationDomainError("low_level must be below high_level")

    steady_low = steady_state(theta, low_level)
    steady_high = steady_state(theta, high_level)
    output_swing = (high_level + steady_high.mean) - (low_level + steady_low.mean)
    if output_swing == 0.0:
        raise CharacterizationDomainError("zero output swing between probe levels")
    ratio = (high_level - low_level) / output_swing

    attack = settle_steps(theta, steady_low, high_level, steady_high.mean)
    release = settle_steps(theta, steady_high, low_level, steady_low.mean)
    return CompressionCharacterization(
        compression_ratio=ratio,
        attack_steps=attack,
        release_steps=release,
        steady_gain_per_level={low_level: steady_low.mean, high_level: steady_high.mean},
    )


def write_gain_trace(
    target: TextIO,
    levels: Iterable[float],
    states: Iterable[GainState],
) -> None:
    """CSV export of a filtered gain trace: k,s_dB,g_mean_dB,g_sd_dB."""
    target.write("k,s_dB,g_mean_dB,g_sd_dB\n")
    for k, (s, st) in enumerate(zip(levels, states)):
        target.write(f"{k},{s:.6f},{st.mean:.6f},{st.sd():.6f}\n")
