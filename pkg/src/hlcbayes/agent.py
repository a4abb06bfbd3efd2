"""The in-situ personalization agent.

The agent owns one trial at a time: a parameter setting the listener is
currently hearing. A thumbs-down draws a fresh setting from the current
parameter posteriors (posterior sampling keeps exploration and
exploitation balanced without any tuning knobs) and opens the next trial.
A thumbs-up banks the recent input/gain buffer as a preferred example,
refits the posteriors on everything banked so far, and leaves the trial
running.

All randomness flows through one seeded generator, so replaying an
appraisal log against the same audio reproduces the exact trial history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from .fitting import (
    FitConfig,
    FitResult,
    PosteriorSet,
    Segment,
    TrainingSet,
    estimate,
    point_estimate,
)
from .messages import sample
from .model import Theta, ThetaPriors, default_priors

POSITIVE = "pos"
NEGATIVE = "neg"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Appraisal:
    polarity: str
    received_at: str = field(default_factory=_utc_now)

    def __post_init__(self):
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ValueError(f"polarity must be '{POSITIVE}' or '{NEGATIVE}'")


@dataclass(frozen=True)
class TrialState:
    trial_id: int
    theta: Theta
    started_at: str
    source: str  # "initial" | "sampled" | "manual"


class PreferenceDatabase:
    """Append-only store of preferred segments, persisted as JSON lines.

    One line per segment: ``{"s": [...], "g": [...], "meta": {...}}``.
    Existing lines are loaded on construction; segments are never mutated
    after append.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._segments: list[Segment] = []
        if self.path is not None and self.path.exists():
            self._segments = TrainingSet.from_jsonl(self.path.read_text()).segments

    def __len__(self) -> int:
        return len(self._segments)

    def append(self, segment: Segment) -> None:
        self._segments.append(segment)
        if self.path is not None:
            import json

            line = json.dumps(
                {"s": segment.levels.tolist(), "g": segment.gains.tolist(), "meta": segment.meta}
            )
            with self.path.open("a") as fh:
                fh.write(line + "\n")

    def training_set(self) -> TrainingSet:
        return TrainingSet(list(self._segments))


def thompson_sample(posteriors: PosteriorSet, rng) -> Theta:
    """Draw one candidate setting from the factorized posteriors.

    Components are sampled independently; the variance and precision
    draws are strictly positive by construction of their samplers.
    """
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    alpha = sample(posteriors.alpha, gen)
    beta = sample(posteriors.beta, gen)
    obs_variance = sample(posteriors.obs_variance, gen)
    gain_precision = sample(posteriors.gain_precision, gen)
    if not (obs_variance > 0.0 and gain_precision > 0.0):
        raise RuntimeError("sampled scale parameters must be positive")
    return Theta.make(alpha, beta, obs_variance, gain_precision)


class DesignAgent:
    """Single-writer trial lifecycle around the preference database.

    The caller is responsible for serializing ``on_appraisal`` calls (the
    HTTP layer does this with a lock); reads of ``trial`` and
    ``posteriors`` are safe at any time.
    """

    def __init__(
        self,
        priors: ThetaPriors | None = None,
        seed: int = 0,
        db_path: str | Path | None = None,
        log_path: str | Path | None = None,
        fit_config: FitConfig | None = None,
        initial_theta: Theta | None = None,
    ):
        self.priors = priors or default_priors()
        self.posteriors: PosteriorSet = self.priors
        self.fit_config = fit_config or FitConfig(iterations=200, early_stop=1e-9)
        self.db = PreferenceDatabase(db_path)
        self.log_path = Path(log_path) if log_path is not None else None
        self._rng = np.random.default_rng(seed)
        theta = initial_theta or point_estimate(self.priors)
        source = "manual" if initial_theta is not None else "initial"
        self.trial = TrialState(1, theta, _utc_now(), source)
        self.trials: list[TrialState] = [self.trial]
        self.appraisals: list[Appraisal] = []
        self.last_warning: str | None = None
        if len(self.db):
            self._refit()

    @property
    def positive_count(self) -> int:
        return sum(1 for a in self.appraisals if a.polarity == POSITIVE)

    def on_appraisal(self, appraisal: Appraisal, buffer: Segment | None) -> TrialState:
        """Process one appraisal against the recent input/gain buffer.

        Negative: sample a new setting and open the next trial. Positive:
        bank the buffer, refit on the full database, keep the setting. A
        positive appraisal without a buffer is a warning no-op.
        """
        self.last_warning = None
        self.appraisals.append(appraisal)
        self._log(appraisal)
        if appraisal.polarity == NEGATIVE:
            theta = thompson_sample(self.posteriors, self._rng)
            self.trial = TrialState(self.trial.trial_id + 1, theta, _utc_now(), "sampled")
            self.trials.append(self.trial)
            return self.trial
        if buffer is None or len(buffer) == 0:
            self.last_warning = "positive appraisal with an empty buffer; nothing stored"
            return self.trial
        meta = dict(buffer.meta)
        meta.setdefault("trial_id", self.trial.trial_id)
        meta.setdefault("timestamp", appraisal.received_at)
        self.db.append(Segment(buffer.levels, buffer.gains, meta))
        self._refit()
        return self.trial

    def _refit(self) -> None:
        result: FitResult = estimate(self.db.training_set(), self.priors, self.fit_config)
        self.posteriors = result.posteriors

    def _log(self, appraisal: Appraisal) -> None:
        if self.log_path is None:
            return
        import json

        record = {
            "trial_id": self.trial.trial_id,
            "polarity": appraisal.polarity,
            "t": appraisal.received_at,
        }
        with self.log_path.open("a") as fh:
            fh.write(json.dumps(record) + "\n")

    def theta_history(self) -> list[tuple[float, float, float, float]]:
        """The settings of every trial so far, oldest first."""
        return [
            (t.theta.alpha, t.theta.beta, t.theta.obs_variance, t.theta.gain_precision)
            for t in self.trials
        ]


def replay(
    agent_factory,
    appraisals: Iterable[tuple[str, Segment | None]],
) -> "DesignAgent":
    """Feed a scripted appraisal sequence to a fresh agent."""
    agent = agent_factory()
    for polarity, buffer in appraisals:
        agent.on_appraisal(Appraisal(polarity), buffer)
    return agent
