"""Parameter estimation from preferred input/gain examples.

Levels and gains are clamped to recorded values, which leaves only the
four tuning parameters latent. Under a factorized posterior
``q(alpha) q(beta) q(obs_variance) q(gain_precision)`` every update has a
conjugate closed form:

* slope and offset of the loss curve get Gaussian likelihood kernels from
  a local linearization of the curve, with the branch selected by the
  recorded level against the current threshold estimates;
* the observation variance collects inverse-Gamma kernels from the
  squared loudness-restoration residuals (parameter uncertainty
  included);
* the gain-transition precision collects Gamma kernels from squared
  consecutive gain differences.

A sweep recomputes all per-slice kernels from the current posterior
moments (the observation-side pass) and then refreshes the posteriors by
multiplying the kernels into the priors along the parameter chains (the
mixing pass). Sweeps repeat for a fixed iteration budget, optionally
stopping early once the posterior means settle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .messages import (
    GammaMessage,
    GaussianMessage,
    InverseGammaMessage,
    gamma_combine,
    gaussian_product,
    inverse_gamma_combine,
)
from .model import ThetaPriors, Theta

# A fitted PosteriorSet has the same shape as the prior bundle.
PosteriorSet = ThetaPriors

DELTA_TRANSITION = "delta"
RANDOM_WALK_TRANSITION = "random-walk"


class IterationFailureError(RuntimeError):
    """A sweep produced a non-finite moment for the named parameter."""

    def __init__(self, parameter: str, detail: str):
        super().__init__(f"divergent update for {parameter}: {detail}")
        self.parameter = parameter


@dataclass(frozen=True)
class Segment:
    """One recorded stretch of preferred processing: levels and gains, dB."""

    levels: np.ndarray
    gains: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        gains = np.asarray(self.gains, dtype=float)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "gains", gains)
        if levels.ndim != 1 or gains.ndim != 1:
            raise ValueError("segment levels and gains must be 1-d")
        if len(levels) != len(gains):
            raise ValueError(
                f"segment length mismatch: {len(levels)} levels vs {len(gains)} gains"
            )
        if len(levels) < 2:
            raise ValueError("a segment needs at least two samples")
        if not (np.all(np.isfinite(levels)) and np.all(np.isfinite(gains))):
            raise ValueError("segment values must be finite")

    def __len__(self) -> int:
        return len(self.levels)


@dataclass
class TrainingSet:
    """Preferred example segments; the evidence everything is fitted from."""

    segments: list[Segment] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def n_observations(self) -> int:
        return sum(len(seg) for seg in self.segments)

    @property
    def n_transitions(self) -> int:
        return sum(len(seg) - 1 for seg in self.segments)

    @classmethod
    def from_jsonl(cls, text: str) -> "TrainingSet":
        segments = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                segments.append(
                    Segment(
                        np.asarray(record["s"], dtype=float),
                        np.asarray(record["g"], dtype=float),
                        record.get("meta", {}),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"bad training record on line {lineno}: {exc}") from exc
        return cls(segments)

    def to_jsonl(self) -> str:
        lines = []
        for seg in self.segments:
            lines.append(
                json.dumps(
                    {"s": seg.levels.tolist(), "g": seg.gains.tolist(), "meta": seg.meta}
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class FitConfig:
    iterations: int = 200
    transition: str = DELTA_TRANSITION
    transition_variance: float | None = None
    early_stop: float | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.transition not in (DELTA_TRANSITION, RANDOM_WALK_TRANSITION):
            raise ValueError(f"unknown transition {self.transition!r}")
        if self.transition == RANDOM_WALK_TRANSITION and not self.transition_variance:
            raise ValueError("random-walk transition needs a variance")


@dataclass
class FitResult:
    posteriors: PosteriorSet
    iterations_run: int
    warning: str | None = None
    slice_posteriors: list[PosteriorSet] | None = None


# ---------------------------------------------------------------------------
# Vectorized slice evidence
# ---------------------------------------------------------------------------


@dataclass
class _Evidence:
    levels: np.ndarray        # recorded level per observation slice
    amplified: np.ndarray     # recorded level + recorded gain
    gain_steps: np.ndarray    # consecutive gain differences, per transition


def _collect(data: TrainingSet) -> _Evidence:
    levels = np.concatenate([seg.levels for seg in data.segments])
    amplified = np.concatenate([seg.levels + seg.gains for seg in data.segments])
    steps = [np.diff(seg.gains) for seg in data.segments if len(seg) > 1]
    gain_steps = np.concatenate(steps) if steps else np.empty(0)
    return _Evidence(levels, amplified, gain_steps)


def _regions(levels: np.ndarray, e_alpha: float, e_beta: float):
    """Branch masks chosen by the recorded level against the current
    threshold estimates. Flat-branch slices carry no slope/offset
    information; normal-hearing slices pin the residual to the gain."""
    ht = -e_beta / e_alpha
    if e_alpha != 1.0:
        rt_bound = e_beta / (1.0 - e_alpha)
        recruit = (levels >= ht) & (levels < rt_bound)
    else:
        recruit = np.zeros_like(levels, dtype=bool)
    flat = levels < ht
    identity = ~(flat | recruit)
    return flat, recruit, identity


def _gamma_posterior(prior: GammaMessage, ev: _Evidence) -> GammaMessage:
    # Conjugate and decoupled from the other parameters: each transition
    # contributes half a unit of shape and half its squared step as rate.
    n = len(ev.gain_steps)
    if n == 0:
        return prior
    return GammaMessage(prior.shape + 0.5 * n, prior.rate + 0.5 * float(np.sum(ev.gain_steps**2)))


def _sweep(
    priors: ThetaPriors, current: PosteriorSet, ev: _Evidence
) -> PosteriorSet:
    e_a = current.alpha.mean
    e_b = current.beta.mean
    e_inv_theta = current.obs_variance.mean_inverse()

    with np.errstate(over="ignore", invalid="ignore"):
        flat, recruit, identity = _regions(ev.levels, e_a, e_b)
        s = ev.levels
        u = ev.amplified

        # Slope and offset: Gaussian kernels from the recruitment slices
        # only. Their one-at-a-time updates are a linear iteration whose
        # contraction factor approaches one on nearly collinear level
        # data, so the sweep applies both at their joint fixed point for
        # the current noise moment: the 2x2 stationarity system of the two
        # conjugate updates. Marginal variances keep their conjugate
        # one-parameter forms.
        s_r, u_r = s[recruit], u[recruit]
        sum_u = float(np.sum(u_r))
        sum_u2 = float(np.sum(u_r**2))
        a11 = 1.0 / priors.alpha.variance + e_inv_theta * sum_u2
        a22 = 1.0 / priors.beta.variance + e_inv_theta * len(s_r)
        a12 = e_inv_theta * sum_u
        r1 = priors.alpha.mean / priors.alpha.variance + e_inv_theta * float(np.sum(u_r * s_r))
        r2 = priors.beta.mean / priors.beta.variance + e_inv_theta * float(np.sum(s_r))
        det = a11 * a22 - a12 * a12
        mean_alpha = (a22 * r1 - a12 * r2) / det
        mean_beta = (a11 * r2 - a12 * r1) / det
        if not (math.isfinite(mean_alpha) and math.isfinite(1.0 / a11)):
            raise IterationFailureError("alpha", f"non-finite moment {mean_alpha!r}")
        if not (math.isfinite(mean_beta) and math.isfinite(1.0 / a22)):
            raise IterationFailureError("beta", f"non-finite moment {mean_beta!r}")
        q_alpha = GaussianMessage(mean_alpha, 1.0 / a11)
        q_beta = GaussianMessage(mean_beta, 1.0 / a22)
        e_a, v_a = q_alpha.mean, q_alpha.variance
        e_b, v_b = q_beta.mean, q_beta.variance

        # Observation variance: every slice contributes its expected
        # squared restoration residual under the current parameter
        # beliefs.
        resid_sq = np.empty_like(s)
        resid_sq[recruit] = (s_r - e_a * u_r - e_b) ** 2 + (u_r**2) * v_a + v_b
        resid_sq[identity] = (s[identity] - u[identity]) ** 2
        resid_sq[flat] = s[flat] ** 2
        theta_scale = priors.obs_variance.scale + 0.5 * float(np.sum(resid_sq))
        if not math.isfinite(theta_scale):
            raise IterationFailureError("obs_variance", f"non-finite moment {theta_scale!r}")
        q_theta = InverseGammaMessage(priors.obs_variance.shape + 0.5 * len(s), theta_scale)

        gamma_rate = priors.gain_precision.rate + 0.5 * float(np.sum(ev.gain_steps**2))
        if not math.isfinite(gamma_rate):
            raise IterationFailureError("gain_precision", f"non-finite moment {gamma_rate!r}")
        q_gamma = _gamma_posterior(priors.gain_precision, ev)

    return PosteriorSet(q_alpha, q_beta, q_theta, q_gamma)


def estimate(data: TrainingSet, priors: ThetaPriors, config: FitConfig = FitConfig()) -> FitResult:
    """Fit the factorized posteriors to a training set.

    Empty data returns the priors untouched, flagged with a warning. The
    result is a deterministic function of its inputs, and under the delta
    parameter transition it does not depend on segment order.
    """
    if len(data) == 0 or data.n_observations == 0:
        return FitResult(priors, 0, warning="empty training set, posteriors equal priors")

    if config.transition == RANDOM_WALK_TRANSITION:
        return _estimate_random_walk(data, priors, config)

    ev = _collect(data)
    current = priors
    iterations_run = 0
    for _ in range(config.iterations):
        updated = _sweep(priors, current, ev)
        iterations_run += 1
        if config.early_stop is not None and _max_mean_shift(current, updated) < config.early_stop:
            current = updated
            break
        current = updated
    return FitResult(current, iterations_run)


def _max_mean_shift(a: PosteriorSet, b: PosteriorSet) -> float:
    return max(
        abs(a.alpha.mean - b.alpha.mean),
        abs(a.beta.mean - b.beta.mean),
        abs(a.obs_variance.mean() - b.obs_variance.mean()),
        abs(a.gain_precision.mean() - b.gain_precision.mean()),
    )


# ---------------------------------------------------------------------------
# Chain view: per-slice messages, forward and backward passes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SliceMessages:
    """Likelihood kernels one timestep sends toward the parameter chains."""

    alpha: GaussianMessage
    beta: GaussianMessage
    obs_variance: InverseGammaMessage
    gain_precision: GammaMessage


_NEUTRAL = None  # computed lazily below


def _neutral_set() -> PosteriorSet:
    return PosteriorSet(
        GaussianMessage.vague(),
        GaussianMessage.vague(),
        InverseGammaMessage.vague(),
        GammaMessage.vague(),
    )


def _combine(a: PosteriorSet, b: PosteriorSet) -> PosteriorSet:
    return PosteriorSet(
        gaussian_product(a.alpha, b.alpha),
        gaussian_product(a.beta, b.beta),
        inverse_gamma_combine(a.obs_variance, b.obs_variance),
        gamma_combine(a.gain_precision, b.gain_precision),
    )


def _diffuse(ps: PosteriorSet, variance: float) -> PosteriorSet:
    """Push a belief bundle through one random-walk transition.

    Exact for the Gaussian components. Gamma and inverse-Gamma components
    are widened by moment matching whenever their first two moments exist,
    and passed through unchanged otherwise.
    """
    def widen_gaussian(msg: GaussianMessage) -> GaussianMessage:
        if msg.improper:
            return msg
        return GaussianMessage(msg.mean, msg.variance + variance)

    def widen_gamma(msg: GammaMessage) -> GammaMessage:
        if msg.improper or msg.shape <= 0 or msg.rate <= 0:
            return msg
        m = msg.mean()
        v = msg.variance() + variance
        return GammaMessage(m * m / v, m / v)

    def widen_ig(msg: InverseGammaMessage) -> InverseGammaMessage:
        if msg.improper or msg.shape <= 2.0:
            return msg
        m = msg.mean()
        v = msg.variance() + variance
        shape = m * m / v + 2.0
        return InverseGammaMessage(shape, m * (shape - 1.0))

    return PosteriorSet(
        widen_gaussian(ps.alpha),
        widen_gaussian(ps.beta),
        widen_ig(ps.obs_variance),
        widen_gamma(ps.gain_precision),
    )


class ParameterChain:
    """The training set unrolled into timestep slices.

    Slice k carries the observation kernels of sample k and, when the
    sample is not the first of its segment, the transition kernel of the
    gain step into it. ``refresh`` recomputes all kernels from a posterior
    bundle's moments; the passes then run over frozen kernels.
    """

    def __init__(self, data: TrainingSet, priors: ThetaPriors, config: FitConfig = FitConfig()):
        self.priors = priors
        self.config = config
        self.levels = np.concatenate([seg.levels for seg in data.segments])
        self.amplified = np.concatenate([seg.levels + seg.gains for seg in data.segments])
        steps = []
        for seg in data.segments:
            d = np.diff(seg.gains)
            steps.append(np.concatenate([[np.nan], d]))  # nan marks a segment start
        self.gain_steps = np.concatenate(steps)
        self.slice_messages: list[SliceMessages] = []
        self.refresh(priors)

    def __len__(self) -> int:
        return len(self.levels)

    def refresh(self, beliefs: PosteriorSet) -> None:
        e_a, v_a = beliefs.alpha.mean, beliefs.alpha.variance
        e_b, v_b = beliefs.beta.mean, beliefs.beta.variance
        e_inv_theta = beliefs.obs_variance.mean_inverse()
        flat, recruit, identity = _regions(self.levels, e_a, e_b)

        msgs: list[SliceMessages] = []
        for i in range(len(self.levels)):
            s = float(self.levels[i])
            u = float(self.amplified[i])
            if recruit[i]:
                alpha_msg = GaussianMessage((s - e_b) / u, 1.0 / (e_inv_theta * u * u))
                beta_msg = GaussianMessage(s - e_a * u, 1.0 / e_inv_theta)
                resid = (s - e_a * u - e_b) ** 2 + u * u * v_a + v_b
            else:
                alpha_msg = GaussianMessage.vague()
                beta_msg = GaussianMessage.vague()
                resid = s * s if flat[i] else (s - u) ** 2
            theta_msg = InverseGammaMessage.likelihood_fragment(-0.5, resid / 2.0)
            step = self.gain_steps[i]
            if math.isnan(step):
                gamma_msg = GammaMessage.vague()
            else:
                gamma_msg = GammaMessage.likelihood_fragment(1.5, step * step / 2.0)
            msgs.append(SliceMessages(alpha_msg, beta_msg, theta_msg, gamma_msg))
        self.slice_messages = msgs

    def _as_set(self, m: SliceMessages) -> PosteriorSet:
        return PosteriorSet(m.alpha, m.beta, m.obs_variance, m.gain_precision)

    def _maybe_diffuse(self, ps: PosteriorSet) -> PosteriorSet:
        if self.config.transition == RANDOM_WALK_TRANSITION:
            return _diffuse(ps, float(self.config.transition_variance))
        return ps


def forward_pass(chain: ParameterChain) -> list[PosteriorSet]:
    """Cumulative rightward products F[0..n]; F[0] is the prior bundle and
    F[k] folds in the kernels of slices 1..k (diffused between slices for
    a random-walk transition)."""
    out = [PosteriorSet(
        chain.priors.alpha, chain.priors.beta,
        chain.priors.obs_variance, chain.priors.gain_precision,
    )]
    cur = out[0]
    for m in chain.slice_messages:
        cur = _combine(chain._maybe_diffuse(cur), chain._as_set(m))
        out.append(cur)
    return out


def backward_pass(chain: ParameterChain) -> list[PosteriorSet]:
    """Cumulative leftward products B[0..n]; B[n] is neutral and B[k]
    folds in the kernels of slices k+1..n."""
    n = len(chain)
    out = [_neutral_set() for _ in range(n + 1)]
    cur = out[n]
    for i in range(n - 1, -1, -1):
        cur = _combine(chain._maybe_diffuse(cur), chain._as_set(chain.slice_messages[i]))
        out[i] = cur
    return out


def slice_marginals(chain: ParameterChain) -> list[PosteriorSet]:
    """Per-slice parameter beliefs: forward into the slice times backward
    out of it. The backward bundle crosses one more transition on its way
    in. Under the delta transition every slice agrees."""
    fw = forward_pass(chain)
    bw = backward_pass(chain)
    return [
        _combine(fw[k + 1], chain._maybe_diffuse(bw[k + 1])) for k in range(len(chain))
    ]


def _estimate_random_walk(data: TrainingSet, priors: ThetaPriors, config: FitConfig) -> FitResult:
    chain = ParameterChain(data, priors, config)
    current = priors
    iterations_run = 0
    for _ in range(config.iterations):
        chain.refresh(current)
        fw = forward_pass(chain)
        updated = fw[-1]
        iterations_run += 1
        if config.early_stop is not None and _max_mean_shift(current, updated) < config.early_stop:
            current = updated
            break
        current = updated
    chain.refresh(current)
    return FitResult(current, iterations_run, slice_posteriors=slice_marginals(chain))


# ---------------------------------------------------------------------------
# Point estimates and reports
# ---------------------------------------------------------------------------


def point_estimate(post: PosteriorSet) -> Theta:
    """Collapse the posterior bundle to a runnable parameter point."""
    if post.obs_variance.shape <= 1.0:
        raise ValueError(
            f"observation-variance mean undefined at shape {post.obs_variance.shape}"
        )
    return Theta.make(
        post.alpha.mean,
        post.beta.mean,
        post.obs_variance.mean(),
        post.gain_precision.mean(),
    )


def report_posteriors(post: PosteriorSet) -> str:
    """Key/value text: mean and variance per parameter."""
    def ig_variance(msg: InverseGammaMessage) -> float:
        return msg.variance() if msg.shape > 2.0 else math.nan

    lines = [
        f"alpha_mean = {post.alpha.mean!r}",
        f"alpha_variance = {post.alpha.variance!r}",
        f"beta_mean = {post.beta.mean!r}",
        f"beta_variance = {post.beta.variance!r}",
        f"obs_variance_mean = {post.obs_variance.mean() if post.obs_variance.shape > 1 else math.nan!r}",
        f"obs_variance_variance = {ig_variance(post.obs_variance)!r}",
        f"gain_precision_mean = {post.gain_precision.mean()!r}",
        f"gain_precision_variance = {post.gain_precision.variance()!r}",
    ]
    return "\n".join(lines) + "\n"
