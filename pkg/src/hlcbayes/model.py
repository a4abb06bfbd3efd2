"""The hearing loss compensation generative model.

The model couples three ingredients, all on a dB scale and indexed by
audio frame:

* a piecewise-linear loudness loss curve after Zurek, describing how an
  impaired ear attenuates a received level,
* an observation constraint saying the compensated level should restore
  the input level up to Gaussian slack with variance ``obs_variance``,
* a Gaussian random-walk constraint on the gain with precision
  ``gain_precision`` that penalizes audible pumping.

This module owns the curve algebra, the parameter bundle with its priors,
per-frame factor graph construction for both the filtering and the
fitting tasks, the exact-compensation gain generator used to synthesize
training data, and the flat key/value config format the CLI consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import graph as fg
from .messages import (
    GammaMessage,
    GaussianMessage,
    InverseGammaMessage,
)

# Vague Gaussian prior variance for unanchored level/gain edges.
VAGUE_PRIOR_VARIANCE = 1e6
# Vague prior on the very first gain.
DEFAULT_G0_PRIOR = GaussianMessage(0.0, 1e4)


class DegenerateParameterError(ValueError):
    """Loss-curve slope at a value where its thresholds are undefined."""


@dataclass(frozen=True)
class HearingLossParams:
    """Slope and offset of the loudness loss curve.

    ``alpha`` is the recruitment slope (dimensionless, above 1 for an
    impaired ear), ``beta`` the dB offset of the recruitment segment.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("loss-curve parameters must be finite")
        if self.alpha == 0.0:
            raise ValueError("loss-curve slope must be nonzero")


def thresholds(params: HearingLossParams) -> tuple[float, float]:
    """Hearing threshold (-beta/alpha) and recruitment threshold (-beta/(alpha-1)).

    Below the first the ear hears nothing; between the two, loudness grows
    at ``alpha`` times the normal rate; above the second, perception is
    normal.
    """
    if params.alpha in (0.0, 1.0):
        raise DegenerateParameterError(
            f"thresholds undefined for slope {params.alpha}"
        )
    ht = -params.beta / params.alpha
    rt = -params.beta / (params.alpha - 1.0)
    return ht, rt


def zurek_loss(x: float, params: HearingLossParams) -> float:
    """Perceived level for a received level ``x`` (both dB)."""
    alpha, beta = params.alpha, params.beta
    if x < -beta / alpha:
        return 0.0
    if alpha != 1.0 and x < -beta / (alpha - 1.0):
        return alpha * x + beta
    return x


def active_slope(x: float, params: HearingLossParams) -> float:
    """Slope of the loss branch selected by an observed level ``x``.

    ``alpha`` strictly below the recruitment threshold, unity at and above
    it. This is the branch choice the closed-form gain recursion makes
    from the observed level alone.
    """
    alpha, beta = params.alpha, params.beta
    if alpha == 1.0:
        return 1.0
    if x < beta / (1.0 - alpha):
        return alpha
    return 1.0


@dataclass(frozen=True)
class Theta:
    """The full tuning bundle: loss curve, observation slack, gain stiffness."""

    hearing: HearingLossParams
    obs_variance: float
    gain_precision: float

    def __post_init__(self):
        if not (math.isfinite(self.obs_variance) and self.obs_variance > 0.0):
            raise ValueError(f"obs_variance must be > 0, got {self.obs_variance!r}")
        if not (math.isfinite(self.gain_precision) and self.gain_precision >= 0.0):
            raise ValueError(f"gain_precision must be >= 0, got {self.gain_precision!r}")

    @property
    def alpha(self) -> float:
        return self.hearing.alpha

    @property
    def beta(self) -> float:
        return self.hearing.beta

    @classmethod
    def make(cls, alpha: float, beta: float, obs_variance: float, gain_precision: float) -> "Theta":
        return cls(HearingLossParams(alpha, beta), obs_variance, gain_precision)


@dataclass(frozen=True)
class ThetaPriors:
    """Independent priors (or posteriors) over the four tuning parameters."""

    alpha: GaussianMessage
    beta: GaussianMessage
    obs_variance: InverseGammaMessage
    gain_precision: GammaMessage


def default_priors() -> ThetaPriors:
    """Plausible priors for an impaired ear: slope above one, offset well
    below zero, observation slack around 10 dB^2, stiff gain transitions."""
    return ThetaPriors(
        alpha=GaussianMessage(1.5, 0.2),
        beta=GaussianMessage(-50.0, 100.0),
        obs_variance=InverseGammaMessage(12.0, 110.0),
        gain_precision=GammaMessage(10.0, 1.0),
    )


class ModelId(Enum):
    """Reference architecture vs. the variant without the gain constraint."""

    REFERENCE = "reference"
    UNCONSTRAINED_GAIN = "alternative-unconstrained-gain"


def oracle_gain(s: float, target: HearingLossParams) -> float:
    """Gain that makes the target-impaired ear perceive exactly ``s``.

    Solving L(s + g) = s on the recruitment branch gives
    ``g = ((1 - alpha) * s - beta) / alpha``. Above the recruitment
    threshold no gain is needed. Below the curve's silent branch there is
    no exact solution, so the generator returns the minimal gain that
    lifts ``s + g`` to the hearing threshold.
    """
    ht, rt = thresholds(target)
    if s >= rt:
        return 0.0
    if s < 0.0:
        return ht - s
    return ((1.0 - target.alpha) * s - target.beta) / target.alpha


# ---------------------------------------------------------------------------
# Per-frame factor graphs
# ---------------------------------------------------------------------------


@dataclass
class TimestepGraph:
    graph: fg.Graph
    schedule: fg.Schedule
    handles: dict[str, str]


def build_sp_graph(
    theta: Theta,
    s_level: float,
    gain_prior: GaussianMessage,
    model: ModelId = ModelId.REFERENCE,
) -> TimestepGraph:
    """One filtering step as a factor graph with a thirteen-step schedule.

    The graph chains the gain-transition branch (addition plus Gaussian
    noise with the clamped precision) into an equality branching point on
    the gain, and the observation branch (level addition, loss curve,
    observation noise with the clamped variance, equality with the
    clamped level) below it. Executing the schedule leaves the filtered
    gain posterior as the outgoing message on the ``g_out`` edge.

    The unconstrained-gain variant cuts the link to the previous gain:
    the pre-branch gain edge gets a vague prior and the backward message
    toward the previous gain stays vague.
    """
    g = fg.Graph()
    for edge_id in (
        "gamma", "zero_w", "w", "g_prev", "g_pre", "g_out", "g_obs",
        "s_route", "u", "ab", "t", "n", "zero_n", "vartheta", "s_flow", "s_obs",
    ):
        g.add_edge(edge_id)

    g.add_node(fg.FactorNode("clamp_s", fg.CLAMP, ("s_obs",), value=s_level))
    g.add_node(fg.FactorNode("clamp_ab", fg.CLAMP, ("ab",), value=(theta.alpha, theta.beta)))
    g.add_node(fg.FactorNode("clamp_obsvar", fg.CLAMP, ("vartheta",), value=theta.obs_variance))
    g.add_node(fg.FactorNode("clamp_zero_n", fg.CLAMP, ("zero_n",), value=0.0))
    g.add_node(
        fg.FactorNode("obs_noise", fg.GAUSSIAN_NOISE, ("n", "zero_n", "vartheta"), scale_kind="variance")
    )
    g.add_node(fg.FactorNode("add_obs", fg.ADDITION, ("t", "n", "s_flow")))
    g.add_node(fg.FactorNode("eq_level", fg.EQUALITY, ("s_flow", "s_obs", "s_route")))
    g.add_node(fg.FactorNode("add_level", fg.ADDITION, ("s_route", "g_obs", "u")))
    g.add_node(
        fg.FactorNode(
            "zurek", fg.ZUREK, ("t", "u", "ab"),
            level_for_slope=s_level,
            anchor_input=s_level + (0.0 if gain_prior.improper else gain_prior.mean),
        )
    )
    g.add_node(fg.FactorNode("eq_gain", fg.EQUALITY, ("g_pre", "g_obs", "g_out")))

    steps: list[fg.ScheduleStep]
    if model is ModelId.REFERENCE:
        if theta.gain_precision <= 0.0:
            raise ValueError(
                "reference model needs gain_precision > 0; "
                "use the unconstrained-gain variant instead"
            )
        g.add_node(fg.FactorNode("clamp_gamma", fg.CLAMP, ("gamma",), value=theta.gain_precision))
        g.add_node(fg.FactorNode("clamp_zero_w", fg.CLAMP, ("zero_w",), value=0.0))
        g.add_node(
            fg.FactorNode("trans_noise", fg.GAUSSIAN_NOISE, ("w", "zero_w", "gamma"), scale_kind="precision")
        )
        g.add_node(fg.FactorNode("prior_gprev", fg.PRIOR, ("g_prev",), value=gain_prior))
        g.add_node(fg.FactorNode("add_trans", fg.ADDITION, ("g_prev", "w", "g_pre")))
        steps = [
            fg.ScheduleStep("clamp_gamma", "gamma"),
            fg.ScheduleStep("trans_noise", "w"),
            fg.ScheduleStep("add_trans", "g_pre"),
            fg.ScheduleStep("clamp_s", "s_obs"),
            fg.ScheduleStep("eq_level", "s_route"),
            fg.ScheduleStep("clamp_ab", "ab"),
            fg.ScheduleStep("clamp_obsvar", "vartheta"),
            fg.ScheduleStep("eq_level", "s_flow"),
            fg.ScheduleStep("obs_noise", "n"),
            fg.ScheduleStep("add_obs", "t"),
            fg.ScheduleStep("zurek", "u"),
            fg.ScheduleStep("add_level", "g_obs"),
            fg.ScheduleStep("eq_gain", "g_out"),
        ]
    else:
        # Gain evolution unconstrained: the previous gain dangles behind a
        # vague terminator and the pre-branch edge carries a vague prior.
        g.add_node(fg.FactorNode("prior_gprev", fg.PRIOR, ("g_prev",), value=gain_prior))
        g.add_node(
            fg.FactorNode("term_gprev", fg.PRIOR, ("g_prev",), value=GaussianMessage.vague())
        )
        g.add_node(
            fg.FactorNode(
                "prior_gpre", fg.PRIOR, ("g_pre",),
                value=GaussianMessage(0.0, VAGUE_PRIOR_VARIANCE),
            )
        )
        steps = [
            fg.ScheduleStep("term_gprev", "g_prev"),
            fg.ScheduleStep("prior_gpre", "g_pre"),
            fg.ScheduleStep("clamp_s", "s_obs"),
            fg.ScheduleStep("eq_level", "s_route"),
            fg.ScheduleStep("clamp_ab", "ab"),
            fg.ScheduleStep("clamp_obsvar", "vartheta"),
            fg.ScheduleStep("eq_level", "s_flow"),
            fg.ScheduleStep("obs_noise", "n"),
            fg.ScheduleStep("add_obs", "t"),
            fg.ScheduleStep("zurek", "u"),
            fg.ScheduleStep("add_level", "g_obs"),
            fg.ScheduleStep("eq_gain", "g_out"),
        ]

    g.seed_sources()
    schedule = fg.Schedule(steps)
    schedule.validate(g)
    handles = {
        "posterior_edge": "g_out",
        "posterior_node": "eq_gain",
        "g_prev": "g_prev",
        "u": "u",
    }
    return TimestepGraph(g, schedule, handles)


def build_pe_slice_graph(
    s_level: float,
    g_prev: float,
    g_cur: float,
    beliefs: ThetaPriors,
) -> TimestepGraph:
    """One fitting slice: levels and gains clamped, parameters on equality
    chains.

    Exposes the chain edges ``gamma_in``/``gamma_out``,
    ``vartheta_in``/``vartheta_out`` and ``ab_in``/``ab_out`` so slices can
    be strung together. ``beliefs`` provides the incoming chain state (the
    priors on a first pass, the current posteriors on later sweeps). The
    schedule computes one variational message toward each parameter chain
    from the clamped observations.
    """
    g = fg.Graph()
    for edge_id in (
        "gamma", "gamma_in", "gamma_out", "zero_w", "w", "g_prev", "g_pre",
        "g_out", "g_obs", "s_route", "u", "ab", "ab_in", "ab_out",
        "t", "n", "zero_n", "vartheta", "vartheta_in", "vartheta_out",
        "s_flow", "s_obs",
    ):
        g.add_edge(edge_id)

    g.add_node(fg.FactorNode("clamp_s", fg.CLAMP, ("s_obs",), value=s_level))
    g.add_node(fg.FactorNode("clamp_gprev", fg.CLAMP, ("g_prev",), value=g_prev))
    g.add_node(fg.FactorNode("clamp_gcur", fg.CLAMP, ("g_out",), value=g_cur))
    g.add_node(fg.FactorNode("clamp_zero_w", fg.CLAMP, ("zero_w",), value=0.0))
    g.add_node(fg.FactorNode("clamp_zero_n", fg.CLAMP, ("zero_n",), value=0.0))

    g.add_node(fg.FactorNode("prior_gamma", fg.PRIOR, ("gamma_in",), value=beliefs.gain_precision))
    g.add_node(fg.FactorNode("term_gamma", fg.PRIOR, ("gamma_out",), value=GammaMessage.vague()))
    g.add_node(fg.FactorNode("eq_gamma", fg.EQUALITY, ("gamma_in", "gamma", "gamma_out")))

    g.add_node(
        fg.FactorNode("prior_vartheta", fg.PRIOR, ("vartheta_in",), value=beliefs.obs_variance)
    )
    g.add_node(
        fg.FactorNode("term_vartheta", fg.PRIOR, ("vartheta_out",), value=InverseGammaMessage.vague())
    )
    g.add_node(
        fg.FactorNode("eq_vartheta", fg.EQUALITY, ("vartheta_in", "vartheta", "vartheta_out"))
    )

    ab_prior = fg.PairMessage(beliefs.alpha, beliefs.beta)
    ab_vague = fg.PairMessage(GaussianMessage.vague(), GaussianMessage.vague())
    g.add_node(fg.FactorNode("prior_ab", fg.PRIOR, ("ab_in",), value=ab_prior))
    g.add_node(fg.FactorNode("term_ab", fg.PRIOR, ("ab_out",), value=ab_vague))
    g.add_node(fg.FactorNode("eq_ab", fg.EQUALITY, ("ab_in", "ab", "ab_out")))

    g.add_node(
        fg.FactorNode("trans_noise", fg.GAUSSIAN_NOISE, ("w", "zero_w", "gamma"), scale_kind="precision")
    )
    g.add_node(fg.FactorNode("add_trans", fg.ADDITION, ("g_prev", "w", "g_pre")))
    g.add_node(fg.FactorNode("eq_gain", fg.EQUALITY, ("g_pre", "g_obs", "g_out")))
    g.add_node(fg.FactorNode("add_level", fg.ADDITION, ("s_route", "g_obs", "u")))
    g.add_node(
        fg.FactorNode("zurek", fg.ZUREK, ("t", "u", "ab"), level_for_slope=s_level)
    )
    g.add_node(fg.FactorNode("add_obs", fg.ADDITION, ("t", "n", "s_flow")))
    g.add_node(
        fg.FactorNode("obs_noise", fg.GAUSSIAN_NOISE, ("n", "zero_n", "vartheta"), scale_kind="variance")
    )
    g.add_node(fg.FactorNode("eq_level", fg.EQUALITY, ("s_flow", "s_obs", "s_route")))

    g.seed_sources()

    V = fg.VARIATIONAL
    steps = [
        fg.ScheduleStep("eq_gain", "g_obs"),
        fg.ScheduleStep("eq_level", "s_route"),
        fg.ScheduleStep("add_level", "u"),
        fg.ScheduleStep("eq_level", "s_flow"),
        fg.ScheduleStep("eq_ab", "ab"),
        fg.ScheduleStep("eq_vartheta", "vartheta"),
        fg.ScheduleStep("eq_gamma", "gamma"),
        fg.ScheduleStep("zurek", "t", V),
        fg.ScheduleStep("add_obs", "n"),
        fg.ScheduleStep("obs_noise", "vartheta", V),
        fg.ScheduleStep("obs_noise", "n", V),
        fg.ScheduleStep("add_obs", "t"),
        fg.ScheduleStep("zurek", "ab", V),
        fg.ScheduleStep("eq_gain", "g_pre"),
        fg.ScheduleStep("add_trans", "w"),
        fg.ScheduleStep("trans_noise", "gamma", V),
        fg.ScheduleStep("eq_gamma", "gamma_out"),
    ]
    schedule = fg.Schedule(steps)
    schedule.validate(g)
    handles = {
        "gamma_message_node": "trans_noise",
        "gamma_edge": "gamma",
        "vartheta_message_node": "obs_noise",
        "vartheta_edge": "vartheta",
        "ab_message_node": "zurek",
        "ab_edge": "ab",
        "gamma_out": "gamma_out",
    }
    return TimestepGraph(g, schedule, handles)


def build_timestep_graph(model: ModelId, theta_mode) -> TimestepGraph:
    """Dispatching front door for the two per-frame graph flavours.

    ``theta_mode`` is either ``("clamped", theta, s_level, gain_prior)``
    for filtering or ``("variational", beliefs, s_level, g_prev, g_cur)``
    for a fitting slice.
    """
    kind = theta_mode[0]
    if kind == "clamped":
        _, theta, s_level, gain_prior = theta_mode
        return build_sp_graph(theta, s_level, gain_prior, model=model)
    if kind == "variational":
        _, beliefs, s_level, g_prev, g_cur = theta_mode
        return build_pe_slice_graph(s_level, g_prev, g_cur, beliefs)
    raise ValueError(f"unknown theta mode {kind!r}")


# ---------------------------------------------------------------------------
# Training data synthesis
# ---------------------------------------------------------------------------


def synthesize_pairs(
    clean_levels: np.ndarray,
    target: HearingLossParams,
    noise_sd: float = 0.0,
    rng=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Preferred input/gain pairs from an exact-compensation generator.

    For each clean level the amplified level is fixed by the exact gain,
    then observation noise with standard deviation ``noise_sd`` perturbs
    the recorded level while the recorded gain absorbs the difference.
    The pairs therefore satisfy the loudness-restoration constraint of the
    target curve up to exactly that noise.
    """
    clean = np.asarray(clean_levels, dtype=float)
    gains = np.array([oracle_gain(float(s), target) for s in clean])
    amplified = clean + gains
    if noise_sd > 0.0:
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        noise = gen.normal(0.0, noise_sd, size=clean.shape)
    else:
        noise = np.zeros_like(clean)
    recorded_levels = clean + noise
    recorded_gains = amplified - recorded_levels
    return recorded_levels, recorded_gains


def level_random_walk(
    n: int, low: float, high: float, step_sd: float, rng=None
) -> np.ndarray:
    """A level trajectory that wanders inside [low, high], reflecting at
    the bounds. Smooth level motion keeps the exact-compensation gains
    smooth as well."""
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    out = np.empty(n)
    x = float(gen.uniform(low, high))
    for i in range(n):
        out[i] = x
        x += float(gen.normal(0.0, step_sd))
        while x < low or x > high:
            if x < low:
                x = 2 * low - x
            if x > high:
                x = 2 * high - x
    return out


# ---------------------------------------------------------------------------
# Flat key/value config files
# ---------------------------------------------------------------------------

_THETA_KEYS = ("alpha", "beta", "obs_variance", "gain_precision")


def parse_config(text: str) -> dict[str, float]:
    """Parse ``key = value`` lines; blank lines and #-comments allowed."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = float(value.strip())
    return values


def theta_to_config(theta: Theta) -> str:
    lines = [
        f"alpha = {theta.alpha!r}",
        f"beta = {theta.beta!r}",
        f"obs_variance = {theta.obs_variance!r}",
        f"gain_precision = {theta.gain_precision!r}",
    ]
    return "\n".join(lines) + "\n"


def theta_from_config(text: str) -> Theta:
    values = parse_config(text)
    missing = [k for k in _THETA_KEYS if k not in values]
    if missing:
        raise ValueError(f"config is missing keys: {', '.join(missing)}")
    return Theta.make(
        values["alpha"], values["beta"], values["obs_variance"], values["gain_precision"]
    )


def priors_to_config(priors: ThetaPriors) -> str:
    lines = [
        f"prior_alpha_mean = {priors.alpha.mean!r}",
        f"prior_alpha_variance = {priors.alpha.variance!r}",
        f"prior_beta_mean = {priors.beta.mean!r}",
        f"prior_beta_variance = {priors.beta.variance!r}",
        f"prior_obs_variance_shape = {priors.obs_variance.shape!r}",
        f"prior_obs_variance_scale = {priors.obs_variance.scale!r}",
        f"prior_gain_precision_shape = {priors.gain_precision.shape!r}",
        f"prior_gain_precision_rate = {priors.gain_precision.rate!r}",
    ]
    return "\n".join(lines) + "\n"


def priors_from_config(text: str, base: ThetaPriors | None = None) -> ThetaPriors:
    values = parse_config(text)
    priors = base or default_priors()
    if "prior_alpha_mean" in values or "prior_alpha_variance" in values:
        priors = replace(
            priors,
            alpha=GaussianMessage(
                values.get("prior_alpha_mean", priors.alpha.mean),
                values.get("prior_alpha_variance", priors.alpha.variance),
            ),
        )
    if "prior_beta_mean" in values or "prior_beta_variance" in values:
        priors = replace(
            priors,
            beta=GaussianMessage(
                values.get("prior_beta_mean", priors.beta.mean),
                values.get("prior_beta_variance", priors.beta.variance),
            ),
        )
    if "prior_obs_variance_shape" in values or "prior_obs_variance_scale" in values:
        priors = replace(
            priors,
            obs_variance=InverseGammaMessage(
                values.get("prior_obs_variance_shape", priors.obs_variance.shape),
                values.get("prior_obs_variance_scale", priors.obs_variance.scale),
            ),
        )
    if "prior_gain_precision_shape" in values or "prior_gain_precision_rate" in values:
        priors = replace(
            priors,
            gain_precision=GammaMessage(
                values.get("prior_gain_precision_shape", priors.gain_precision.shape),
                values.get("prior_gain_precision_rate", priors.gain_precision.rate),
            ),
        )
    return priors
