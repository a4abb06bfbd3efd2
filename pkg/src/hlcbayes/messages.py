"""Exponential-family messages and the closed-form algebra they obey.

Four message types cover everything the hearing loss compensation model
needs: Gaussians for levels and gains (dB), Gammas for the gain-transition
precision, inverse-Gammas for the observation variance, and point masses
for observed values. Products of same-family messages stay inside the
family, so every belief update the graph runtime performs has a closed
form.

Improper members (flat Gamma factors, infinite-variance Gaussians) are
representable only through an explicit ``improper`` flag. The flag is the
neutral-element marker for products; raw infinities never enter the
arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidMessageError(ValueError):
    """A message with non-finite or out-of-range parameters."""


# Gaussians at or below this variance behave as point masses.
DELTA_VARIANCE = 1e-12


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidMessageError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class GaussianMessage:
    """Gaussian belief N(mean, variance), parameters in dB / dB^2."""

    mean: float
    variance: float
    improper: bool = False

    def __post_init__(self):
        if self.improper:
            return
        _require_finite("mean", self.mean)
        _require_finite("variance", self.variance)
        if self.variance <= 0.0:
            raise InvalidMessageError(f"variance must be > 0, got {self.variance!r}")

    @classmethod
    def vague(cls) -> "GaussianMessage":
        return cls(0.0, math.inf, improper=True)

    @property
    def precision(self) -> float:
        return 0.0 if self.improper else 1.0 / self.variance

    def is_point_mass(self) -> bool:
        return (not self.improper) and self.variance < DELTA_VARIANCE

    def second_moment(self) -> float:
        if self.improper:
            raise InvalidMessageError("improper Gaussian has no moments")
        return self.mean * self.mean + self.variance


@dataclass(frozen=True)
class GammaMessage:
    """Gamma belief with shape/rate parameters.

    Hosts beliefs over precisions (dB^-2). The product of two Gamma
    densities is again a Gamma kernel with ``shape = a1 + a2 - 1`` and
    ``rate = b1 + b2``.
    """

    shape: float
    rate: float
    improper: bool = False

    def __post_init__(self):
        if self.improper:
            return
        _require_finite("shape", self.shape)
        _require_finite("rate", self.rate)
        if self.shape <= 0.0:
            raise InvalidMessageError(f"shape must be > 0, got {self.shape!r}")
        if self.rate <= 0.0:
            raise InvalidMessageError(f"rate must be > 0, got {self.rate!r}")

    @classmethod
    def vague(cls) -> "GammaMessage":
        # Gam(1, 0) is the flat neutral element of the product rule.
        return cls(1.0, 0.0, improper=True)

    @classmethod
    def likelihood_fragment(cls, shape: float, rate: float) -> "GammaMessage":
        """A single-observation likelihood kernel, possibly improper alone."""
        _require_finite("shape", shape)
        _require_finite("rate", rate)
        if rate < 0.0:
            raise InvalidMessageError(f"rate must be >= 0, got {rate!r}")
        if shape > 0.0 and rate > 0.0:
            return cls(shape, rate)
        return cls(shape, rate, improper=True)

    def mean(self) -> float:
        if self.improper:
            raise InvalidMessageError("improper Gamma has no moments")
        return self.shape / self.rate

    def variance(self) -> float:
        if self.improper:
            raise InvalidMessageError("improper Gamma has no moments")
        return self.shape / (self.rate * self.rate)


@dataclass(frozen=True)
class InverseGammaMessage:
    """Inverse-Gamma belief with shape/scale parameters.

    Hosts beliefs over variances (dB^2). The product rule is
    ``shape = a1 + a2 + 1`` and ``scale = b1 + b2``.
    """

    shape: float
    scale: float
    improper: bool = False

    def __post_init__(self):
        if self.improper:
            return
        _require_finite("shape", self.shape)
        _require_finite("scale", self.scale)
        if self.shape <= 0.0:
            raise InvalidMessageError(f"shape must be > 0, got {self.shape!r}")
        if self.scale <= 0.0:
            raise InvalidMessageError(f"scale must be > 0, got {self.scale!r}")

    @classmethod
    def vague(cls) -> "InverseGammaMessage":
        # Ig(-1, 0) is the neutral element of the product rule.
        return cls(-1.0, 0.0, improper=True)

    @classmethod
    def likelihood_fragment(cls, shape: float, scale: float) -> "InverseGammaMessage":
        """A single-observation likelihood kernel, possibly improper alone."""
        _require_finite("shape", shape)
        _require_finite("scale", scale)
        if scale < 0.0:
            raise InvalidMessageError(f"scale must be >= 0, got {scale!r}")
        if shape > 0.0 and scale > 0.0:
            return cls(shape, scale)
        return cls(shape, scale, improper=True)

    def mean(self) -> float:
        if self.improper:
            raise InvalidMessageError("improper inverse-Gamma has no moments")
        if self.shape <= 1.0:
            raise InvalidMessageError(
                f"inverse-Gamma mean undefined for shape {self.shape!r} <= 1"
            )
        return self.scale / (self.shape - 1.0)

    def variance(self) -> float:
        if self.shape <= 2.0:
            raise InvalidMessageError(
                f"inverse-Gamma variance undefined for shape {self.shape!r} <= 2"
            )
        d = self.shape - 1.0
        return self.scale * self.scale / (d * d * (self.shape - 2.0))

    def mean_inverse(self) -> float:
        """E[1/x]; the reciprocal of an Ig(a, b) variate is Gamma(a, b)."""
        if self.improper:
            raise InvalidMessageError("improper inverse-Gamma has no moments")
        return self.shape / self.scale


@dataclass(frozen=True)
class DeltaMessage:
    """Point mass at an observed value."""

    point: float

    def __post_init__(self):
        _require_finite("point", self.point)


Message = GaussianMessage | GammaMessage | InverseGammaMessage | DeltaMessage


def gaussian_product(a: GaussianMessage, b: GaussianMessage) -> GaussianMessage:
    """Normalized product of two Gaussian densities.

    Precisions add exactly and the mean is precision-weighted, which is
    the closed form behind every equality-node update on a level or gain
    edge.
    """
    if not isinstance(a, GaussianMessage) or not isinstance(b, GaussianMessage):
        raise InvalidMessageError("gaussian_product expects two GaussianMessages")
    if a.improper:
        return b
    if b.improper:
        return a
    precision = a.precision + b.precision
    mean = (a.mean * a.precision + b.mean * b.precision) / precision
    return GaussianMessage(mean, 1.0 / precision)


def gamma_product(a: GammaMessage, b: GammaMessage) -> GammaMessage:
    """Product of two Gamma kernels: shapes add minus one, rates add."""
    if not isinstance(a, GammaMessage) or not isinstance(b, GammaMessage):
        raise InvalidMessageError("gamma_product expects two GammaMessages")
    shape = a.shape + b.shape - 1.0
    rate = a.rate + b.rate
    if shape <= 0.0:
        raise InvalidMessageError(f"product shape {shape!r} <= 0")
    if rate <= 0.0:
        raise InvalidMessageError(f"product rate {rate!r} <= 0")
    return GammaMessage(shape, rate)


def inverse_gamma_product(
    a: InverseGammaMessage, b: InverseGammaMessage
) -> InverseGammaMessage:
    """Product of two inverse-Gamma kernels: shapes add plus one, scales add."""
    if not isinstance(a, InverseGammaMessage) or not isinstance(b, InverseGammaMessage):
        raise InvalidMessageError("inverse_gamma_product expects two InverseGammaMessages")
    shape = a.shape + b.shape + 1.0
    scale = a.scale + b.scale
    if shape <= 0.0:
        raise InvalidMessageError(f"product shape {shape!r} <= 0")
    if scale <= 0.0:
        raise InvalidMessageError(f"product scale {scale!r} <= 0")
    return InverseGammaMessage(shape, scale)


def gamma_combine(a: GammaMessage, b: GammaMessage) -> GammaMessage:
    """Product rule without the properness requirement on the result.

    Chain accumulators need this: partial products of single-observation
    kernels pass through improper territory before enough evidence has
    been folded in.
    """
    return GammaMessage.likelihood_fragment(a.shape + b.shape - 1.0, a.rate + b.rate)


def inverse_gamma_combine(
    a: InverseGammaMessage, b: InverseGammaMessage
) -> InverseGammaMessage:
    """Inverse-Gamma product rule, tolerant of improper partial products."""
    return InverseGammaMessage.likelihood_fragment(a.shape + b.shape + 1.0, a.scale + b.scale)


def product(a: Message, b: Message) -> Message:
    """Family-dispatching product used by equality nodes.

    A point mass absorbs anything it multiplies; two point masses must
    agree on their location.
    """
    if isinstance(a, DeltaMessage) and isinstance(b, DeltaMessage):
        if abs(a.point - b.point) > 1e-9 * max(1.0, abs(a.point)):
            raise InvalidMessageError(
                f"colliding point masses disagree: {a.point} vs {b.point}"
            )
        return a
    if isinstance(a, DeltaMessage):
        return a
    if isinstance(b, DeltaMessage):
        return b
    if isinstance(a, GaussianMessage) and isinstance(b, GaussianMessage):
        if a.is_point_mass():
            return a
        if b.is_point_mass():
            return b
        return gaussian_product(a, b)
    if isinstance(a, GammaMessage) and isinstance(b, GammaMessage):
        return gamma_product(a, b)
    if isinstance(a, InverseGammaMessage) and isinstance(b, InverseGammaMessage):
        return inverse_gamma_product(a, b)
    raise InvalidMessageError(
        f"cannot multiply {type(a).__name__} with {type(b).__name__}"
    )


# ---------------------------------------------------------------------------
# Regularized lower incomplete gamma function
# ---------------------------------------------------------------------------
#
# P(a, x) = gamma(a, x) / Gamma(a). Needed to integrate Gamma densities
# over an interval [0, omega]; evaluated in log space by default because
# the probability masses involved routinely underflow double precision.
# Series expansion below the a+1 crossover, continued fraction above,
# following the classic numerical treatment of the incomplete gamma
# function.

_IGAM_EPS = 1e-16
_IGAM_ITMAX = 2000


def _log_lower_gamma_series(shape: float, x: float) -> float:
    # P(a,x) = x^a e^-x / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
    total = 1.0
    term = 1.0
    denom = shape
    for _ in range(_IGAM_ITMAX):
        denom += 1.0
        term *= x / denom
        total += term
        if term < total * _IGAM_EPS:
            break
    else:
        raise ArithmeticError(f"series for P({shape}, {x}) did not converge")
    return shape * math.log(x) - x - math.lgamma(shape + 1.0) + math.log(total)


def _log_upper_gamma_cf(shape: float, x: float) -> float:
    # Q(a,x) = x^a e^-x / Gamma(a) * CF, via Lentz's algorithm.
    tiny = 1e-300
    b = x + 1.0 - shape
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, _IGAM_ITMAX + 1):
        an = -i * (i - shape)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _IGAM_EPS:
            break
    else:
        raise ArithmeticError(f"continued fraction for Q({shape}, {x}) did not converge")
    return shape * math.log(x) - x - math.lgamma(shape) + math.log(h)


def log_regularized_lower_gamma(shape: float, x: float) -> float:
    """log P(a, x), exact deep into the underflow region."""
    if not math.isfinite(shape) or shape <= 0.0:
        raise ValueError(f"shape must be a positive finite real, got {shape!r}")
    if not math.isfinite(x) or x < 0.0:
        raise ValueError(f"x must be a finite real >= 0, got {x!r}")
    if x == 0.0:
        return -math.inf
    if x < shape + 1.0:
        return _log_lower_gamma_series(shape, x)
    log_q = _log_upper_gamma_cf(shape, x)
    # Q <= ~0.5 on this branch, so 1 - Q never cancels catastrophically.
    return math.log1p(-math.exp(log_q))


def regularized_lower_gamma(shape: float, x: float) -> float:
    """P(a, x): mass of a Gamma(a, 1) distribution below x."""
    return math.exp(log_regularized_lower_gamma(shape, x))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample(dist: Message, rng) -> float:
    """Draw one value from a message, deterministically for a fixed seed.

    ``rng`` is either a seed or a ``numpy.random.Generator``. Gaussians go
    through the standard-normal transform; Gamma family draws use numpy's
    Marsaglia-Tsang rejection sampler. Gaussians whose variance sits below
    the point-mass floor return their mean.
    """
    gen = _as_generator(rng)
    if isinstance(dist, DeltaMessage):
        return dist.point
    if isinstance(dist, GaussianMessage):
        if dist.improper:
            raise InvalidMessageError("cannot sample an improper Gaussian")
        if dist.is_point_mass():
            return dist.mean
        return dist.mean + math.sqrt(dist.variance) * gen.standard_normal()
    if isinstance(dist, GammaMessage):
        if dist.improper:
            raise InvalidMessageError("cannot sample an improper Gamma")
        return float(gen.gamma(dist.shape, 1.0 / dist.rate))
    if isinstance(dist, InverseGammaMessage):
        if dist.improper:
            raise InvalidMessageError("cannot sample an improper inverse-Gamma")
        # 1/x is Gamma(shape, rate=scale)
        return dist.scale / float(gen.gamma(dist.shape, 1.0))
    raise InvalidMessageError(f"cannot sample from {type(dist).__name__}")
