"""Discrete noise primitives for privacy-preserving aggregation.

The two-sided (symmetric) geometric distribution, its diluted
(zero-inflated) variant, the pointwise probability-ratio check behind
the differential-privacy guarantee of geometric noise, and a tail bound
for sums of diluted draws used to size discrete-log decoding windows.

Every sampling function takes an explicit ``numpy.random.Generator``;
there is no module-level RNG state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeomParams",
    "DilutedParams",
    "geom_pmf",
    "geom_sample",
    "diluted_sample",
    "dp_ratio_check",
    "compound_noise_quantile",
]

# Below this, alpha**(-|k|) is evaluated in log space: the direct power
# loses accuracy once alpha is nearly 1 and |k| is large.
_LOG_SPACE_ALPHA = 1.01


@dataclass(frozen=True)
class GeomParams:
    """Two-sided geometric distribution with decay rate ``alpha`` > 1.

    The probability mass at integer k is
    ``(alpha - 1) / (alpha + 1) * alpha ** (-abs(k))``.
    """

    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must be > 1, got {self.alpha!r}")

    @property
    def log_alpha(self) -> float:
        return math.log(self.alpha)

    @property
    def mass_at_zero(self) -> float:
        return (self.alpha - 1.0) / (self.alpha + 1.0)

    @property
    def abs_mean(self) -> float:
        """E|X| = 2 alpha / (alpha^2 - 1)."""
        return 2.0 * self.alpha / (self.alpha * self.alpha - 1.0)

    @property
    def variance(self) -> float:
        """Var X = 2 alpha / (alpha - 1)^2."""
        return 2.0 * self.alpha / ((self.alpha - 1.0) ** 2)


@dataclass(frozen=True)
class DilutedParams:
    """Diluted geometric: 0 with probability 1 - beta, else a Geom(alpha) draw."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must be > 1, got {self.alpha!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta!r}")

    @property
    def geom(self) -> GeomParams:
        return GeomParams(self.alpha)


def geom_pmf(params: GeomParams, k: int) -> float:
    """Probability mass of Geom(alpha) at integer ``k``.

    Exactly symmetric in k (computed through ``abs(k)``).
    """
    a = params.alpha
    mag = abs(int(k))
    if a < _LOG_SPACE_ALPHA:
        return math.exp(math.log(a - 1.0) - math.log(a + 1.0) - mag * params.log_alpha)
    return params.mass_at_zero * a ** (-mag)


def geom_sample(params: GeomParams, rng: np.random.Generator, size: int | None = None):
    """Draw from Geom(alpha) by inverse CDF.

    One uniform decides zero vs nonzero through the exact mass at zero;
    nonzero magnitudes invert the geometric tail
    ``P(|X| >= j | X != 0) = alpha**(-(j-1))`` and the sign is a fair
    coin. No rejection loops, so the draw count per sample is fixed.

    Args:
      params: distribution parameters.
      rng: numpy generator owned by the caller.
      size: None for a single int, else the number of draws.

    Returns:
      ``int`` when size is None, else an int64 array of length ``size``.
    """
    scalar = size is None
    count = 1 if scalar else int(size)
    out = np.zeros(count, dtype=np.int64)
    u = rng.random(count)
    nonzero = u >= params.mass_at_zero
    hits = int(np.count_nonzero(nonzero))
    if hits:
        tail = 1.0 - rng.random(hits)  # uniform on (0, 1]
        mags = 1 + np.floor(np.log(tail) / (-params.log_alpha)).astype(np.int64)
        signs = np.where(rng.random(hits) < 0.5, -1, 1)
        out[nonzero] = signs * mags
    return int(out[0]) if scalar else out


def diluted_sample(params: DilutedParams, rng: np.random.Generator, size: int | None = None):
    """Draw from the diluted geometric: 0 unless the beta coin hits.

    The coin is drawn first and geometric draws are made only for the
    hits, so a stream that never hits consumes no geometric draws.
    """
    scalar = size is None
    count = 1 if scalar else int(size)
    out = np.zeros(count, dtype=np.int64)
    hit = rng.random(count) < params.beta
    hits = int(np.count_nonzero(hit))
    if hits:
        out[hit] = geom_sample(params.geom, rng, size=hits)
    return int(out[0]) if scalar else out


def dp_ratio_check(
    epsilon: float,
    sensitivity: int,
    u: int,
    v: int,
    k_range: tuple[int, int],
) -> float:
    """Max over k of P[v + r = k] / P[u + r = k] for r ~ Geom(exp(eps/Delta)).

    The guarantee requires |u - v| <= sensitivity; the returned maximum
    is then at most exp(epsilon), with equality approached in the tails.

    The ratio is evaluated in log space as
    ``(|k - u| - |k - v|) * (epsilon / sensitivity)``: the normalizing
    constants of the two shifted pmfs are identical and cancel exactly,
    and for power-of-two sensitivities the tail value reproduces
    ``exp(epsilon)`` to the last bit.

    Args:
      epsilon: privacy parameter, > 0.
      sensitivity: bound Delta on |u - v|, positive integer.
      u, v: the two shifted centers.
      k_range: inclusive (lo, hi) window of integers to scan.

    Raises:
      ValueError: if |u - v| > sensitivity (the guarantee does not apply).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if sensitivity < 1:
        raise ValueError("sensitivity must be a positive integer")
    if abs(u - v) > sensitivity:
        raise ValueError(
            f"|u - v| = {abs(u - v)} exceeds sensitivity {sensitivity}; "
            "the ratio guarantee does not apply"
        )
    lo, hi = k_range
    if hi < lo:
        raise ValueError("empty k_range")
    ks = np.arange(lo, hi + 1, dtype=np.int64)
    exponents = np.abs(ks - u) - np.abs(ks - v)
    log_alpha = epsilon / sensitivity
    ratios = np.exp(exponents * log_alpha)
    return float(ratios.max())


def compound_noise_quantile(
    count: int,
    beta: float,
    alpha: float,
    tail_prob: float = 1e-9,
) -> int:
    """Bound B with P(|S| > B) <= tail_prob for S a sum of diluted draws.

    S is the sum of ``count`` independent Geom^beta(alpha) variables.
    The bound is a Chernoff bound minimized over the exponential tilt,
    so it is conservative: the true (1 - tail_prob) quantile of |S| is
    never larger than the returned B.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    if not 0.0 < tail_prob < 1.0:
        raise ValueError("tail_prob must be in (0, 1)")
    if count == 0 or beta == 0.0:
        return 0
    if not alpha > 1.0:
        raise ValueError("alpha must be > 1")

    log_alpha = math.log(alpha)
    p0 = (alpha - 1.0) / (alpha + 1.0)
    # MGF of Geom(alpha) at tilt t (valid for 0 < t < log alpha):
    #   p0 * (1 + a/(1-a) + b/(1-b)),  a = e^t / alpha, b = e^-t / alpha.
    thetas = np.linspace(1e-4, 0.9999, 4096) * log_alpha
    a = np.exp(thetas) / alpha
    b = np.exp(-thetas) / alpha
    mgf_geom = p0 * (1.0 + a / (1.0 - a) + b / (1.0 - b))
    mgf = 1.0 - beta + beta * mgf_geom
    bounds = (count * np.log(mgf) + math.log(2.0 / tail_prob)) / thetas
    return int(math.ceil(float(bounds.min())))
