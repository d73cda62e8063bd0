"""Exact error analytics for binary-tree aggregation.

The expected number of injected noises under uniformly random failures
(closed form and enumeration-free), a closed-form lower bound on it,
the expected absolute error of a sum of m geometric noises evaluated
through its characteristic-function integral, a matching closed-form
lower bound, and parameter sweeps composing these over network sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import digamma

from .binary_protocol import MAX_USERS, beta_levels
from .records import ExperimentRow

__all__ = [
    "NoiseCountQuery",
    "AbsErrorQuery",
    "IntegrationError",
    "binomial_survival_ratio",
    "expected_noise_count_exact",
    "expected_noise_count_lower_bound",
    "expected_abs_error_integral",
    "expected_abs_error_lower_bound",
    "figure_sweep",
    "KAPPA_RULES",
]


def _require_power_of_two(n: int) -> None:
    if n < 2 or n & (n - 1):
        raise ValueError(f"user count must be a power of two >= 2, got {n}")


@dataclass(frozen=True)
class NoiseCountQuery:
    """Expected-noise-count query: n users, kappa failures, privacy delta."""

    n: int
    kappa: int
    delta: float

    def __post_init__(self) -> None:
        _require_power_of_two(self.n)
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1 (the expectation formula assumes failures)")
        if self.kappa > self.n:
            raise ValueError("kappa cannot exceed n")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")


@dataclass(frozen=True)
class AbsErrorQuery:
    """Expected-absolute-error query: m noises from Geom(alpha).

    ``quad_tol`` is the error target for the quadrature: the estimated
    error is kept below quad_tol * max(1, |result|).
    """

    alpha: float
    m: int
    quad_tol: float = 1e-9

    def __post_init__(self) -> None:
        if not self.alpha > 1.0:
            raise ValueError("alpha must be > 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if not self.quad_tol > 0:
            raise ValueError("quad_tol must be > 0")


class IntegrationError(RuntimeError):
    """Quadrature did not converge within its period budget."""

    def __init__(self, message: str, partial: float, estimate: float):
        super().__init__(message)
        self.partial = partial
        self.estimate = estimate


def binomial_survival_ratio(n: int, level: int, kappa: int) -> float:
    """C(n - n/2^level, kappa) / C(n, kappa) as a running product.

    The probability that a fixed level-``level`` node (spanning
    n/2^level leaves) is failure-free when kappa failures are placed
    uniformly. Running products keep everything in float range for n up
    to 2^21; the ratio is 0 whenever kappa exceeds the complement.
    """
    _require_power_of_two(n)
    levels = n.bit_length() - 1
    if not 1 <= level <= levels:
        raise ValueError(f"level must be in [1, {levels}]")
    if not 0 <= kappa <= n:
        raise ValueError("kappa must be in [0, n]")
    block = n >> level
    remaining = n - block
    if kappa > remaining:
        return 0.0
    ratio = 1.0
    for j in range(kappa):
        ratio *= (remaining - j) / (n - j)
    return ratio


def expected_noise_count_exact(query: NoiseCountQuery) -> float:
    """Exact expected number of noises added after random failures.

    EY = n - kappa
         + n * sum_{i=1}^{log2(n)-1} [C(n - n/2^i, kappa) / C(n, kappa)]
                                     * (beta_i - beta_{i+1}).
    """
    n, kappa = query.n, query.kappa
    betas = beta_levels(n, query.delta)
    levels = n.bit_length() - 1
    terms = [
        binomial_survival_ratio(n, i, kappa) * (betas[i] - betas[i + 1])
        for i in range(1, levels)
    ]
    return n - kappa + n * math.fsum(terms)


def expected_noise_count_lower_bound(
    query: NoiseCountQuery,
    allow_any_delta: bool = False,
) -> float:
    """Closed-form lower bound on the expected noise count.

    Valid for 2^4 <= n <= 2^21 with delta = 0.05 (the regime in which
    the bound's constants were derived); other delta values are
    rejected unless ``allow_any_delta`` is set, in which case the same
    expression is evaluated without a validity claim.
    """
    n, kappa = query.n, query.kappa
    if not 2**4 <= n <= MAX_USERS:
        raise ValueError(f"bound is validated for n in [2^4, 2^21], got {n}")
    if query.delta != 0.05 and not allow_any_delta:
        raise ValueError(
            "bound is validated for delta = 0.05; pass allow_any_delta=True "
            "to evaluate it outside the validated regime"
        )
    levels = n.bit_length() - 1
    log_term = math.log((levels + 1) / query.delta)
    fast = math.exp(-8.0 * kappa / n)
    slow = math.exp(-16.0 * kappa / n)
    return n - kappa - n * (fast + (log_term / 8.0) * (slow - fast))


# --- expected absolute error of a sum of geometric noises -------------------


def _integrand(t: float, alpha: float, m: int, scale: float) -> float:
    """4 alpha m sin(t) (alpha-1)^{2m} / (t pi (alpha^2 - 2 alpha cos t + 1)^{m+1}).

    The denominator is rewritten as
    (alpha-1)^2 + 4 alpha sin^2(t/2), so the kernel collapses to
    (alpha-1)^{-2} * (1 + c sin^2(t/2))^{-(m+1)} with
    c = 4 alpha / (alpha-1)^2, evaluated in log space: the raw powers
    underflow catastrophically for large m.
    """
    s2 = math.sin(0.5 * t) ** 2
    log_kernel = -2.0 * math.log(alpha - 1.0) - (m + 1.0) * math.log1p(scale * s2)
    sinc = math.sin(t) / t if t != 0.0 else 1.0
    return (4.0 * alpha * m / math.pi) * sinc * math.exp(log_kernel)


def _edge_breakpoints(a: float, b: float, width: float) -> list[float]:
    """Breakpoints laddering out of the kernel peaks at both interval edges."""
    pts: list[float] = []
    x = max(width, 1e-300)
    while x < math.pi:
        pts.append(a + x)
        pts.append(b - x)
        x *= 8.0
    return sorted(set(pts))


def _integrate_period(
    alpha: float,
    m: int,
    k: int,
    width: float,
    epsabs: float,
    epsrel: float,
    weight: Callable[[float], float] | None = None,
) -> tuple[float, float]:
    """Gauss-Kronrod integral of the integrand (optionally reweighted) over period k."""
    a = 2.0 * math.pi * k
    b = a + 2.0 * math.pi
    scale = 4.0 * alpha / (alpha - 1.0) ** 2

    if weight is None:
        f = lambda t: _integrand(t, alpha, m, scale)
    else:
        f = lambda t: _integrand(t, alpha, m, scale) * weight(t)
    pts = _edge_breakpoints(a, b, width)
    value, err = quad(
        f, a, b, points=pts or None, limit=max(200, 20 * len(pts)),
        epsabs=epsabs, epsrel=epsrel,
    )
    return value, err


def expected_abs_error_integral(query: AbsErrorQuery, max_periods: int = 64) -> float:
    """E|Z| for Z a sum of m independent Geom(alpha) noises.

    Evaluates the characteristic-function integral over [0, inf):
    periods [2k pi, 2(k+1) pi] are integrated one by one (adaptive
    Gauss-Kronrod, with breakpoints clustered into the kernel peaks of
    width ~ (alpha-1)/sqrt(alpha m) at the period edges). Explicit
    summation stops once a period contributes less than quad_tol of the
    accumulated value and k >= 4, or after 16 periods; either way the
    entire remaining infinite sum is then folded exactly into one
    integral over a single period, weighted by a digamma difference, so
    the stated tolerance is met without walking thousands of periods
    (the per-period contributions only decay like 1/k^2).

    Returns 0 for m = 0. Raises IntegrationError if the period budget
    is exhausted or the accumulated quadrature error estimate ends up
    above tolerance; the partial sum and the estimate ride on the
    exception.
    """
    if query.m == 0:
        return 0.0
    alpha, m, tol = query.alpha, query.m, query.quad_tol
    width = (alpha - 1.0) / math.sqrt(alpha * m)
    epsabs = max(tol / 64.0, 1e-15)
    epsrel = max(tol / 64.0, 1e-13)
    explicit_cap = min(16, max_periods)

    total = 0.0
    err = 0.0
    k = 0
    while True:
        value_k, err_k = _integrate_period(alpha, m, k, width, epsabs, epsrel)
        total += value_k
        err += err_k
        if k >= 4 and (abs(value_k) <= tol * max(abs(total), 1e-300) or k + 1 >= explicit_cap):
            break
        k += 1
        if k >= max_periods:
            raise IntegrationError(
                f"no convergence within {max_periods} periods "
                f"(partial sum {total}, error estimate {err})",
                partial=total,
                estimate=err,
            )

    # Remaining sum over periods j > k:
    #   sum_{j>k} int_0^{2pi} w(s) / (2 pi j + s) ds
    # = int_0^{2pi} w(s) * (psi(k+1) - psi(k+1 + s/(2pi))) / (2pi) ds
    # (w is the integrand without the 1/t factor; it integrates to zero
    # over a full period, which lets the harmonic offsets telescope
    # into the digamma difference).
    def tail_weight(t: float) -> float:
        return t * (digamma(k + 1) - digamma(k + 1 + t / (2.0 * math.pi))) / (2.0 * math.pi)

    tail, tail_err = _integrate_period(alpha, m, 0, width, epsabs, epsrel, weight=tail_weight)
    total += tail
    err += tail_err
    if err > tol * max(1.0, abs(total)):
        raise IntegrationError(
            f"quadrature error estimate {err} above tolerance for value {total}",
            partial=total,
            estimate=err,
        )
    return total


def expected_abs_error_lower_bound(
    n: int,
    epsilon: float,
    gamma: float,
    strict: bool = True,
) -> float:
    """Closed-form lower bound on E|Z| with m = gamma * n noises.

    The bound is
        c * sqrt(gamma) * log2(n) * sqrt(n) / (epsilon sqrt(pi)) - 0.1,
    with c = 2 * xi * cstar, xi = 0.96, and cstar the product
    (1 - eta^2/2)(1 - alpha (m+1) eta^2 / (3 (alpha-1)^2)) evaluated at
    this instance's alpha = exp(epsilon / (log2(n)+1)), m = gamma n and
    eta^2 = pi (alpha-1)^2 / (4 alpha m). The derivation is validated
    for n >= 2^7 at epsilon = 0.5; outside that regime the call is
    rejected unless ``strict`` is False.

    gamma = 0 returns the vacuous -0.1.
    """
    _require_power_of_two(n)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    in_regime = n >= 2**7 and epsilon == 0.5
    if strict and not in_regime:
        raise ValueError(
            "bound constants validated for n >= 2^7 and epsilon = 0.5; "
            "pass strict=False to extrapolate"
        )
    if gamma == 0.0:
        return -0.1
    levels = n.bit_length() - 1
    alpha = math.exp(epsilon / (levels + 1))
    m = gamma * n
    eta_sq = math.pi * (alpha - 1.0) ** 2 / (4.0 * alpha * m)
    cstar = (1.0 - eta_sq / 2.0) * (1.0 - alpha * (m + 1.0) * eta_sq / (3.0 * (alpha - 1.0) ** 2))
    xi = 0.96
    # xi must satisfy exp(xi * x) <= 1 + x at x = epsilon / log2(n).
    x = epsilon / levels
    if xi * x > math.log1p(x):
        raise ValueError(f"xi = {xi} invalid at epsilon={epsilon}, n={n}")
    c = 2.0 * xi * cstar
    return c * math.sqrt(gamma) * levels * math.sqrt(n) / (epsilon * math.sqrt(math.pi)) - 0.1


# --- sweeps ------------------------------------------------------------------

KAPPA_RULES: dict[str, Callable[[int], int]] = {
    "log2": lambda n: int(math.log2(n)),
    "n-over-64": lambda n: n // 64,
    "const5": lambda n: 5,
}


def figure_sweep(
    kappa_rule: str | Callable[[int], int],
    n_values: Sequence[int],
    epsilon: float = 0.5,
    delta: float = 0.05,
    quad_tol: float = 1e-9,
    experiment: str = "sweep",
) -> list[ExperimentRow]:
    """Compose exact noise count and absolute-error integral over n.

    For each n: kappa from the rule, EY exactly, then E|Z| with
    m = round(EY) and alpha = exp(epsilon / (log2(n)+1)). Rows carry
    the normalized error E|Z| / n as the analytic value, with EY, m and
    E|Z| in the extras.
    """
    rule = KAPPA_RULES[kappa_rule] if isinstance(kappa_rule, str) else kappa_rule
    rows: list[ExperimentRow] = []
    for n in n_values:
        _require_power_of_two(n)
        if not 2**4 <= n <= MAX_USERS:
            raise ValueError(f"sweep n must be in [2^4, 2^21], got {n}")
        kappa = rule(n)
        query = NoiseCountQuery(n=n, kappa=kappa, delta=delta)
        ey = expected_noise_count_exact(query)
        m = int(round(ey))
        levels = n.bit_length() - 1
        alpha = math.exp(epsilon / (levels + 1))
        abs_err = expected_abs_error_integral(AbsErrorQuery(alpha=alpha, m=m, quad_tol=quad_tol))
        rows.append(
            ExperimentRow(
                experiment=experiment,
                n=n,
                kappa=kappa,
                epsilon=epsilon,
                delta=delta,
                analytic=abs_err / n,
                extras=(
                    ("expected_noise_count", ey),
                    ("noise_terms", m),
                    ("expected_abs_error", abs_err),
                ),
            )
        )
    return rows


def powers_of_two(lo: int, hi: int) -> list[int]:
    """All powers of two in [lo, hi]."""
    out = []
    n = 1
    while n <= hi:
        if n >= lo:
            out.append(n)
        n *= 2
    return out
