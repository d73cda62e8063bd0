"""Plaintext-semantics simulator of fault-tolerant binary-tree aggregation.

Users sit at the leaves of a full binary tree (the "Binary Protocol"
arrangement). When some leaves fail, the survivors are covered by the
maximal failure-free tree nodes; every user covered by a node at level
i contributes its value plus a draw from the diluted geometric
distribution with level-dependent dilution probability beta_i. The
encryption layer of the original scheme is deliberately not simulated
here: the quantities of interest are the noise count and the noise sum,
which live entirely in the plaintext semantics.

Levels are numbered from the root: level 0 is the root, level
``log2(n)`` is the leaf level, and a node at level i spans ``n / 2**i``
leaves.
"""

from __future__ import annotations

import itertools
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass

import numpy as np

from .noise import GeomParams, geom_sample

__all__ = [
    "TreeConfig",
    "FailurePattern",
    "Cover",
    "RoundResult",
    "beta_levels",
    "beta_schedule",
    "sample_failures",
    "compute_cover",
    "node_span",
    "simulate_round",
    "simulate_many",
    "noise_count_bruteforce",
]

MAX_USERS = 2**21


def _require_power_of_two(n: int) -> None:
    if n < 2 or n & (n - 1):
        raise ValueError(f"user count must be a power of two >= 2, got {n}")


@dataclass(frozen=True)
class TreeConfig:
    """One protocol instance: user count and privacy parameters."""

    n: int
    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        _require_power_of_two(self.n)
        if self.n > MAX_USERS:
            raise ValueError(f"user count above supported maximum 2^21, got {self.n}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")

    @property
    def levels(self) -> int:
        """Leaf level index log2(n); the tree has levels 0..levels."""
        return self.n.bit_length() - 1

    @property
    def delta0(self) -> float:
        """Per-level privacy share delta / (log2(n) + 1)."""
        return self.delta / (self.levels + 1)

    @property
    def alpha(self) -> float:
        """Geometric decay rate exp(epsilon / (log2(n) + 1))."""
        return math.exp(self.epsilon / (self.levels + 1))


@dataclass(frozen=True)
class FailurePattern:
    """Set of failed leaf indices within a tree of ``n`` leaves."""

    n: int
    failed: frozenset[int]

    def __post_init__(self) -> None:
        _require_power_of_two(self.n)
        if any(not 0 <= f < self.n for f in self.failed):
            raise ValueError("failed leaf index out of range")

    @property
    def kappa(self) -> int:
        return len(self.failed)


@dataclass(frozen=True)
class Cover:
    """Maximal clean tree nodes covering all surviving leaves.

    ``nodes`` holds (level, index) pairs, sorted; the node at (level, i)
    spans leaves [i * n/2^level, (i+1) * n/2^level).
    """

    n: int
    nodes: tuple[tuple[int, int], ...]

    def segments(self) -> list[tuple[int, int]]:
        """Covered leaf ranges as half-open (lo, hi) pairs."""
        return [node_span(self.n, level, index) for level, index in self.nodes]

    def covered_leaves(self) -> set[int]:
        out: set[int] = set()
        for lo, hi in self.segments():
            out.update(range(lo, hi))
        return out


@dataclass(frozen=True)
class RoundResult:
    """Outcome of one aggregation round.

    noise_count is the number of users whose dilution coin fired (each
    such user samples one geometric noise, which may itself be zero).
    """

    noisy_sum: int
    true_sum: int
    noise_count: int
    noise_sum: int

    def __post_init__(self) -> None:
        if self.noisy_sum != self.true_sum + self.noise_sum:
            raise ValueError("inconsistent round result")
        if self.noise_count < 0:
            raise ValueError("noise_count must be >= 0")


def node_span(n: int, level: int, index: int) -> tuple[int, int]:
    """Half-open leaf range spanned by the node (level, index)."""
    size = n >> level
    if size == 0 or not 0 <= index < (1 << level):
        raise ValueError(f"no node ({level}, {index}) in a tree over {n} leaves")
    return index * size, (index + 1) * size


def beta_levels(n: int, delta: float) -> np.ndarray:
    """Dilution probability per level: min(ln(1/delta0) / |B_i|, 1).

    ``|B_i| = n / 2**i`` is the leaf span of a level-i node and
    ``delta0 = delta / (log2(n) + 1)``. The natural logarithm is used
    in the schedule while levels are counted in base 2.
    """
    _require_power_of_two(n)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    levels = n.bit_length() - 1
    log_term = math.log((levels + 1) / delta)
    sizes = n >> np.arange(levels + 1)
    return np.minimum(log_term / sizes, 1.0)


def beta_schedule(config: TreeConfig) -> np.ndarray:
    """Per-level dilution probabilities beta_0..beta_log2(n) for a config."""
    return beta_levels(config.n, config.delta)


def sample_failures(n: int, kappa: int, rng: np.random.Generator) -> FailurePattern:
    """Uniformly random kappa-subset of the n leaves."""
    _require_power_of_two(n)
    if not 0 <= kappa <= n:
        raise ValueError(f"kappa must be in [0, {n}], got {kappa}")
    failed = rng.choice(n, size=kappa, replace=False)
    return FailurePattern(n, frozenset(int(f) for f in failed))


def compute_cover(n: int, failures: FailurePattern) -> Cover:
    """The unique cover by clean nodes whose parents are not clean.

    Descends from the root; a node with no failed leaf in its span is
    emitted (its parent, having triggered the descent, is not clean),
    otherwise its children are visited. With all leaves failed the
    cover is empty.
    """
    _require_power_of_two(n)
    if failures.n != n:
        raise ValueError("failure pattern built for a different tree size")
    failed = sorted(failures.failed)
    nodes: list[tuple[int, int]] = []

    def descend(level: int, index: int, lo: int, hi: int) -> None:
        if bisect_right(failed, hi - 1) - bisect_left(failed, lo) == 0:
            nodes.append((level, index))
            return
        if hi - lo == 1:
            return  # a failed leaf
        mid = (lo + hi) // 2
        descend(level + 1, 2 * index, lo, mid)
        descend(level + 1, 2 * index + 1, mid, hi)

    if len(failed) < n:
        descend(0, 0, 0, n)
    return Cover(n, tuple(sorted(nodes)))


def _covered_count_by_level(cover: Cover) -> dict[int, int]:
    counts: dict[int, int] = {}
    for level, _ in cover.nodes:
        counts[level] = counts.get(level, 0) + (cover.n >> level)
    return counts


def simulate_round(
    config: TreeConfig,
    values: np.ndarray,
    failures: FailurePattern,
    rng: np.random.Generator,
    value_bound: int = 1,
) -> RoundResult:
    """Run one aggregation round and return its noise statistics.

    Every surviving leaf is covered by exactly one cover node; a leaf
    covered at level i adds a Geom^{beta_i}(alpha) draw with
    ``alpha = exp(epsilon / (log2(n) + 1))``. Values of failed leaves
    are ignored.

    Args:
      config: tree and privacy parameters.
      values: integer array of length n; surviving entries must lie in
        [0, value_bound].
      failures: the failed leaves for this round.
      rng: numpy generator for dilution coins and geometric draws.
      value_bound: inclusive upper bound on per-user values.

    Raises:
      ValueError: on a surviving value outside [0, value_bound].
    """
    values = np.asarray(values)
    if values.shape != (config.n,):
        raise ValueError(f"values must have shape ({config.n},)")
    if failures.n != config.n:
        raise ValueError("failure pattern built for a different tree size")

    alive = np.ones(config.n, dtype=bool)
    for f in failures.failed:
        alive[f] = False
    live_values = values[alive]
    if live_values.size and (live_values.min() < 0 or live_values.max() > value_bound):
        raise ValueError(f"surviving values must lie in [0, {value_bound}]")

    cover = compute_cover(config.n, failures)
    betas = beta_schedule(config)
    geom = GeomParams(config.alpha)

    true_sum = int(live_values.sum())
    noise_count = 0
    noise_sum = 0
    for level, covered in sorted(_covered_count_by_level(cover).items()):
        coins = rng.random(covered) < betas[level]
        fired = int(np.count_nonzero(coins))
        if fired:
            draws = geom_sample(geom, rng, size=fired)
            noise_count += fired
            noise_sum += int(np.sum(draws))
    return RoundResult(
        noisy_sum=true_sum + noise_sum,
        true_sum=true_sum,
        noise_count=noise_count,
        noise_sum=noise_sum,
    )


def simulate_many(
    config: TreeConfig,
    kappa: int,
    trials: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo rounds with fresh uniform failures each round.

    Values are all-zero (the noise statistics do not depend on them).
    Returns (noise_counts, noise_sums) as int64 arrays of length trials.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    values = np.zeros(config.n, dtype=np.int64)
    counts = np.empty(trials, dtype=np.int64)
    sums = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        failures = sample_failures(config.n, kappa, rng)
        result = simulate_round(config, values, failures, rng)
        counts[t] = result.noise_count
        sums[t] = result.noise_sum
    return counts, sums


def noise_count_bruteforce(
    n: int,
    kappa: int,
    delta: float,
    max_patterns: int = 10**6,
) -> float:
    """Exact expected noise count by enumerating every failure pattern.

    For each kappa-subset of leaves the cover is computed and the
    expected count sum_i (covered leaves at level i) * beta_i recorded;
    the result is the average over all C(n, kappa) subsets. Serves as
    the enumeration oracle for the closed-form expectation.

    Raises:
      ValueError: if C(n, kappa) exceeds ``max_patterns``.
    """
    _require_power_of_two(n)
    if not 0 <= kappa <= n:
        raise ValueError(f"kappa must be in [0, {n}]")
    total = math.comb(n, kappa)
    if total > max_patterns:
        raise ValueError(
            f"C({n}, {kappa}) = {total} patterns exceeds the enumeration "
            f"guard of {max_patterns}"
        )
    betas = beta_levels(n, delta)
    per_pattern: list[float] = []
    for subset in itertools.combinations(range(n), kappa):
        cover = compute_cover(n, FailurePattern(n, frozenset(subset)))
        per_pattern.append(
            math.fsum(
                covered * betas[level]
                for level, covered in _covered_count_by_level(cover).items()
            )
        )
    return math.fsum(per_pattern) / total
