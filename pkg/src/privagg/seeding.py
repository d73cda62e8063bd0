"""Deterministic derivation of independent random streams from one master seed.

Numeric sampling uses ``numpy.random.Generator`` streams; arithmetic on
arbitrary-precision exponents (masks, keys, randomizers) uses
``random.Random`` streams. Both kinds are derived from the same master
seed through ``numpy.random.SeedSequence`` spawn keys, so a stream is
identified by a stable (domain, index) pair: adding trials never
reshuffles the streams of existing trials.
"""

from __future__ import annotations

import random

import numpy as np

# Stable domain tags for spawn keys. Never renumber; append only.
DOMAIN_NOISE = 0
DOMAIN_FAILURES = 1
DOMAIN_MASKS = 2
DOMAIN_KEYS = 3
DOMAIN_GROUP = 4
DOMAIN_VALUES = 5
DOMAIN_GRAPH = 6
DOMAIN_TRIAL = 7


def numpy_stream(master_seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for the stream identified by ``key``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


def python_stream(master_seed: int, *key: int) -> random.Random:
    """``random.Random`` for the stream identified by ``key``.

    Used where draws must cover arbitrary-precision integer ranges
    (group exponents); numpy generators are bounded to 64-bit words.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    words = ss.generate_state(8, dtype=np.uint64)
    seed = 0
    for w in words.tolist():
        seed = (seed << 64) | int(w)
    return random.Random(seed)


def trial_streams(master_seed: int, trial: int) -> tuple[np.random.Generator, random.Random]:
    """Per-trial (numeric, exponent) stream pair, stable under trial-count changes."""
    return (
        numpy_stream(master_seed, DOMAIN_TRIAL, trial, 0),
        python_stream(master_seed, DOMAIN_TRIAL, trial, 1),
    )
