"""Masked-sum aggregation with local aggregators (PAALEC).

Every node shares a uniform random mask with each graph neighbor in
both directions; the masks cancel in the global sum but blind each
individual contribution. A node submits
``c_v = sum(received masks) - sum(sent masks) + noise + value`` in the
exponent of a re-randomized layered encryption of 1. Its local
aggregator strips the local key layer and multiplies its cell's
ciphertexts; the aggregator decrypts the product of all cells with the
master key and recovers ``sum(values) + sum(noises)`` by a windowed
discrete log.

Phases follow the protocol: a one-time setup (publishing the layered
encryptions of 1), then per round a mask phase and a send phase. Nodes
absent from round start simply never take part; a node that dies
between the two phases breaks mask cancellation, which is available as
an injectable fault (``drop_after_masks``) and deliberately not
repaired.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .elgamal import (
    Ciphertext,
    DlogWindowError,
    GroupParams,
    KeyPair,
    add_layer,
    bounded_dlog,
    ciphertext_to_hex,
    combine,
    decrypt_element,
    enc_one,
    fill,
    keygen,
    partial_decrypt,
    reencrypt,
)
from .graphs import Graph, components_bfs
from .noise import DilutedParams, compound_noise_quantile, diluted_sample

__all__ = [
    "PaalecConfig",
    "NodeState",
    "AdversaryModel",
    "RoundOutcome",
    "ComponentLeak",
    "BudgetReport",
    "PaalecNetwork",
    "setup",
    "exchange_masks",
    "node_contribution",
    "local_aggregate",
    "final_aggregate",
    "honest_component_leakage",
    "privacy_budget_check",
    "suggested_beta",
    "write_round_trace",
]

DEFAULT_DLOG_TAIL = 1e-9


def suggested_beta(n: int, delta: float) -> float:
    """Dilution probability 2 ln(1/delta) / n (capped at 1).

    With at least n/2 honest participants this keeps the probability
    that nobody adds noise at or below delta.
    """
    return min(1.0, 2.0 * math.log(1.0 / delta) / n)


@dataclass(frozen=True)
class PaalecConfig:
    """Protocol parameters: population, cells, bounds, privacy knobs.

    ``assignment[v]`` is the index of node v's unique local aggregator.
    ``beta`` defaults to 2 ln(1/delta) / n.
    """

    n: int
    k: int
    assignment: tuple[int, ...]
    value_bound: int = 1
    epsilon: float = 0.5
    delta: float = 0.05
    beta: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("need at least one node")
        if not 1 <= self.k < self.n:
            raise ValueError("need 1 <= k < n local aggregators")
        if len(self.assignment) != self.n:
            raise ValueError("assignment must map every node")
        if any(not 0 <= a < self.k for a in self.assignment):
            raise ValueError("assignment index out of range")
        if self.value_bound < 1:
            raise ValueError("value_bound must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")

    @property
    def alpha(self) -> float:
        """Geometric decay rate exp(epsilon / value_bound)."""
        return math.exp(self.epsilon / self.value_bound)

    @property
    def effective_beta(self) -> float:
        return self.beta if self.beta is not None else suggested_beta(self.n, self.delta)

    @staticmethod
    def round_robin(
        n: int,
        k: int,
        value_bound: int = 1,
        epsilon: float = 0.5,
        delta: float = 0.05,
        beta: Optional[float] = None,
    ) -> "PaalecConfig":
        return PaalecConfig(
            n=n,
            k=k,
            assignment=tuple(v % k for v in range(n)),
            value_bound=value_bound,
            epsilon=epsilon,
            delta=delta,
            beta=beta,
        )


@dataclass
class NodeState:
    """Per-node round state: private value, sampled noise, masked sum."""

    node: int
    value: int
    noise: int
    contribution: Optional[int] = None  # c_v mod q, set by node_contribution


@dataclass(frozen=True)
class AdversaryModel:
    """Which parties the adversary controls."""

    compromised: frozenset[int]
    agg_compromised: bool = True
    compromised_aggregators: frozenset[int] = frozenset()


@dataclass(frozen=True)
class ComponentLeak:
    """What the adversary can pin down for one honest component."""

    nodes: frozenset[int]
    component_sum: int  # sum over the component of value + noise (signed)
    adversary_view: int  # same quantity reconstructed from the view, mod q
    matches: bool


@dataclass(frozen=True)
class BudgetReport:
    """Result of the no-noise probability check (1 - beta)^(n/2) <= delta."""

    n: int
    beta: float
    delta: float
    prob_no_noise: float
    passes: bool
    rule_beta: float  # 2 ln(1/delta) / n


@dataclass(frozen=True)
class RoundOutcome:
    """Full audit trace of one aggregation round.

    ``decoded_sum`` is what the aggregator recovered; ``expected_sum``
    is the plaintext shadow sum(values) + sum(noises) over the
    participants that completed the round. ``masks`` is keyed by
    (sender, receiver); everything mask-valued lives mod ``q``.
    """

    q: int
    participants: tuple[int, ...]
    values: dict[int, int]
    noises: dict[int, int]
    masks: dict[tuple[int, int], int]
    contributions: dict[int, int]
    node_ciphertexts: dict[int, Ciphertext]
    cell_ciphertexts: dict[int, Ciphertext]
    decoded_sum: int
    expected_sum: int
    window: tuple[int, int]


def setup(
    group: GroupParams,
    agg_key: KeyPair,
    local_keys: Sequence[KeyPair],
    rng: random.Random,
) -> list[Ciphertext]:
    """One-time publication: Enc(1) under sk + sk_i for every cell i.

    The aggregator broadcasts an encryption of 1 under its key; each
    local aggregator layers its own key on top and publishes the result
    to its cell.
    """
    broadcast = enc_one(group, agg_key.sk, rng)
    return [add_layer(group, broadcast, lk.sk, rng) for lk in local_keys]


def exchange_masks(
    graph: Graph,
    q: int,
    rng: random.Random,
    participants: Optional[Iterable[int]] = None,
) -> dict[tuple[int, int], int]:
    """Uniform mask per ordered edge among participants.

    Key (u, v) holds the mask u generated and sent to v; both
    directions of every participating edge are present. Nodes outside
    ``participants`` neither send nor receive masks.
    """
    if participants is None:
        alive = set(range(graph.n))
    else:
        alive = set(int(v) for v in participants)
    table: dict[tuple[int, int], int] = {}
    for u, v in graph.edges.tolist():
        if u in alive and v in alive:
            table[(u, v)] = rng.randrange(q)
            table[(v, u)] = rng.randrange(q)
    return table


def node_contribution(
    group: GroupParams,
    state: NodeState,
    received: Mapping[int, int],
    sent: Mapping[int, int],
    published_ct: Ciphertext,
    rng: random.Random,
    value_bound: int = 1,
) -> tuple[NodeState, Ciphertext]:
    """Masked contribution of one node and its encryption.

    c_v = sum(received) - sum(sent) + noise + value (mod q); the
    published cell ciphertext is re-randomized first and then filled
    with g^c_v, so encrypting needs no private key.
    """
    if not 0 <= state.value <= value_bound:
        raise ValueError(f"value {state.value} outside [0, {value_bound}]")
    if set(received) != set(sent):
        raise ValueError("received and sent masks must cover the same neighbors")
    c = (sum(received.values()) - sum(sent.values()) + state.noise + state.value) % group.q
    state.contribution = c
    ct = fill(group, reencrypt(group, published_ct, rng), group.element(c))
    return state, ct


def local_aggregate(
    group: GroupParams,
    cts: Sequence[Ciphertext],
    sk_local: int,
) -> Ciphertext:
    """Strip the local key layer from each ciphertext, then multiply.

    The result encrypts g^(sum of the cell's contributions) under the
    master key alone. An empty cell yields the identity ciphertext.
    """
    return combine(group, [partial_decrypt(group, ct, sk_local) for ct in cts])


def final_aggregate(
    group: GroupParams,
    cell_cts: Sequence[Ciphertext],
    sk: int,
    window: tuple[int, int],
) -> int:
    """Decrypt each cell, multiply, and decode the sum by windowed dlog.

    Raises DlogWindowError when the exponent is not inside ``window``
    (noise beyond the sized window, or corrupted masks).
    """
    y = 1
    for ct in cell_cts:
        y = y * decrypt_element(group, ct, sk) % group.p
    lo, hi = window
    result = bounded_dlog(group, y, lo, hi)
    if result is None:
        raise DlogWindowError(
            f"aggregate exponent not found in window [{lo}, {hi}]", window
        )
    return result


def privacy_budget_check(config: PaalecConfig) -> BudgetReport:
    """Report whether (1 - beta)^(n/2) <= delta for the configured beta."""
    beta = config.effective_beta
    prob = (1.0 - beta) ** (config.n / 2.0)
    return BudgetReport(
        n=config.n,
        beta=beta,
        delta=config.delta,
        prob_no_noise=prob,
        passes=prob <= config.delta,
        rule_beta=suggested_beta(config.n, config.delta),
    )


class PaalecNetwork:
    """A deployed network: group, keys, published ciphertexts, topology.

    Setup runs once at construction; rounds are then pure functions of
    the caller-provided streams, values and participant set.
    """

    def __init__(
        self,
        group: GroupParams,
        config: PaalecConfig,
        graph: Graph,
        rng: random.Random,
    ):
        if graph.n != config.n:
            raise ValueError("graph and config disagree on the node count")
        self.group = group
        self.config = config
        self.graph = graph
        self.agg_key = keygen(group, rng)
        self.local_keys = [keygen(group, rng) for _ in range(config.k)]
        self.published = setup(group, self.agg_key, self.local_keys, rng)

    def dlog_window(self, participants: int) -> tuple[int, int]:
        """Decoding window [-B, n*Delta + B] sized from the noise tail.

        B bounds the 1 - 1e-9 quantile of the compound noise of the
        participating nodes, so a decode failure signals corruption
        rather than routine noise.
        """
        beta = self.config.effective_beta
        bound = 0
        if beta > 0:
            bound = compound_noise_quantile(
                participants, beta, self.config.alpha, DEFAULT_DLOG_TAIL
            )
        return (-bound, participants * self.config.value_bound + bound)

    def run_round(
        self,
        values: Mapping[int, int],
        noise_rng: np.random.Generator,
        mask_rng: random.Random,
        participants: Optional[Iterable[int]] = None,
        noises: Optional[Mapping[int, int]] = None,
        drop_after_masks: Iterable[int] = (),
        add_noise: bool = True,
    ) -> RoundOutcome:
        """One aggregation round over the surviving participants.

        Args:
          values: per-node private values in [0, value_bound]; only
            participants' entries are read.
          noise_rng: stream for the diluted geometric noises.
          mask_rng: stream for masks and ciphertext randomizers.
          participants: nodes alive at round start (default: all).
            Absent nodes neither exchange masks nor send ciphertexts.
          noises: forced per-node noise values (overrides sampling).
          drop_after_masks: fault injection, nodes that exchange masks
            but never send their ciphertext; breaks cancellation.
          add_noise: False forces all noises to zero.

        Raises:
          DlogWindowError: if the final exponent escapes the decode
            window (expected under the drop_after_masks fault).
        """
        cfg = self.config
        group = self.group
        alive = (
            list(range(cfg.n))
            if participants is None
            else sorted(set(int(v) for v in participants))
        )
        if any(not 0 <= v < cfg.n for v in alive):
            raise ValueError("participant out of range")
        alive_set = set(alive)
        dropped = set(int(v) for v in drop_after_masks)
        if not dropped <= alive_set:
            raise ValueError("drop_after_masks must be participants")

        masks = exchange_masks(self.graph, group.q, mask_rng, participants=alive)

        if noises is not None:
            noise_map = {v: int(noises.get(v, 0)) for v in alive}
        elif add_noise and cfg.effective_beta > 0:
            params = DilutedParams(alpha=cfg.alpha, beta=cfg.effective_beta)
            draws = diluted_sample(params, noise_rng, size=len(alive))
            noise_map = {v: int(d) for v, d in zip(alive, draws)}
        else:
            noise_map = {v: 0 for v in alive}

        senders = [v for v in alive if v not in dropped]
        adjacency = self.graph.neighbors()
        states: dict[int, NodeState] = {}
        node_cts: dict[int, Ciphertext] = {}
        for v in senders:
            neighbor_set = [u for u in adjacency[v] if u in alive_set]
            received = {u: masks[(u, v)] for u in neighbor_set}
            sent = {u: masks[(v, u)] for u in neighbor_set}
            state = NodeState(node=v, value=int(values[v]), noise=noise_map[v])
            state, ct = node_contribution(
                group, state, received, sent,
                self.published[cfg.assignment[v]], mask_rng,
                value_bound=cfg.value_bound,
            )
            states[v] = state
            node_cts[v] = ct

        cell_cts: dict[int, Ciphertext] = {}
        for i in range(cfg.k):
            cell = [node_cts[v] for v in senders if cfg.assignment[v] == i]
            cell_cts[i] = local_aggregate(group, cell, self.local_keys[i].sk)

        window = self.dlog_window(len(senders))
        decoded = final_aggregate(
            group, [cell_cts[i] for i in range(cfg.k)], self.agg_key.sk, window
        )
        expected = sum(states[v].value + states[v].noise for v in senders)
        return RoundOutcome(
            q=group.q,
            participants=tuple(senders),
            values={v: states[v].value for v in senders},
            noises={v: states[v].noise for v in senders},
            masks=masks,
            contributions={v: states[v].contribution for v in senders},
            node_ciphertexts=node_cts,
            cell_ciphertexts=cell_cts,
            decoded_sum=decoded,
            expected_sum=expected,
            window=window,
        )


def honest_component_leakage(
    graph: Graph,
    adversary: AdversaryModel,
    outcome: RoundOutcome,
) -> list[ComponentLeak]:
    """Reconstruct, per honest component, what the adversary can learn.

    For each connected component S of the subgraph induced by the
    honest participants, the masks interior to S cancel inside
    sum_{v in S} c_v; the surviving mask terms cross into compromised
    nodes, which the adversary generated or received itself.
    Subtracting them leaves exactly sum_{v in S} (value_v + noise_v)
    mod q: the component sum is adversary-computable, and (see the rank
    test in the suite) nothing finer is.
    """
    q = outcome.q
    honest = [v for v in outcome.participants if v not in adversary.compromised]
    comps = components_bfs(graph, restrict=honest)
    alive = set(outcome.participants)
    adjacency = graph.neighbors()
    leaks: list[ComponentLeak] = []
    for comp in comps:
        total_c = 0
        crossing = 0
        for v in comp:
            total_c += outcome.contributions[v]
            for u in adjacency[v]:
                if u in alive and u in adversary.compromised:
                    crossing += outcome.masks[(u, v)] - outcome.masks[(v, u)]
        component_sum = sum(outcome.values[v] + outcome.noises[v] for v in comp)
        view = (total_c - crossing) % q
        leaks.append(
            ComponentLeak(
                nodes=frozenset(comp),
                component_sum=component_sum,
                adversary_view=view,
                matches=(view - component_sum) % q == 0,
            )
        )
    return leaks


def write_round_trace(path: str, group: GroupParams, outcome: RoundOutcome) -> None:
    """Line-delimited audit trace: phase, actor, message type, hex payload."""
    width = 2 * ((group.q.bit_length() + 7) // 8)
    with open(path, "w") as fh:
        for (u, v), mask in sorted(outcome.masks.items()):
            fh.write(
                f"phase=mask actor=node:{u} type=mask_to:{v} "
                f"payload={format(mask, f'0{width}x')}\n"
            )
        for v in outcome.participants:
            fh.write(
                f"phase=send actor=node:{v} type=masked_ciphertext "
                f"payload={ciphertext_to_hex(group, outcome.node_ciphertexts[v])}\n"
            )
        for i, ct in sorted(outcome.cell_ciphertexts.items()):
            fh.write(
                f"phase=local actor=lagg:{i} type=cell_ciphertext "
                f"payload={ciphertext_to_hex(group, ct)}\n"
            )
        fh.write(
            f"phase=final actor=agg type=decoded_sum payload={outcome.decoded_sum:x}\n"
        )
