"""Deterministic random-stream derivation.

Every random draw in the simulator comes from a generator derived here, so a
run is a pure function of its master seed regardless of node processing
order, worker count or which subcommand invoked it.
"""

from __future__ import annotations

import numpy as np

# Domain tags keep the derivation trees for unrelated purposes disjoint.
_TOPOLOGY = 0x54504F
_DATASET = 0x444154
_NODE_ROUND = 0x4E4F44
_REPETITION = 0x524550

__all__ = [
    "derived_seed",
    "topology_seed",
    "dataset_seed",
    "repetition_seed",
    "node_round_rng",
]


def derived_seed(master_seed: int, *parts: int) -> int:
    """Collapse (master_seed, *parts) into one 64-bit seed."""
    ss = np.random.SeedSequence((int(master_seed),) + tuple(int(p) for p in parts))
    return int(ss.generate_state(1, np.uint64)[0])


def topology_seed(master_seed: int) -> int:
    """Seed for graph generation; one per experiment, shared by repetitions."""
    return derived_seed(master_seed, _TOPOLOGY)


def repetition_seed(master_seed: int, repetition: int) -> int:
    """Seed for repetition ``repetition`` of an experiment."""
    return derived_seed(master_seed, _REPETITION, repetition)


def dataset_seed(master_seed: int, repetition: int = 0) -> int:
    """Seed for synthesizing the dataset of one repetition."""
    return derived_seed(master_seed, _DATASET, repetition)


def node_round_rng(master_seed: int, node_id: int, round_index: int) -> np.random.Generator:
    """Generator for all draws node ``node_id`` makes during one round.

    Draws consume the stream sequentially (search attempts first, then the
    final selection), so the result depends only on the identifying triple.
    """
    ss = np.random.SeedSequence(
        (int(master_seed), _NODE_ROUND, int(node_id), int(round_index))
    )
    return np.random.default_rng(ss)
