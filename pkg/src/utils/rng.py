"""Seeded random streams.

One master seed per run; every (epoch, purpose) pair gets an independent
child stream, so subset sampling, batch shuffling and random baselines never
consume each other's draws.
"""

from typing import Dict

import numpy as np

from src.errors.exceptions import ValidationError

PURPOSES: Dict[str, int] = {
    "subset": 0,
    "shuffle": 1,
    "attack": 2,
}

SeededRng = np.random.Generator


def child_rng(seed: int, epoch: int, purpose: str) -> SeededRng:
    try:
        code = PURPOSES[purpose]
    except KeyError:
        raise ValidationError(f"unknown rng purpose '{purpose}', expected one of {sorted(PURPOSES)}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(epoch), code))
    return np.random.default_rng(sequence)
