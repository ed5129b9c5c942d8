"""Deterministic RNG derivation.

Every stochastic choice in the package draws from a generator derived
from (root seed, purpose tag, counter) so that training batches, penalty
interpolants and splits are reproducible from the config seed alone.
"""

from __future__ import annotations

import hashlib

import numpy as np
import torch


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    digest = hashlib.blake2s(str(key).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(*keys) -> np.random.SeedSequence:
    """Build a SeedSequence from a mix of integer and string keys."""
    return np.random.SeedSequence([_key_to_int(k) for k in keys])


def rng(*keys) -> np.random.Generator:
    """NumPy generator deterministically derived from the given keys."""
    return np.random.default_rng(seed_sequence(*keys))


def torch_generator(*keys) -> torch.Generator:
    """CPU torch generator deterministically derived from the given keys."""
    gen = torch.Generator(device="cpu")
    gen.manual_seed(int(seed_sequence(*keys).generate_state(1, dtype=np.uint64)[0]))
    return gen
