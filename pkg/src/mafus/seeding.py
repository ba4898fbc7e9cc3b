"""Deterministic seed derivation.

Every random stage draws its own seed from one master seed and a stage
name, so stages can be re-run in isolation and full runs are bitwise
reproducible.
"""

import hashlib

import numpy as np

_MOD = 2**31 - 1


def derive_seed(master: int, stage: str) -> int:
    """Map (master seed, stage name) to a stable 31-bit seed."""
    digest = hashlib.blake2s(f"{master}:{stage}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") % _MOD


def rng_for(master: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, stage))
