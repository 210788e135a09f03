"""Deterministic random-stream derivation.

Every stochastic component derives its generator from a master seed plus a
tuple of context tags (strings or ints). Identical tags give bit-identical
streams across runs and platforms, and distinct tags give independent
streams, so work items can run in any order (or concurrently) without
changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: int | str) -> int:
    """Hash context parts into a stable 128-bit integer seed."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            h.update(b"s" + part.encode("utf-8"))
        else:
            h.update(b"i" + int(part).to_bytes(16, "little", signed=True))
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:16], "little")


def derive_rng(*parts: int | str) -> np.random.Generator:
    """A PCG64 generator keyed by the given context parts."""
    return np.random.default_rng(derive_seed(*parts))
