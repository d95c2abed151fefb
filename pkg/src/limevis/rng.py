"""Deterministic random-number plumbing.

All stochastic steps in the pipeline draw from counter-based Philox
generators keyed by a SHA-256 digest of ``(master seed, stream tags...)``.
Derived streams are therefore stable across platforms, interpreter runs,
and worker counts: parallel per-image work can never perturb sampling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(parts: tuple) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return h.digest()


def derive_seed(*parts) -> int:
    """Collapse a master seed plus stream tags into a stable 63-bit seed."""
    return int.from_bytes(_digest(parts)[:8], "little") >> 1


def generator(*parts) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``parts``."""
    key = int.from_bytes(_digest(parts)[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))
