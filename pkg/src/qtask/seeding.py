"""Deterministic seed derivation shared by the runtime and experiment code.

All stochastic code paths draw from numpy's PCG64 generator, seeded either
directly by the caller or through :func:`derive_seed`. Derivation hashes the
parent seed together with a component path (e.g. a task id), so results are
reproducible regardless of scheduling order or device count.
"""

from __future__ import annotations

import hashlib

_SEED_MASK = (1 << 63) - 1


def derive_seed(base: int, *components: int | str) -> int:
    """Derive a child seed from ``base`` and a component path.

    Uses SHA-256 over the decimal/text rendering of the inputs and keeps the
    low 63 bits, so the mapping is stable across platforms and releases.
    """
    text = ":".join([str(base), *(str(c) for c in components)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _SEED_MASK
