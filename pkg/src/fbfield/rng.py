"""Seeded, splittable random streams.

Each sample path gets its own counter-based Philox stream keyed by
``(seed, path_id)``, so a path's draws do not depend on how many other paths
are generated or in which order.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError

__all__ = ["check_seed", "mixed_paths", "path_generator", "path_normals"]

_SEED_MAX = 2**64 - 1
_BLOCK = 128


def check_seed(seed) -> int:
    """Validate a user seed (a nonnegative integer below 2**64)."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= _SEED_MAX:
        raise DomainError("seed must lie in [0, 2**64)")
    return seed


def path_generator(seed: int, path_id: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one path; ``stream`` separates unrelated uses of one seed."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=(int(stream), int(path_id)))
    return np.random.Generator(np.random.Philox(ss))


def path_normals(seed: int, n_paths: int, size: int, stream: int = 0, first_path: int = 0) -> np.ndarray:
    """Standard normals of shape ``(n_paths, size)``; row p comes from path ``first_path + p``."""
    out = np.empty((n_paths, size))
    for p in range(n_paths):
        out[p] = path_generator(seed, first_path + p, stream).standard_normal(size)
    return out


def mixed_paths(seed: int, n_paths: int, weights: np.ndarray, stream: int = 0) -> np.ndarray:
    """Rows ``z_p @ weights.T`` for paths p = 0 .. n_paths-1.

    Noise is drawn and multiplied in blocks of fixed shape (the last block
    is zero-padded), so BLAS sees identical operands for a given path and
    its values are bitwise independent of ``n_paths``.
    """
    weights = np.asarray(weights, dtype=float)
    out = np.empty((n_paths, weights.shape[0]))
    for start in range(0, n_paths, _BLOCK):
        stop = min(start + _BLOCK, n_paths)
        z = np.zeros((_BLOCK, weights.shape[1]))
        z[: stop - start] = path_normals(seed, stop - start, weights.shape[1], stream, start)
        out[start:stop] = (z @ weights.T)[: stop - start]
    return out
