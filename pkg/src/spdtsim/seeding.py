"""Deterministic seed derivation and counter-based uniform variates.

Two mechanisms keep every run reproducible independent of execution order
and worker count:

* ``derive_seed`` turns (master seed, purpose labels/indices) into an
  independent 64-bit stream seed by hashing, used to seed numpy generators
  for sequential sampling (trace generation, pool picks).
* ``hashed_u01`` produces the i-th uniform of a keyed stream directly from
  (key, index) with a splitmix64-style mixer, so per-link and per-node draws
  can be evaluated lazily, in any order, on any worker, with identical values.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_C1 = np.uint64(0x9E3779B97F4A7C15)
_C2 = np.uint64(0xBF58476D1CE4E5B9)
_C3 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = float(2.0 ** -53)


def derive_seed(*parts) -> int:
    """Hash an arbitrary tuple of labels/ints into a 64-bit seed."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z + _C1) & _MASK
    z = ((z ^ (z >> _S30)) * _C2) & _MASK
    z = ((z ^ (z >> _S27)) * _C3) & _MASK
    return z ^ (z >> _S31)


def stream_key(*parts) -> np.uint64:
    return np.uint64(derive_seed(*parts))


def hashed_u01(key: np.uint64, index) -> np.ndarray:
    """Uniform(0,1) variates for the given indices of the keyed stream."""
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(idx ^ np.uint64(key))
        z = _mix(z + np.uint64(key))
    return np.asarray((z >> _S11) * _INV53, dtype=np.float64)


def hashed_randint(key: np.uint64, index, lo: int, hi: int) -> np.ndarray:
    """Uniform integers in [lo, hi] inclusive, keyed like hashed_u01."""
    u = hashed_u01(key, index)
    vals = lo + np.floor(u * (hi - lo + 1)).astype(np.int64)
    return np.minimum(vals, hi)
