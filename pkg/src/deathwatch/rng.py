"""Reproducible random number generation.

Every random choice in the pipeline flows from a single 64-bit seed through
the generator specified here, so fold assignments and therefore reports are
bit-identical across runs, platforms, and reimplementations in other
languages. The spec is frozen under the version string ``PRNG_SPEC``:

* stream generator: splitmix64 (Steele, Lea & Flood's finalizer constants);
* stage/sub-stream seeds: ``derive_seed(seed, label)`` = one splitmix64
  scramble of ``seed XOR fnv1a64(label)``, with the label an ASCII stage
  name such as ``"cv-rep-17"``;
* bounded draws: ``next_u64() % n`` (modulo; the bias at n << 2**64 is
  irrelevant here and keeps the spec trivial to port);
* shuffles: Fisher-Yates from the top index down, swapping with
  ``bounded(i + 1)``;
* stratified fold assignment: per class (label 0 first, then 1), shuffle
  the class's sample indices with one stream, then deal them round-robin
  into folds 0, 1, ..., k-1.
"""

from __future__ import annotations

from typing import Sequence

PRNG_SPEC = "splitmix64-fnv1a-v1"

_MASK64 = (1 << 64) - 1


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 encoding of ``text``."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def _scramble(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, label: str) -> int:
    """Derive the sub-stream seed for a named stage from the top-level seed."""
    return _scramble((seed ^ fnv1a64(label)) & _MASK64)


class SplitMix64:
    """splitmix64 stream with the bounded-draw and shuffle rules of PRNG_SPEC."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        return _scramble(self._state)

    def bounded(self, n: int) -> int:
        """Uniform-ish integer in [0, n)."""
        if n <= 0:
            raise ValueError("bounded() requires n >= 1")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]


def stratified_fold_ids(labels: Sequence[int], folds: int, seed: int) -> list[int]:
    """Fold id per sample; each class's fold counts differ by at most one."""
    fold_of = [0] * len(labels)
    rng = SplitMix64(seed)
    for cls in (0, 1):
        members = [i for i, label in enumerate(labels) if label == cls]
        rng.shuffle(members)
        for position, idx in enumerate(members):
            fold_of[idx] = position % folds
    return fold_of
