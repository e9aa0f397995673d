"""Deterministic, splittable random number generation.

Every source of randomness in the package flows through :class:`Rng`, a
thin immutable wrapper around a 64-bit seed.  Streams are produced by
numpy's Philox counter-based bit generator, which yields identical output
for identical seeds on every platform.  Child seeds are derived by hashing
(seed, tag) with BLAKE2b, so purpose-tagged sub-streams ("init",
"hyperplanes", "noise", ...) are independent and reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _derive(seed: int, tag) -> int:
    h = hashlib.blake2b(f"{seed}:{tag}".encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class Rng:
    """Immutable handle on a Philox stream identified by a 64-bit seed.

    An ``Rng`` is a value: :meth:`generator` returns a fresh generator at
    the start of the stream every time, so functions taking an ``Rng`` are
    pure in (arguments, seed).  Use :meth:`split` to hand independent
    streams to sub-tasks.
    """

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64

    def split(self, tag) -> "Rng":
        """Child Rng for the given purpose tag (string or integer)."""
        return Rng(_derive(self.seed, tag))

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(key=self.seed))

    def __repr__(self):
        return f"Rng({self.seed})"

    def __eq__(self, other):
        return isinstance(other, Rng) and other.seed == self.seed

    def __hash__(self):
        return hash(("Rng", self.seed))
