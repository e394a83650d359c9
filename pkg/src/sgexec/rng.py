"""Small deterministic RNG shared by the Python and compiled kernels.

splitmix64 is used for all episode-level randomness (budget draws, random
policies, search rollouts) so that the compiled extension and the pure-Python
fallback consume identical streams. Map layout sampling uses numpy generators
seeded from this stream.
"""

from __future__ import annotations

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


def mix64(value: int) -> int:
    """One splitmix64 output for `value`; used for seed derivation."""
    z = (value + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Collision-resistant combination of integer seed components."""
    acc = 0x8C2F9D1B4E6A7351
    for p in parts:
        acc = mix64(acc ^ mix64(p & _MASK))
    return acc


class SplitMix64:
    """Sequential splitmix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def bounded(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo reduction; n is tiny here."""
        if n <= 0:
            raise ValueError("bounded() requires n >= 1")
        return self.next_u64() % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError("randint() requires lo <= hi")
        return lo + self.bounded(hi - lo + 1)

    def uniform(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)
