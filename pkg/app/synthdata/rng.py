"""
Portable pseudo-random streams for the sprite generator.

The generator must produce byte-identical datasets in any language, so it
does not use numpy's bit generators. Each sprite owns an xorshift64* stream
seeded through the SplitMix64 finalizer from ``(seed, index)``:

    state_0 = splitmix64(seed + 0x9E3779B97F4A7C15 * (index + 1))
    x ^= x >> 12; x ^= x << 25; x ^= x >> 27      (all mod 2**64)
    output = x * 0x2545F4914F6CDD1D mod 2**64
    uniform = (output >> 11) * 2**-53              in [0, 1)

A zero state (never produced in practice) is replaced by the golden-ratio
constant, since xorshift has 0 as a fixed point.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
XORSHIFT_MULTIPLIER = 0x2545F4914F6CDD1D
_INV_2_53 = 1.0 / (1 << 53)


def splitmix64(z: int) -> int:
    """SplitMix64 output function applied to ``z``."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    """xorshift64* generator with the uniform/bernoulli draws the generator needs."""

    def __init__(self, state: int) -> None:
        state &= _MASK64
        self.state = state or GOLDEN_GAMMA

    @classmethod
    def for_sprite(cls, seed: int, index: int) -> XorShift64Star:
        """Independent substream for sprite ``index`` of a dataset seeded with ``seed``."""
        return cls(splitmix64(seed + GOLDEN_GAMMA * (index + 1)))

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * XORSHIFT_MULTIPLIER) & _MASK64

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def bernoulli(self, p: float) -> bool:
        return self.random() < p
