"""Counter-based splittable randomness (Philox4x64-10).

A stream is a (seed, stream_id) key plus a 128-bit counter; each draw
encrypts the counter and advances it by one, so stream creation and
jumping are O(1) and require no coordination between workers.  Word 0
of the 4-word cipher block is the draw; uniforms take its top 53 bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["RngStream", "PHILOX_M0", "PHILOX_M1", "PHILOX_W0", "PHILOX_W1"]

_MASK64 = (1 << 64) - 1

# Philox4x64 round multipliers and Weyl key increments.
PHILOX_M0 = 0xD2E7470EE14C6C93
PHILOX_M1 = 0xCA5A826395121157
PHILOX_W0 = 0x9E3779B97F4A7C15
PHILOX_W1 = 0xBB67AE8584CAA73B

# Odd Weyl step used to derive child stream ids; odd => injective mod 2^64.
_SPLIT_STEP = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """Finalization mixer (splitmix64): a bijection on 64-bit words."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _philox_block(c0: int, c1: int, c2: int, c3: int, k0: int, k1: int) -> tuple[int, int, int, int]:
    """Ten Philox4x64 rounds of the counter (c0..c3) under key (k0, k1)."""
    for _ in range(10):
        p0 = (PHILOX_M0 * c0) & _MASK64
        h0 = (PHILOX_M0 * c0) >> 64
        p1 = (PHILOX_M1 * c2) & _MASK64
        h1 = (PHILOX_M1 * c2) >> 64
        c0, c1, c2, c3 = h1 ^ c1 ^ k0, p1, h0 ^ c3 ^ k1, p0
        k0 = (k0 + PHILOX_W0) & _MASK64
        k1 = (k1 + PHILOX_W1) & _MASK64
    return c0, c1, c2, c3


@dataclass
class RngStream:
    """Single-owner stateful view over the stateless Philox function."""

    seed: int
    stream_id: int = 0
    counter: int = 0  # 128-bit draw index

    def __post_init__(self) -> None:
        self.seed &= _MASK64
        self.stream_id &= _MASK64
        self.counter &= (1 << 128) - 1

    def clone(self) -> "RngStream":
        """Independent copy at the same position (for replay)."""
        return RngStream(self.seed, self.stream_id, self.counter)

    def jump_to(self, counter: int) -> None:
        """O(1) repositioning of the draw index."""
        self.counter = counter & ((1 << 128) - 1)

    def next_u64(self) -> int:
        """Raw 64-bit draw; advances the counter by one."""
        c_lo = self.counter & _MASK64
        c_hi = self.counter >> 64
        word0, _, _, _ = _philox_block(c_lo, c_hi, 0, 0, self.seed, self.stream_id)
        self.counter = (self.counter + 1) & ((1 << 128) - 1)
        return word0

    def next_unit_uniform(self) -> float:
        """Uniform in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def next_sign(self) -> int:
        """Fair draw from {-1, +1} (top bit of one 64-bit word)."""
        return -1 if (self.next_u64() >> 63) else 1

    def split(self, n: int) -> list["RngStream"]:
        """n child streams with ids derived injectively from (id, index).

        Children share the seed, start at counter 0, and never share
        state with the parent or each other.
        """
        if n < 1:
            raise ValueError("split requires n >= 1")
        return [
            RngStream(self.seed, _mix64(self.stream_id + _SPLIT_STEP * (i + 1)))
            for i in range(n)
        ]
