"""Pinned pseudorandom machinery.

Every random draw in a run flows from a single 64-bit master seed through
the generators defined here, so runs replay byte-for-byte on any platform.
The generator is a fixed 64-bit linear congruential recurrence; per-trial
streams are derived with a splitmix-style finalizer so that trials can be
computed in any order (serial, sharded, vectorized) with identical results.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

MASK64 = (1 << 64) - 1

# LCG step constants (64-bit multiplicative congruential recurrence).
LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407

# Stream-derivation constants (additive sequence + avalanche finalizer).
STREAM_GOLDEN = 0x9E3779B97F4A7C15
MIX_MULT_1 = 0xBF58476D1CE4E5B9
MIX_MULT_2 = 0x94D049BB133111EB

_TWO53 = float(1 << 53)


class UnitUniformSource(Protocol):
    """Anything that yields successive uniforms on [0, 1)."""

    def next_uniform(self) -> float: ...


@dataclass
class SeededGenerator:
    """64-bit LCG with pinned constants.

    state' = (6364136223846793005 * state + 1442695040888963407) mod 2^64
    Unit uniforms take the top 53 bits of state' divided by 2^53.
    """

    state: int

    def __post_init__(self) -> None:
        if not 0 <= self.state <= MASK64:
            raise ValueError(f"generator state must be a 64-bit unsigned integer, got {self.state}")

    def step(self) -> int:
        """Advance one step and return the new state."""
        self.state = (LCG_MULT * self.state + LCG_INC) & MASK64
        return self.state

    def next_uniform(self) -> float:
        return (self.step() >> 11) / _TWO53

    def top_two_bits(self) -> int:
        """Advance one step and return the top 2 bits of the new state."""
        return self.step() >> 62


def mix64(z: int) -> int:
    """Avalanche finalizer: bijective mixing of a 64-bit word."""
    z &= MASK64
    z ^= z >> 30
    z = (z * MIX_MULT_1) & MASK64
    z ^= z >> 27
    z = (z * MIX_MULT_2) & MASK64
    z ^= z >> 31
    return z


def derive_trial_generator(master_seed: int, trial_index: int) -> SeededGenerator:
    """Per-trial generator, order-free in trial_index.

    state = mix64(master_seed + trial_index * STREAM_GOLDEN), all mod 2^64.
    Distinct indexes land in well-separated streams, and the derivation does
    not depend on any other trial, so serial and sharded runs agree.
    """
    if not 0 <= master_seed <= MASK64:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
    if trial_index < 0:
        raise ValueError(f"trial index must be non-negative, got {trial_index}")
    return SeededGenerator(mix64((master_seed + trial_index * STREAM_GOLDEN) & MASK64))


# -- vectorized counterparts ------------------------------------------------
#
# The array kernels below implement exactly the scalar semantics above on
# uint64 lanes (one lane = one trial stream). All arithmetic stays in array
# ops, which wrap modulo 2^64 silently; numpy only warns for 0-d scalars.

_U64_MULT = np.uint64(LCG_MULT)
_U64_INC = np.uint64(LCG_INC)
_U64_GOLDEN = np.uint64(STREAM_GOLDEN)
_U64_MIX1 = np.uint64(MIX_MULT_1)
_U64_MIX2 = np.uint64(MIX_MULT_2)


def derive_states(master_seed: int, indexes: np.ndarray) -> np.ndarray:
    """Vectorized derive_trial_generator: one uint64 state per index."""
    idx = np.asarray(indexes, dtype=np.uint64)
    z = np.uint64(master_seed) + idx * _U64_GOLDEN
    z ^= z >> np.uint64(30)
    z *= _U64_MIX1
    z ^= z >> np.uint64(27)
    z *= _U64_MIX2
    z ^= z >> np.uint64(31)
    return z


def step_states(states: np.ndarray) -> np.ndarray:
    """Advance every lane one LCG step in place; returns the array."""
    states *= _U64_MULT
    states += _U64_INC
    return states


def uniforms(states: np.ndarray) -> np.ndarray:
    """Advance every lane one step and return its unit uniform."""
    step_states(states)
    return (states >> np.uint64(11)).astype(np.float64) / _TWO53
