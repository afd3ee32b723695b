"""Deterministic hidden-variable response models and the classical bound.

A response model is a family of deterministic answers S(lambda, slot) in
{-1, +1} for the three measurement time slots, together with a distribution
over the standing initial conditions lambda. Drawing one lambda per trial and
reading off both requested slots makes the strict-determinism postulate
executable: both outcomes of a trial come from the same lambda.

The classical bound |E(T1,T2) - E(T1,T3)| + E(T2,T3) <= 1 is certified two
independent ways: exhaustively over the 8 deterministic strategies, and
statistically over random mixtures.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Sequence, Union

import numpy as np

from .rng import UnitUniformSource, uniforms

# lambda identifiers: a row index for discrete models, an angle for continuous ones
HiddenVariable = Union[int, float]

WEIGHT_SUM_TOL = 1e-12


class TimeSlot(Enum):
    """The three measurement time slots; each is bound to a fixed direction."""

    T1 = 0
    T2 = 1
    T3 = 2


SlotPair = tuple[TimeSlot, TimeSlot]


def _check_pair(pair: SlotPair) -> SlotPair:
    if pair[0] == pair[1]:
        raise ValueError(f"a protocol pair needs two distinct time slots, got ({pair[0]}, {pair[1]})")
    return pair


class ResponseModel(ABC):
    """Deterministic response family S(lambda, slot) with a lambda distribution.

    respond must be a pure function of (lambda, slot): the standing initial
    conditions fix all three slot responses at once.
    """

    tag: str = "response"

    @abstractmethod
    def sample_lambda(self, rand: UnitUniformSource) -> HiddenVariable: ...

    @abstractmethod
    def respond(self, lam: HiddenVariable, slot: TimeSlot) -> int: ...


class TableModel(ResponseModel):
    """Discrete lambda-space: weighted rows of response triples.

    rows: sequence of (weight, (s1, s2, s3)) with positive weights summing to
    1 within 1e-12 and outcomes in {-1, +1}.
    """

    tag = "table"

    def __init__(self, rows: Sequence[tuple[float, tuple[int, int, int]]]):
        if not rows:
            raise ValueError("a table model needs at least one lambda row")
        weights = []
        triples = []
        for k, (w, triple) in enumerate(rows):
            if not (w > 0.0 and math.isfinite(w)):
                raise ValueError(f"row {k}: weight must be finite and > 0, got {w}")
            if len(triple) != 3 or any(s not in (-1, 1) for s in triple):
                raise ValueError(f"row {k}: responses must be a triple of -1/+1, got {triple}")
            weights.append(float(w))
            triples.append(tuple(int(s) for s in triple))
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total!r}")
        self.rows = list(zip(weights, triples))
        self._weights = np.array(weights, dtype=np.float64)
        self._responses = np.array(triples, dtype=np.int8)
        self._cum = np.cumsum(self._weights)

    def sample_lambda(self, rand: UnitUniformSource) -> int:
        u = rand.next_uniform()
        # row k covers cum[k-1] <= u < cum[k]; clip guards the fp tail of cum
        return int(min(np.searchsorted(self._cum, u, side="right"), len(self.rows) - 1))

    def respond(self, lam: HiddenVariable, slot: TimeSlot) -> int:
        return int(self._responses[int(lam), slot.value])

    def sample_pair_batch(self, pair: SlotPair, states: np.ndarray):
        u = uniforms(states)
        lam = np.minimum(np.searchsorted(self._cum, u, side="right"), len(self.rows) - 1)
        s_first = self._responses[lam, pair[0].value]
        s_second = self._responses[lam, pair[1].value]
        return s_first, s_second, lam.astype(np.int64)


class RotorModel(ResponseModel):
    """Continuous lambda-space: a uniform angle on [0, pi).

    respond(lam, slot) is the sign of cos 2*(lam - theta_slot), with the
    measure-zero tie cos = 0 resolved to +1 so respond is total.
    """

    tag = "rotor"

    def __init__(self, directions: Sequence):
        if len(directions) != 3:
            raise ValueError(f"rotor model needs exactly three directions, got {len(directions)}")
        self.directions = tuple(directions)
        self._angles = np.array([d.angle for d in self.directions], dtype=np.float64)

    def sample_lambda(self, rand: UnitUniformSource) -> float:
        return rand.next_uniform() * math.pi

    def respond(self, lam: HiddenVariable, slot: TimeSlot) -> int:
        c = float(np.cos(2.0 * (float(lam) - self._angles[slot.value])))
        return 1 if c >= 0.0 else -1

    def sample_pair_batch(self, pair: SlotPair, states: np.ndarray):
        lam = uniforms(states) * np.pi
        s_first = np.where(np.cos(2.0 * (lam - self._angles[pair[0].value])) >= 0.0, 1, -1)
        s_second = np.where(np.cos(2.0 * (lam - self._angles[pair[1].value])) >= 0.0, 1, -1)
        return s_first.astype(np.int8), s_second.astype(np.int8), lam


_ALL_PAIRS: tuple[SlotPair, ...] = (
    (TimeSlot.T1, TimeSlot.T2),
    (TimeSlot.T1, TimeSlot.T3),
    (TimeSlot.T2, TimeSlot.T3),
)


@dataclass(frozen=True)
class ConspiracyModel:
    """Setting-conditioned lambda sampling: the freedom-of-choice loophole.

    The responses themselves stay deterministic per lambda (lambda indexes the
    8 strategy triples, bit i = slot Ti response), but the lambda distribution
    depends on which pair was selected: for pair (X, Y) the first outcome is a
    fair sign and the second matches it with probability (1 + target)/2, so
    the pair's product mean equals the target. strength in [0, 1] dials the
    conditioning: with probability 1 - strength a trial falls back to the
    unconditioned uniform strategy mix (all pair means 0).
    """

    target_means: dict[SlotPair, float]
    strength: float = 1.0
    tag: str = field(default="conspiracy", init=False)

    def __post_init__(self) -> None:
        if set(self.target_means) != set(_ALL_PAIRS):
            raise ValueError("conspiracy model needs a target mean for each of the three slot pairs")
        for pair, m in self.target_means.items():
            if not (-1.0 <= m <= 1.0):
                raise ValueError(f"target mean for {pair} must lie in [-1, 1], got {m}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"strength must lie in [0, 1], got {self.strength}")
        object.__setattr__(
            self, "_p_same", {pair: (1.0 + m) / 2.0 for pair, m in self.target_means.items()}
        )

    def respond(self, lam: HiddenVariable, slot: TimeSlot) -> int:
        lam = int(lam)
        if not 0 <= lam <= 7:
            raise ValueError(f"conspiracy lambda must index one of the 8 strategies, got {lam}")
        return 1 if (lam >> slot.value) & 1 else -1

    def sample_pair(
        self, pair: SlotPair, rand: UnitUniformSource
    ) -> tuple[int, int, int]:
        """Draw one trial for the given pair: (s_first, s_second, lambda).

        Consumes exactly four uniforms: mode, first sign, second sign/match,
        unused-slot sign.
        """
        _check_pair(pair)
        conditioned = rand.next_uniform() < self.strength
        s_first = 1 if rand.next_uniform() < 0.5 else -1
        u2 = rand.next_uniform()
        if conditioned:
            s_second = s_first if u2 < self._p_same[pair] else -s_first
        else:
            s_second = 1 if u2 < 0.5 else -1
        s_other = 1 if rand.next_uniform() < 0.5 else -1
        other_slot = next(s for s in TimeSlot if s not in pair)
        by_slot = {pair[0]: s_first, pair[1]: s_second, other_slot: s_other}
        lam = sum((1 << slot.value) for slot in TimeSlot if by_slot[slot] > 0)
        return s_first, s_second, lam

    def sample_pair_batch(self, pair: SlotPair, states: np.ndarray):
        u_mode = uniforms(states)
        u1 = uniforms(states)
        u2 = uniforms(states)
        u3 = uniforms(states)
        conditioned = u_mode < self.strength
        s_first = np.where(u1 < 0.5, 1, -1).astype(np.int8)
        matched = np.where(u2 < self._p_same[pair], s_first, -s_first)
        s_second = np.where(conditioned, matched, np.where(u2 < 0.5, 1, -1)).astype(np.int8)
        s_other = np.where(u3 < 0.5, 1, -1).astype(np.int8)
        other_slot = next(s for s in TimeSlot if s not in pair)
        lam = np.zeros(len(states), dtype=np.int64)
        for slot, s in ((pair[0], s_first), (pair[1], s_second), (other_slot, s_other)):
            lam |= (s > 0).astype(np.int64) << slot.value
        return s_first, s_second, lam


WorldModel = Union[ResponseModel, ConspiracyModel]


def expectation_exact(model: TableModel, slot_a: TimeSlot, slot_b: TimeSlot) -> float:
    """Exact pair expectation of a discrete model: sum of weight * S_a * S_b."""
    _check_pair((slot_a, slot_b))
    products = model._responses[:, slot_a.value].astype(np.float64) * model._responses[:, slot_b.value]
    return float(np.dot(model._weights, products))


def table_lhs_exact(model: TableModel) -> float:
    """Exact |E(T1,T2) - E(T1,T3)| + E(T2,T3) for a discrete model."""
    e12 = expectation_exact(model, TimeSlot.T1, TimeSlot.T2)
    e13 = expectation_exact(model, TimeSlot.T1, TimeSlot.T3)
    e23 = expectation_exact(model, TimeSlot.T2, TimeSlot.T3)
    return abs(e12 - e13) + e23


def sample_trial(
    model: WorldModel, pair: SlotPair, rand: UnitUniformSource
) -> tuple[int, int, HiddenVariable]:
    """One trial under a hidden-variable model: (s_first, s_second, lambda).

    For response models both outcomes are read from a single freshly drawn
    lambda; conspiracy models use their pair-conditioned sampler instead.
    """
    _check_pair(pair)
    if isinstance(model, ConspiracyModel):
        return model.sample_pair(pair, rand)
    lam = model.sample_lambda(rand)
    return model.respond(lam, pair[0]), model.respond(lam, pair[1]), lam


def conspiracy_from_quantum(a, b, c, strength: float = 1.0) -> ConspiracyModel:
    """Conspiracy model whose pair means copy the quantum cos 2*theta values.

    Despite per-lambda determinism, the setting-conditioned distribution lets
    the model reproduce the quantum statistics, including the inequality
    violation, which is exactly the loophole being demonstrated.
    """
    from .quantum import sequential_correlation_exact

    return ConspiracyModel(
        target_means={
            (TimeSlot.T1, TimeSlot.T2): sequential_correlation_exact(a, b),
            (TimeSlot.T1, TimeSlot.T3): sequential_correlation_exact(a, c),
            (TimeSlot.T2, TimeSlot.T3): sequential_correlation_exact(b, c),
        },
        strength=strength,
    )


def deterministic_strategy_values() -> list[tuple[tuple[int, int, int], float]]:
    """The 8 deterministic strategies and their |s1s2 - s1s3| + s2s3 values."""
    return [
        ((s1, s2, s3), float(abs(s1 * s2 - s1 * s3) + s2 * s3))
        for s1, s2, s3 in product((-1, 1), repeat=3)
    ]


def brute_force_bound() -> float:
    """Exhaustive certification of the classical bound.

    Every deterministic strategy evaluates to exactly 1, so the maximum over
    strategies (and, by convexity, over all mixtures) is exactly 1.
    """
    return max(value for _, value in deterministic_strategy_values())


def random_table_model(rand: UnitUniformSource) -> TableModel:
    """A random mixture over the 8 deterministic strategies."""
    triples = [t for t, _ in deterministic_strategy_values()]
    while True:
        weights = [rand.next_uniform() for _ in triples]
        total = math.fsum(weights)
        if all(w > 0.0 for w in weights) and total > 0.0:
            break
    return TableModel([(w / total, t) for w, t in zip(weights, triples)])


def mixture_bound_check(trials: int, rand: UnitUniformSource) -> float:
    """Max exact inequality LHS over random strategy mixtures; must stay <= 1."""
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    return max(table_lhs_exact(random_table_model(rand)) for _ in range(trials))
