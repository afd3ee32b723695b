"""The sequential-measurement protocol, end to end.

A run fixes three increasing times bound to three polarization directions,
then for each prepared photon selects one of the three time pairs with the
pinned pseudorandom device and executes the chosen world-model (quantum,
hidden-variable, or conspiracy) for that pair. Preparation and pair choice
must be space-like separated, which is the freedom-of-choice arrangement;
loophole studies may override the check explicitly.

Trials derive independent generator streams from (master_seed, index), so a
run can be sharded across workers and still produce a byte-identical log.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from .hidden_vars import ConspiracyModel, ResponseModel, TimeSlot
from .quantum import Direction, PolarizationState, reduce_direction_angle, run_quantum_trial
from .rng import (
    SeededGenerator,
    derive_states,
    derive_trial_generator,
    step_states,
    uniforms,
)

__all__ = [
    "PairChoice",
    "SlotBinding",
    "SpacetimeEvent",
    "TrialRecord",
    "TrialLog",
    "QuantumWorld",
    "FreedomOfChoiceError",
    "SeededGenerator",
    "derive_trial_generator",
    "select_pair",
    "spacelike_separated",
    "run_experiment",
    "write_trial_log",
    "read_trial_log",
    "TRIAL_LOG_HEADER",
]

SELECT_PAIR_MAX_ATTEMPTS = 128


class PairChoice(Enum):
    """Which two of the three measurement times a trial uses (earlier first)."""

    P12 = "12"
    P13 = "13"
    P23 = "23"

    @property
    def slots(self) -> tuple[TimeSlot, TimeSlot]:
        return _PAIR_SLOTS[self]

    @property
    def direction_indexes(self) -> tuple[int, int]:
        s = _PAIR_SLOTS[self]
        return s[0].value, s[1].value


_PAIR_SLOTS = {
    PairChoice.P12: (TimeSlot.T1, TimeSlot.T2),
    PairChoice.P13: (TimeSlot.T1, TimeSlot.T3),
    PairChoice.P23: (TimeSlot.T2, TimeSlot.T3),
}
_PAIR_BY_CODE = (PairChoice.P12, PairChoice.P13, PairChoice.P23)
PAIR_ORDER = _PAIR_BY_CODE


@dataclass(frozen=True)
class SlotBinding:
    """The fixed correspondence between measurement times and directions.

    Times are seconds relative to each photon's preparation and must strictly
    increase; the binding never changes within a run. The times are bookkeeping
    only: no evolution happens between measurements, so statistics depend only
    on the directions.
    """

    t1: float
    t2: float
    t3: float
    a: Direction
    b: Direction
    c: Direction

    def __post_init__(self) -> None:
        if not (self.t1 < self.t2 < self.t3):
            raise ValueError(f"times must strictly increase, got {self.t1}, {self.t2}, {self.t3}")

    @property
    def directions(self) -> tuple[Direction, Direction, Direction]:
        return (self.a, self.b, self.c)

    def directions_for(self, pair: PairChoice) -> tuple[Direction, Direction]:
        i, j = pair.direction_indexes
        return self.directions[i], self.directions[j]


@dataclass(frozen=True)
class SpacetimeEvent:
    """An event in units where light speed is 1 (seconds, light-seconds)."""

    t: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for name in ("t", "x", "y", "z"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"event coordinate {name} must be finite")


def spacelike_separated(e1: SpacetimeEvent, e2: SpacetimeEvent) -> bool:
    """True iff the interval is strictly space-like (null intervals fail)."""
    dt = e1.t - e2.t
    dx = e1.x - e2.x
    dy = e1.y - e2.y
    dz = e1.z - e2.z
    return (dx * dx + dy * dy + dz * dz) - dt * dt > 0.0


class FreedomOfChoiceError(RuntimeError):
    """Raised when preparation and pair choice are not space-like separated."""


@dataclass(frozen=True)
class TrialRecord:
    """One prepared photon: its pair choice, both outcomes, and provenance."""

    index: int
    pair: PairChoice
    s_first: int
    s_second: int
    lambda_id: Optional[Union[int, float]]
    model_tag: str


@dataclass(frozen=True)
class QuantumWorld:
    """Quantum world-model plus the initial-state policy for a run.

    policy "fixed" prepares every photon at initial_angle; "fresh_uniform"
    draws a uniform direction per trial, which exercises the claim that the
    pair statistics do not depend on the prepared state.
    """

    policy: str = "fixed"
    initial_angle: float = 0.0
    tag: str = "quantum"

    def __post_init__(self) -> None:
        if self.policy not in ("fixed", "fresh_uniform"):
            raise ValueError(f"unknown initial-state policy {self.policy!r}")
        object.__setattr__(self, "initial_angle", reduce_direction_angle(self.initial_angle))


World = Union[QuantumWorld, ResponseModel, ConspiracyModel]


def select_pair(gen: SeededGenerator) -> PairChoice:
    """Draw a uniform pair choice from the pinned device.

    Takes the top two bits of successive generator steps, rejecting the value
    3; the three remaining values map to P12, P13, P23. The attempt cap only
    guards against a broken generator (p = 4^-128 for a healthy one).
    """
    for _ in range(SELECT_PAIR_MAX_ATTEMPTS):
        bits = gen.top_two_bits()
        if bits != 3:
            return _PAIR_BY_CODE[bits]
    raise RuntimeError(f"pair selection failed {SELECT_PAIR_MAX_ATTEMPTS} rejections in a row")


class TrialLog:
    """A completed run's trial records, stored column-wise.

    Behaves as a read-only sequence of TrialRecord; the column arrays are what
    the estimators consume, so a million-trial log never has to materialize a
    million record objects.
    """

    def __init__(
        self,
        pair_codes: np.ndarray,
        s_first: np.ndarray,
        s_second: np.ndarray,
        lambda_ids: Optional[np.ndarray],
        model_tag: str,
    ):
        n = len(pair_codes)
        if len(s_first) != n or len(s_second) != n:
            raise ValueError("column lengths disagree")
        if lambda_ids is not None and len(lambda_ids) != n:
            raise ValueError("column lengths disagree")
        self.pair_codes = pair_codes
        self.s_first = s_first
        self.s_second = s_second
        self.lambda_ids = lambda_ids
        self.model_tag = model_tag

    def __len__(self) -> int:
        return len(self.pair_codes)

    def __getitem__(self, index: int) -> TrialRecord:
        if not isinstance(index, (int, np.integer)):
            raise TypeError("trial logs support integer indexing only")
        n = len(self)
        if index < 0:
            index += n
        if not 0 <= index < n:
            raise IndexError("trial index out of range")
        lam = None
        if self.lambda_ids is not None:
            lam = self.lambda_ids[index]
            lam = float(lam) if isinstance(lam, (float, np.floating)) else int(lam)
        return TrialRecord(
            index=int(index),
            pair=_PAIR_BY_CODE[int(self.pair_codes[index])],
            s_first=int(self.s_first[index]),
            s_second=int(self.s_second[index]),
            lambda_id=lam,
            model_tag=self.model_tag,
        )

    def __iter__(self) -> Iterator[TrialRecord]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrialLog):
            return NotImplemented
        if self.model_tag != other.model_tag or len(self) != len(other):
            return False
        if (self.lambda_ids is None) != (other.lambda_ids is None):
            return False
        same = (
            np.array_equal(self.pair_codes, other.pair_codes)
            and np.array_equal(self.s_first, other.s_first)
            and np.array_equal(self.s_second, other.s_second)
        )
        if same and self.lambda_ids is not None:
            same = np.array_equal(self.lambda_ids, other.lambda_ids)
        return same


# -- vectorized engine -------------------------------------------------------


def _select_pairs_batch(states: np.ndarray) -> np.ndarray:
    """Vectorized select_pair: one code in {0,1,2} per lane, stepping lanes
    exactly as the scalar rejection loop would."""
    n = len(states)
    codes = np.full(n, 255, dtype=np.uint8)
    unresolved = np.arange(n)
    for _ in range(SELECT_PAIR_MAX_ATTEMPTS):
        if unresolved.size == 0:
            return codes
        sub = states[unresolved]  # fancy indexing copies the lanes
        step_states(sub)
        states[unresolved] = sub
        bits = (sub >> np.uint64(62)).astype(np.uint8)
        accepted = bits != 3
        codes[unresolved[accepted]] = bits[accepted]
        unresolved = unresolved[~accepted]
    raise RuntimeError(f"pair selection failed {SELECT_PAIR_MAX_ATTEMPTS} rejections in a row")


def _quantum_pair_batch(
    world: QuantumWorld, first: Direction, second: Direction, states: np.ndarray
) -> tuple[np.ndarray, np.ndarray, None]:
    if world.policy == "fresh_uniform":
        initial = uniforms(states) * np.pi
        # mirror the scalar state reduction at the fp seam
        initial = np.where(initial >= np.pi, 0.0, initial)
        p1 = np.cos(initial - first.angle) ** 2
    else:
        p1 = float(np.cos(world.initial_angle - first.angle)) ** 2
    o1 = uniforms(states) < p1
    post_plus = reduce_direction_angle(first.angle)
    post_minus = reduce_direction_angle(first.angle + math.pi / 2.0)
    p2_plus = float(np.cos(post_plus - second.angle)) ** 2
    p2_minus = float(np.cos(post_minus - second.angle)) ** 2
    o2 = uniforms(states) < np.where(o1, p2_plus, p2_minus)
    s_first = np.where(o1, 1, -1).astype(np.int8)
    s_second = np.where(o2, 1, -1).astype(np.int8)
    return s_first, s_second, None


def _run_index_range(
    binding: SlotBinding, world: World, lo: int, hi: int, master_seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, Optional[np.ndarray]]:
    n = hi - lo
    states = derive_states(master_seed, np.arange(lo, hi, dtype=np.uint64))
    pair_codes = _select_pairs_batch(states)
    s_first = np.empty(n, dtype=np.int8)
    s_second = np.empty(n, dtype=np.int8)
    lambda_ids: Optional[np.ndarray] = None
    if not isinstance(world, QuantumWorld):
        lambda_dtype = np.float64 if world.tag == "rotor" else np.int64
        lambda_ids = np.empty(n, dtype=lambda_dtype)
    for code, pair in enumerate(_PAIR_BY_CODE):
        mask = pair_codes == code
        if not mask.any():
            continue
        sub_states = states[mask]
        if isinstance(world, QuantumWorld):
            first, second = binding.directions_for(pair)
            s1, s2, lam = _quantum_pair_batch(world, first, second, sub_states)
        else:
            s1, s2, lam = world.sample_pair_batch(pair.slots, sub_states)
        s_first[mask] = s1
        s_second[mask] = s2
        if lambda_ids is not None:
            lambda_ids[mask] = lam
    return pair_codes, s_first, s_second, lambda_ids


def run_experiment(
    binding: SlotBinding,
    world: World,
    n_trials: int,
    master_seed: int,
    geometry: tuple[SpacetimeEvent, SpacetimeEvent],
    *,
    override_foc: bool = False,
    n_shards: int = 1,
) -> TrialLog:
    """Run the full protocol and return the trial log.

    geometry is (preparation event, pair-choice event); the run refuses
    non-space-like geometries unless override_foc is set, which is how
    loophole studies acknowledge giving up freedom of choice. Identical
    arguments produce identical logs regardless of n_shards.
    """
    if n_trials < 1:
        raise ValueError(f"need at least one trial, got {n_trials}")
    prep, choice = geometry
    if not spacelike_separated(prep, choice) and not override_foc:
        raise FreedomOfChoiceError(
            "preparation and pair-choice events are not space-like separated; "
            "freedom of choice is not guaranteed (set the override to run anyway)"
        )
    if n_shards < 1:
        raise ValueError(f"need at least one shard, got {n_shards}")

    bounds = np.linspace(0, n_trials, min(n_shards, n_trials) + 1, dtype=int)
    ranges = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if len(ranges) == 1:
        parts = [_run_index_range(binding, world, 0, n_trials, master_seed)]
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            parts = list(
                pool.map(lambda r: _run_index_range(binding, world, r[0], r[1], master_seed), ranges)
            )
    pair_codes = np.concatenate([p[0] for p in parts])
    s_first = np.concatenate([p[1] for p in parts])
    s_second = np.concatenate([p[2] for p in parts])
    lambda_ids = None
    if parts[0][3] is not None:
        lambda_ids = np.concatenate([p[3] for p in parts])
    return TrialLog(pair_codes, s_first, s_second, lambda_ids, world.tag)


def run_trial_scalar(
    binding: SlotBinding, world: World, trial_index: int, master_seed: int
) -> TrialRecord:
    """Reference scalar execution of one trial; run_experiment must agree.

    Spelled out with the public single-draw operations so the vectorized
    engine has an independent oracle.
    """
    from .hidden_vars import sample_trial

    gen = derive_trial_generator(master_seed, trial_index)
    pair = select_pair(gen)
    lam: Optional[Union[int, float]] = None
    if isinstance(world, QuantumWorld):
        if world.policy == "fresh_uniform":
            initial = PolarizationState(gen.next_uniform() * math.pi)
        else:
            initial = PolarizationState(world.initial_angle)
        first, second = binding.directions_for(pair)
        s_first, s_second = run_quantum_trial(initial, first, second, gen)
    else:
        s_first, s_second, lam = sample_trial(world, pair.slots, gen)
    return TrialRecord(trial_index, pair, s_first, s_second, lam, world.tag)


# -- trial log file format ----------------------------------------------------

TRIAL_LOG_HEADER = "index,pair,s_first,s_second,lambda_id,model_tag"


def _format_lambda(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(int(value))


def write_trial_log(trials: Union[TrialLog, Iterable[TrialRecord]], path) -> None:
    """Write the CSV trial log: byte-exact for identical runs.

    Columns: index,pair,s_first,s_second,lambda_id,model_tag with pair encoded
    as 12|13|23 and lambda_id empty for the quantum world. Unix newlines, no
    trailing whitespace.
    """
    lines = [TRIAL_LOG_HEADER]
    if isinstance(trials, TrialLog):
        pair_strs = np.array([p.value for p in _PAIR_BY_CODE])
        lam = trials.lambda_ids
        for i in range(len(trials)):
            lam_s = "" if lam is None else _format_lambda(lam[i])
            lines.append(
                f"{i},{pair_strs[trials.pair_codes[i]]},{trials.s_first[i]},"
                f"{trials.s_second[i]},{lam_s},{trials.model_tag}"
            )
    else:
        for rec in trials:
            lines.append(
                f"{rec.index},{rec.pair.value},{rec.s_first},{rec.s_second},"
                f"{_format_lambda(rec.lambda_id)},{rec.model_tag}"
            )
    lines.append("")  # final newline
    Path(path).write_text("\n".join(lines), encoding="utf-8", newline="\n")


class TrialLogFormatError(ValueError):
    """A trial log file violates the documented schema; names the line."""


def read_trial_log(path) -> TrialLog:
    """Parse a CSV trial log, validating the schema line by line."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != TRIAL_LOG_HEADER:
        raise TrialLogFormatError(f"line 1: expected header {TRIAL_LOG_HEADER!r}")
    code_by_pair = {p.value: c for c, p in enumerate(_PAIR_BY_CODE)}
    n = len(lines) - 1
    pair_codes = np.empty(n, dtype=np.uint8)
    s_first = np.empty(n, dtype=np.int8)
    s_second = np.empty(n, dtype=np.int8)
    lambda_vals: list = []
    tags = set()
    for k in range(n):
        line_no = k + 2
        fields = lines[k + 1].split(",")
        if len(fields) != 6:
            raise TrialLogFormatError(f"line {line_no}: expected 6 fields, got {len(fields)}")
        idx_s, pair_s, s1_s, s2_s, lam_s, tag = fields
        try:
            idx = int(idx_s)
        except ValueError:
            raise TrialLogFormatError(f"line {line_no}: index {idx_s!r} is not an integer") from None
        if idx != k:
            raise TrialLogFormatError(f"line {line_no}: index {idx} breaks the consecutive order (expected {k})")
        if pair_s not in code_by_pair:
            raise TrialLogFormatError(f"line {line_no}: pair must be one of 12|13|23, got {pair_s!r}")
        if s1_s not in ("1", "-1") or s2_s not in ("1", "-1"):
            raise TrialLogFormatError(f"line {line_no}: outcomes must be 1 or -1, got {s1_s!r}, {s2_s!r}")
        pair_codes[k] = code_by_pair[pair_s]
        s_first[k] = int(s1_s)
        s_second[k] = int(s2_s)
        if lam_s == "":
            lambda_vals.append(None)
        else:
            try:
                lambda_vals.append(int(lam_s) if ("." not in lam_s and "e" not in lam_s) else float(lam_s))
            except ValueError:
                raise TrialLogFormatError(f"line {line_no}: lambda_id {lam_s!r} is not a number") from None
        tags.add(tag)
    if n == 0:
        raise TrialLogFormatError("line 2: log contains no trials")
    model_tag = tags.pop() if len(tags) == 1 else "mixed"
    lambda_ids: Optional[np.ndarray] = None
    if any(v is not None for v in lambda_vals):
        if any(v is None for v in lambda_vals):
            raise TrialLogFormatError("lambda_id column mixes empty and non-empty values")
        if all(isinstance(v, int) for v in lambda_vals):
            lambda_ids = np.array(lambda_vals, dtype=np.int64)
        else:
            lambda_ids = np.array([float(v) for v in lambda_vals], dtype=np.float64)
    return TrialLog(pair_codes, s_first, s_second, lambda_ids, model_tag)
