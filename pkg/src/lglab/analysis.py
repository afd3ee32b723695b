"""Estimation and inference on trial logs.

Estimates the three pair correlations with standard errors, evaluates the
inequality |P(a,b) - P(a,c)| <= 1 - P(b,c) as a one-sided z-test against the
classical bound, scans the quantum prediction for the maximal violation, and
measures how fast the running estimates stabilize with sample size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .experiment import PAIR_ORDER, PairChoice, TrialLog, TrialRecord
from .rng import mix64

DEFAULT_SIGNIFICANCE = 3.0
DEFAULT_EPSILON = 0.01
DEFAULT_CHECKPOINT_STRIDE = 1000
BOOTSTRAP_RESAMPLES = 10_000


class AnalysisError(ValueError):
    """An estimator precondition failed (for example, an undersampled pair)."""


@dataclass(frozen=True)
class PairEstimate:
    """Sample mean of outcome products for one pair, with its standard error.

    Products are dichotomic, so se = sqrt((1 - mean^2) / n), which is 0 when
    every product agrees.
    """

    pair: PairChoice
    n: int
    mean: float
    std_error: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"estimate for pair {self.pair.value} has no samples")
        if abs(self.mean) > 1.0:
            raise ValueError(f"pair {self.pair.value}: |mean| must be <= 1, got {self.mean}")


def _pair_products(trials: Union[TrialLog, Iterable[TrialRecord]]) -> dict[PairChoice, np.ndarray]:
    """Products s_first*s_second per pair, in trial order, as float64."""
    if isinstance(trials, TrialLog):
        products = trials.s_first.astype(np.float64) * trials.s_second
        codes = trials.pair_codes
    else:
        recs = list(trials)
        products = np.array([r.s_first * r.s_second for r in recs], dtype=np.float64)
        codes = np.array([PAIR_ORDER.index(r.pair) for r in recs], dtype=np.uint8)
    return {pair: products[codes == c] for c, pair in enumerate(PAIR_ORDER)}


def estimate_pairs(
    trials: Union[TrialLog, Iterable[TrialRecord]],
) -> tuple[PairEstimate, PairEstimate, PairEstimate]:
    """Per-pair product means and standard errors, in (12, 13, 23) order."""
    by_pair = _pair_products(trials)
    undersampled = [p.value for p in PAIR_ORDER if len(by_pair[p]) < 2]
    if undersampled:
        raise AnalysisError(
            f"pair(s) {', '.join(undersampled)} have fewer than 2 trials; every pair needs n >= 2"
        )
    estimates = []
    for pair in PAIR_ORDER:
        prods = by_pair[pair]
        n = len(prods)
        mean = float(np.mean(prods))
        se = math.sqrt(max(0.0, 1.0 - mean * mean) / n)
        estimates.append(PairEstimate(pair=pair, n=n, mean=mean, std_error=se))
    return tuple(estimates)


@dataclass(frozen=True)
class LgReport:
    """Inequality evaluation: LHS, its error, and the violation verdict."""

    estimates: tuple[PairEstimate, PairEstimate, PairEstimate]
    lhs: float
    lhs_std_error: float
    bound: float
    violated: bool
    z_score: float
    significance: float
    degenerate: bool
    se_method: str
    config_echo: dict = field(default_factory=dict)

    def recomputed_lhs(self) -> float:
        e12, e13, e23 = self.estimates
        return abs(e12.mean - e13.mean) + e23.mean

    def to_json_dict(self) -> dict:
        return {
            "estimates": [
                {"pair": e.pair.value, "n": e.n, "mean": e.mean, "std_error": e.std_error}
                for e in self.estimates
            ],
            "lhs": self.lhs,
            "lhs_std_error": self.lhs_std_error,
            "bound": self.bound,
            "z_score": self.z_score,
            "significance": self.significance,
            "violated": self.violated,
            "degenerate": self.degenerate,
            "se_method": self.se_method,
            "config_echo": self.config_echo,
        }


def _bootstrap_lhs_std_error(
    estimates: tuple[PairEstimate, PairEstimate, PairEstimate],
    seed: int,
    n_resamples: int,
) -> float:
    """Resampling error for the LHS near the |.| kink.

    Products are +/-1, so resampling n of them with replacement and averaging
    is exactly a Binomial(n, p_plus) draw rescaled to [-1, 1]; that shortcut
    keeps 10^4 resamples of million-trial logs cheap.
    """
    rng = np.random.Generator(np.random.PCG64(mix64(seed)))
    means = []
    for est in estimates:
        p_plus = (est.mean + 1.0) / 2.0
        means.append(2.0 * rng.binomial(est.n, p_plus, size=n_resamples) / est.n - 1.0)
    lhs_samples = np.abs(means[0] - means[1]) + means[2]
    return float(np.std(lhs_samples, ddof=1))


def evaluate_lg(
    estimates: tuple[PairEstimate, PairEstimate, PairEstimate],
    significance: float = DEFAULT_SIGNIFICANCE,
    *,
    bootstrap_seed: int = 0,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
    config_echo: Optional[dict] = None,
) -> LgReport:
    """Evaluate |P12 - P13| + P23 against the classical bound of 1.

    The error combines the three pair errors in quadrature; when the |.| term
    sits within one standard error of zero that propagation is unreliable, so
    a binomial bootstrap of the trial products replaces it. The verdict is a
    one-sided z-test: violated iff (lhs - 1)/se exceeds the significance.
    """
    got = {e.pair for e in estimates}
    missing = [p.value for p in PAIR_ORDER if p not in got]
    if missing or len(estimates) != 3:
        raise AnalysisError(f"estimates must cover pairs 12, 13, 23 exactly; missing {missing}")
    by_pair = {e.pair: e for e in estimates}
    ordered = tuple(by_pair[p] for p in PAIR_ORDER)
    e12, e13, e23 = ordered

    diff = e12.mean - e13.mean
    lhs = abs(diff) + e23.mean
    degenerate = abs(diff) < max(e12.std_error, e13.std_error)
    if degenerate:
        se_method = "bootstrap"
        lhs_se = _bootstrap_lhs_std_error(ordered, bootstrap_seed, n_resamples)
    else:
        # first-order propagation; d|diff|/ddiff = sign(diff) drops out in quadrature
        se_method = "propagation"
        lhs_se = math.sqrt(e12.std_error**2 + e13.std_error**2 + e23.std_error**2)
    if lhs_se > 0.0:
        z = (lhs - 1.0) / lhs_se
    else:
        z = math.inf if lhs > 1.0 else (-math.inf if lhs < 1.0 else 0.0)
    echo = {
        "significance": significance,
        "bootstrap_seed": bootstrap_seed,
        "n_resamples": n_resamples,
    }
    if config_echo:
        echo.update(config_echo)
    return LgReport(
        estimates=ordered,
        lhs=lhs,
        lhs_std_error=lhs_se,
        bound=1.0,
        violated=bool(z > significance),
        z_score=z,
        significance=significance,
        degenerate=degenerate,
        se_method=se_method,
        config_echo=echo,
    )


def quantum_lhs(theta_ab: float, theta_bc: float) -> float:
    """Closed-form LHS for coplanar directions: theta_ac = theta_ab + theta_bc."""
    return abs(math.cos(2.0 * theta_ab) - math.cos(2.0 * (theta_ab + theta_bc))) + math.cos(
        2.0 * theta_bc
    )


# angle pairs where the closed-form LHS attains its global maximum of 1.5
VIOLATION_ARGMAX_ORBIT = (
    (math.pi / 6, math.pi / 6),
    (2 * math.pi / 3, math.pi / 6),
    (math.pi / 3, 5 * math.pi / 6),
    (5 * math.pi / 6, 5 * math.pi / 6),
)


def maximize_violation(
    grid_step: float = math.pi / 64, refine_tolerance: float = 1e-9
) -> tuple[float, float, float]:
    """Locate the maximal quantum violation of the inequality.

    Coarse grid over [0, pi)^2 followed by coordinate descent with interval
    halving until the step drops below refine_tolerance. Returns
    (theta_ab, theta_bc, lhs_max); the maximum is 1.5, reached at
    theta_ab = theta_bc = pi/6 and its symmetry-equivalent points.
    """
    if not 0.0 < grid_step <= math.pi / 64:
        raise ValueError(f"grid step must be in (0, pi/64], got {grid_step}")
    if refine_tolerance <= 0.0:
        raise ValueError(f"refine tolerance must be > 0, got {refine_tolerance}")

    axis = np.arange(0.0, math.pi, grid_step)
    a_grid, b_grid = np.meshgrid(axis, axis, indexing="ij")
    values = np.abs(np.cos(2 * a_grid) - np.cos(2 * (a_grid + b_grid))) + np.cos(2 * b_grid)
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    best_a, best_b = float(axis[i]), float(axis[j])
    best = quantum_lhs(best_a, best_b)

    step = grid_step
    while step > refine_tolerance:
        improved = False
        for da, db in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
            cand_a = (best_a + da) % math.pi
            cand_b = (best_b + db) % math.pi
            value = quantum_lhs(cand_a, cand_b)
            if value > best:
                best, best_a, best_b = value, cand_a, cand_b
                improved = True
        if not improved:
            step /= 2.0
    return best_a, best_b, best


@dataclass(frozen=True)
class PairStabilization:
    """Running-mean settling data for one pair."""

    pair: PairChoice
    n: int
    final_mean: Optional[float]
    n_star: Optional[int]
    stabilized: bool
    checkpoints: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class StabilizationReport:
    """Per-pair smallest sample size beyond which running means stay settled."""

    epsilon: float
    checkpoint_stride: int
    pairs: tuple[PairStabilization, PairStabilization, PairStabilization]

    def to_json_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "checkpoint_stride": self.checkpoint_stride,
            "pairs": {
                p.pair.value: {
                    "n": p.n,
                    "final_mean": p.final_mean,
                    "n_star": p.n_star,
                    "stabilized": p.stabilized,
                    "checkpoints": [[int(n), m] for n, m in p.checkpoints],
                }
                for p in self.pairs
            },
        }


def stabilization(
    trials: Union[TrialLog, Iterable[TrialRecord]],
    epsilon: float = DEFAULT_EPSILON,
    checkpoint_stride: int = DEFAULT_CHECKPOINT_STRIDE,
) -> StabilizationReport:
    """How fast do the pair estimates settle?

    For each pair, running product means are recorded at every stride-th
    sample (plus the final sample); n_star is the smallest checkpoint from
    which every later checkpoint stays within epsilon of the final mean. An
    empty pair is flagged not-stabilized with no n_star.
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if checkpoint_stride < 1:
        raise ValueError(f"checkpoint stride must be >= 1, got {checkpoint_stride}")
    by_pair = _pair_products(trials)
    reports = []
    for pair in PAIR_ORDER:
        prods = by_pair[pair]
        n = len(prods)
        if n == 0:
            reports.append(
                PairStabilization(pair=pair, n=0, final_mean=None, n_star=None, stabilized=False, checkpoints=())
            )
            continue
        counts = np.arange(checkpoint_stride, n + 1, checkpoint_stride)
        if len(counts) == 0 or counts[-1] != n:
            counts = np.append(counts, n)
        running = np.cumsum(prods)[counts - 1] / counts
        final_mean = float(running[-1])
        deviations = np.abs(running - final_mean)
        # suffix max: checkpoint k qualifies iff nothing at or after k deviates
        settled = np.maximum.accumulate(deviations[::-1])[::-1] <= epsilon
        qualifying = np.nonzero(settled)[0]
        n_star = int(counts[qualifying[0]])  # final checkpoint always qualifies
        reports.append(
            PairStabilization(
                pair=pair,
                n=n,
                final_mean=final_mean,
                n_star=n_star,
                stabilized=True,
                checkpoints=tuple((int(c), float(m)) for c, m in zip(counts, running)),
            )
        )
    return StabilizationReport(epsilon=epsilon, checkpoint_stride=checkpoint_stride, pairs=tuple(reports))
