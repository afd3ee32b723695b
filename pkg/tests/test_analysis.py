import json
import math

import numpy as np
import pytest

from lglab import (
    AnalysisError,
    PairChoice,
    PairEstimate,
    QuantumWorld,
    SeededGenerator,
    TableModel,
    TrialRecord,
    estimate_pairs,
    evaluate_lg,
    maximize_violation,
    quantum_lhs,
    run_experiment,
    stabilization,
)
from lglab.analysis import VIOLATION_ARGMAX_ORBIT
from lglab.hidden_vars import (
    TimeSlot,
    deterministic_strategy_values,
    expectation_exact,
    random_table_model,
)
from lglab.jsonutil import dumps_stable, format_float


def records_from_products(products_by_pair):
    """Hand-built trial records with prescribed products per pair."""
    records = []
    i = 0
    for pair, products in products_by_pair.items():
        for p in products:
            records.append(TrialRecord(i, pair, 1, p, None, "test"))
            i += 1
    return records


# -- estimate_pairs -----------------------------------------------------------


def test_all_plus_products_pin_the_mean():
    recs = records_from_products(
        {PairChoice.P12: [1] * 50, PairChoice.P13: [1] * 50, PairChoice.P23: [1] * 50}
    )
    for est in estimate_pairs(recs):
        assert est.mean == 1.0
        assert est.std_error == 0.0


def test_even_split_gives_inverse_sqrt_n_error():
    recs = records_from_products(
        {
            PairChoice.P12: [1, -1] * 50,
            PairChoice.P13: [1, -1] * 50,
            PairChoice.P23: [1, -1] * 50,
        }
    )
    for est in estimate_pairs(recs):
        assert est.mean == 0.0
        assert est.std_error == pytest.approx(1 / math.sqrt(100), abs=1e-15)


def test_std_error_formula_holds():
    recs = records_from_products(
        {
            PairChoice.P12: [1] * 75 + [-1] * 25,
            PairChoice.P13: [1] * 10 + [-1] * 30,
            PairChoice.P23: [1] * 5 + [-1] * 5,
        }
    )
    for est in estimate_pairs(recs):
        assert est.std_error == pytest.approx(
            math.sqrt((1 - est.mean**2) / est.n), abs=1e-15
        )
        assert abs(est.mean) <= 1.0


def test_undersampled_pair_is_named():
    recs = records_from_products(
        {PairChoice.P12: [1, 1], PairChoice.P13: [1], PairChoice.P23: [1, 1]}
    )
    with pytest.raises(AnalysisError, match="13"):
        estimate_pairs(recs)


def test_estimates_converge_to_exact_table_expectations(spacelike_geometry, magic_binding):
    model = TableModel([(0.3, (1, 1, -1)), (0.3, (-1, 1, 1)), (0.4, (1, -1, 1))])
    log = run_experiment(magic_binding, model, 100_000, 31, spacelike_geometry)
    estimates = estimate_pairs(log)
    slots = {
        PairChoice.P12: (TimeSlot.T1, TimeSlot.T2),
        PairChoice.P13: (TimeSlot.T1, TimeSlot.T3),
        PairChoice.P23: (TimeSlot.T2, TimeSlot.T3),
    }
    for est in estimates:
        exact = expectation_exact(model, *slots[est.pair])
        assert abs(est.mean - exact) < 5 * math.sqrt((1 - exact**2) / est.n)


# -- evaluate_lg -----------------------------------------------------------------


def exact_estimates(m12, m13, m23, n=1_000_000):
    return (
        PairEstimate(PairChoice.P12, n, m12, math.sqrt((1 - m12**2) / n)),
        PairEstimate(PairChoice.P13, n, m13, math.sqrt((1 - m13**2) / n)),
        PairEstimate(PairChoice.P23, n, m23, math.sqrt((1 - m23**2) / n)),
    )


def test_quantum_values_violate():
    report = evaluate_lg(exact_estimates(0.5, -0.5, 0.5), significance=3.0)
    assert report.lhs == pytest.approx(1.5, abs=1e-15)
    assert report.violated
    assert report.z_score > 100
    assert report.se_method == "propagation"
    assert abs(report.recomputed_lhs() - report.lhs) < 1e-12


def test_saturated_estimates_do_not_violate():
    report = evaluate_lg(exact_estimates(1.0, 1.0, 1.0))
    assert report.lhs == 1.0
    assert not report.violated
    assert report.z_score <= 0.0


def test_deterministic_strategies_sit_exactly_on_the_bound():
    for (s1, s2, s3), _ in deterministic_strategy_values():
        report = evaluate_lg(exact_estimates(s1 * s2, s1 * s3, s2 * s3))
        assert report.lhs == 1.0
        assert not report.violated


def test_missing_pair_is_named():
    e = exact_estimates(0.5, -0.5, 0.5)
    with pytest.raises(AnalysisError, match="23"):
        evaluate_lg((e[0], e[1], e[0]))


def test_degenerate_difference_triggers_bootstrap():
    # means of the 12 and 13 pairs coincide, so the |.| kink sits at zero and
    # plain propagation is replaced by the bootstrap
    report = evaluate_lg(exact_estimates(0.3, 0.3, 0.2, n=10_000))
    assert report.degenerate
    assert report.se_method == "bootstrap"
    assert report.lhs_std_error > 0.0
    # bootstrap must be deterministic given the seed
    again = evaluate_lg(exact_estimates(0.3, 0.3, 0.2, n=10_000))
    assert again.lhs_std_error == report.lhs_std_error
    different = evaluate_lg(exact_estimates(0.3, 0.3, 0.2, n=10_000), bootstrap_seed=9)
    assert different.lhs_std_error != report.lhs_std_error


def test_bootstrap_error_tracks_propagation_scale():
    # away from the kink both methods should agree on the error scale, which
    # justifies swapping one in for the other
    ests = exact_estimates(0.5, -0.5, 0.5, n=100_000)
    prop = evaluate_lg(ests)
    boot_se = evaluate_lg(
        exact_estimates(0.5, 0.5, 0.5, n=100_000)  # degenerate variant, same se scale
    ).lhs_std_error
    assert prop.se_method == "propagation"
    assert 0.3 < boot_se / prop.lhs_std_error < 3.0


def test_unconditioned_models_never_violate_significantly(magic_binding, spacelike_geometry):
    # property: estimated lhs <= 1 + 5*se for logs from any unconditioned model
    gen = SeededGenerator(1000)
    for k in range(100):
        model = random_table_model(gen)
        log = run_experiment(magic_binding, model, 10_000, 5000 + k, spacelike_geometry)
        report = evaluate_lg(estimate_pairs(log))
        assert report.lhs <= 1.0 + 5.0 * report.lhs_std_error
        assert not report.violated
        # recomputation invariant: stored lhs matches the stored estimates
        assert abs(report.recomputed_lhs() - report.lhs) < 1e-12


# -- quantum_lhs and the optimizer ----------------------------------------------


def test_quantum_lhs_values():
    assert abs(quantum_lhs(math.pi / 6, math.pi / 6) - 1.5) < 1e-15
    assert quantum_lhs(0.0, 0.0) == 1.0
    assert quantum_lhs(math.pi / 4, math.pi / 4) == pytest.approx(1.0, abs=1e-15)
    assert quantum_lhs(math.pi / 4, math.pi / 8) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_quantum_lhs_never_exceeds_three_halves():
    alphas = np.linspace(0, math.pi, 1500, endpoint=False)
    betas = np.linspace(0, math.pi, 1500, endpoint=False)
    a, b = np.meshgrid(alphas, betas, indexing="ij")
    values = np.abs(np.cos(2 * a) - np.cos(2 * (a + b))) + np.cos(2 * b)
    assert float(values.max()) <= 1.5 + 1e-9


def test_no_violation_on_the_degenerate_line():
    # theta_bc = 0 collapses the lhs to |cos - cos| + 1 = 1 everywhere
    for alpha in np.linspace(0, math.pi, 100, endpoint=False):
        assert quantum_lhs(float(alpha), 0.0) == 1.0


def test_optimizer_finds_the_maximum():
    theta_ab, theta_bc, lhs = maximize_violation()
    assert abs(lhs - 1.5) < 1e-6
    closest = min(
        math.hypot(theta_ab - a, theta_bc - b) for a, b in VIOLATION_ARGMAX_ORBIT
    )
    assert closest < 1e-4


def test_optimizer_grid_only_resolution():
    # refinement disabled by setting the tolerance at the grid step
    _, _, lhs = maximize_violation(math.pi / 64, refine_tolerance=math.pi / 64)
    assert abs(lhs - 1.5) < 0.01


def test_optimizer_validates_arguments():
    with pytest.raises(ValueError):
        maximize_violation(grid_step=0.1)  # > pi/64
    with pytest.raises(ValueError):
        maximize_violation(grid_step=-0.01)
    with pytest.raises(ValueError):
        maximize_violation(refine_tolerance=0.0)


# -- stabilization ----------------------------------------------------------------


def test_constant_products_stabilize_at_first_checkpoint():
    recs = records_from_products(
        {PairChoice.P12: [1] * 500, PairChoice.P13: [1] * 500, PairChoice.P23: [1] * 500}
    )
    report = stabilization(recs, epsilon=0.01, checkpoint_stride=100)
    for p in report.pairs:
        assert p.stabilized
        assert p.n_star == 100
        assert p.final_mean == 1.0
        assert p.checkpoints[0] == (100, 1.0)


def test_huge_epsilon_stabilizes_immediately():
    rng = np.random.default_rng(3)
    recs = records_from_products(
        {pair: list(rng.choice([-1, 1], 1000)) for pair in PairChoice}
    )
    report = stabilization(recs, epsilon=2.0, checkpoint_stride=50)
    for p in report.pairs:
        assert p.n_star == 50


def test_empty_pair_flagged_not_stabilized():
    recs = records_from_products(
        {PairChoice.P12: [1] * 100, PairChoice.P13: [1] * 100, PairChoice.P23: []}
    )
    report = stabilization(recs, epsilon=0.01, checkpoint_stride=10)
    by_pair = {p.pair: p for p in report.pairs}
    assert not by_pair[PairChoice.P23].stabilized
    assert by_pair[PairChoice.P23].n_star is None
    assert by_pair[PairChoice.P12].stabilized


def test_final_checkpoint_is_included():
    recs = records_from_products(
        {PairChoice.P12: [1] * 123, PairChoice.P13: [1] * 123, PairChoice.P23: [1] * 123}
    )
    report = stabilization(recs, epsilon=0.5, checkpoint_stride=50)
    for p in report.pairs:
        assert p.checkpoints[-1][0] == 123


def test_quantum_run_stabilizes(magic_binding, spacelike_geometry):
    log = run_experiment(magic_binding, QuantumWorld(), 1_000_000, 42, spacelike_geometry)
    report = stabilization(log, epsilon=0.01, checkpoint_stride=1000)
    for p in report.pairs:
        assert p.stabilized
        assert p.n_star <= 100_000


def test_stabilization_validates_arguments():
    recs = records_from_products({pair: [1, 1] for pair in PairChoice})
    with pytest.raises(ValueError):
        stabilization(recs, epsilon=0.0)
    with pytest.raises(ValueError):
        stabilization(recs, epsilon=0.1, checkpoint_stride=0)


# -- JSON emission ------------------------------------------------------------------


def test_float_formatting_is_17_significant_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.5) == "1.5"
    assert format_float(42.0) == "42.0"
    assert format_float(math.inf) == "Infinity"
    assert format_float(-math.inf) == "-Infinity"
    assert format_float(math.nan) == "NaN"


def test_json_round_trips_floats_exactly():
    values = [0.1, 1 / 3, math.pi, 1e-300, 6.5e120, -0.4999999999999998]
    text = dumps_stable({"values": values})
    assert json.loads(text)["values"] == values


def test_json_field_order_is_stable():
    a = dumps_stable({"b": 1, "a": 2})
    b = dumps_stable({"b": 1, "a": 2})
    assert a == b
    assert a.index('"b"') < a.index('"a"')


def test_report_serialization_round_trip(magic_binding, spacelike_geometry):
    log = run_experiment(magic_binding, QuantumWorld(), 50_000, 2, spacelike_geometry)
    report = evaluate_lg(estimate_pairs(log))
    blob = dumps_stable(report.to_json_dict())
    parsed = json.loads(blob)
    assert parsed["lhs"] == report.lhs
    assert parsed["violated"] is True
    assert [e["pair"] for e in parsed["estimates"]] == ["12", "13", "23"]
    stab = stabilization(log)
    parsed_stab = json.loads(dumps_stable(stab.to_json_dict()))
    assert set(parsed_stab["pairs"]) == {"12", "13", "23"}
