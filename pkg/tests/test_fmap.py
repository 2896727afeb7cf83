import numpy as np
import pytest

import specmatch.fmap as fmap_mod
from specmatch import (ConfigError, DimensionError, EnergyProblem,
                       FunctionalMap, Mask, SolverError, commutator_energy,
                       energy_gradient, energy_terms, energy_value,
                       load_functional_map, mask_penalty, mult_operator,
                       normalize_weights, project, rescale_spectra,
                       resolvent_mask, save_functional_map, solve,
                       sphere_torus_commutator_series, wks)


def _random_problem(seed, k1=6, k2=6, d=8, n_mult=2,
                    weights=(1.0, 0.5, 0.0, 0.3)):
    rng = np.random.default_rng(seed)
    a1 = rng.normal(size=(k1, d))
    a2 = rng.normal(size=(k2, d))
    pairs = [(rng.normal(size=(k1, k1)), rng.normal(size=(k2, k2)))
             for _ in range(n_mult)]
    mask = Mask(weights=rng.uniform(0.05, 3.0, size=(k2, k1)))
    return EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                         mult_pairs=pairs, mask=mask, weights=weights)


def _self_problem(spec):
    """Identical-pair problem: descriptor, mult, and mask terms all vanish
    at the identity map, which is therefore the exact global minimizer."""
    d = wks(spec, n_energies=6, sigma_scale=1.0)
    a = project(spec, d).matrix
    pairs = [(mult_operator(spec, d.values[:, i]),) * 2 for i in range(2)]
    r1, r2 = rescale_spectra(spec.eigenvalues, spec.eigenvalues)
    mask = resolvent_mask(r1, r2)
    return EnergyProblem(first_coeffs=a, second_coeffs=a, mult_pairs=pairs,
                         mask=mask, weights=(1.0, 1.0, 0.0, 1.0))


# -------------------------------------------------------------- energies


def test_energy_terms_against_direct_formulas():
    problem = _random_problem(0)
    c = np.random.default_rng(1).normal(size=(6, 6))
    desc, mult, orient, mask = energy_terms(problem, c)
    assert desc == pytest.approx(
        np.linalg.norm(c @ problem.first_coeffs - problem.second_coeffs,
                       "fro") ** 2, rel=1e-12)
    expected_mult = sum(
        np.linalg.norm(c @ d1 - d2 @ c, "fro") ** 2
        for d1, d2 in problem.mult_pairs)
    assert mult == pytest.approx(expected_mult, rel=1e-12)
    assert orient == 0.0
    assert mask == pytest.approx(
        float(np.sum(problem.mask.weights * c**2)), rel=1e-12)


def test_energy_terms_are_unweighted():
    base = _random_problem(2, weights=(1.0, 1.0, 0.0, 1.0))
    scaled = EnergyProblem(first_coeffs=base.first_coeffs,
                           second_coeffs=base.second_coeffs,
                           mult_pairs=base.mult_pairs, mask=base.mask,
                           weights=(9.0, 0.25, 0.0, 4.0))
    c = np.random.default_rng(3).normal(size=(6, 6))
    assert energy_terms(base, c) == energy_terms(scaled, c)


def test_energy_value_is_weighted_sum():
    problem = _random_problem(4, weights=(2.0, 0.5, 0.0, 1.5))
    c = np.random.default_rng(5).normal(size=(6, 6))
    terms = energy_terms(problem, c)
    assert energy_value(problem, c) == pytest.approx(
        sum(w * t for w, t in zip(problem.weights, terms)), rel=1e-15)


def test_energy_rejects_wrong_map_shape():
    problem = _random_problem(6)
    with pytest.raises(DimensionError):
        energy_value(problem, np.zeros((3, 6)))


def test_mask_penalty_equals_mask_only_energy():
    rng = np.random.default_rng(7)
    mask = Mask(weights=rng.uniform(0.0, 2.0, size=(5, 4)))
    problem = EnergyProblem(first_coeffs=rng.normal(size=(4, 3)),
                            second_coeffs=rng.normal(size=(5, 3)),
                            mask=mask, weights=(0.0, 0.0, 0.0, 1.0))
    c = rng.normal(size=(5, 4))
    assert energy_value(problem, c) == pytest.approx(
        mask_penalty(mask, c), rel=1e-12)


def test_energy_convex_along_midpoints():
    problem = _random_problem(8)
    rng = np.random.default_rng(13)
    for _ in range(100):
        x = rng.normal(size=(6, 6))
        y = rng.normal(size=(6, 6))
        lhs = energy_value(problem, 0.5 * (x + y))
        rhs = 0.5 * (energy_value(problem, x) + energy_value(problem, y))
        assert lhs <= rhs + 1e-9 * (1.0 + abs(rhs))


# -------------------------------------------------------------- gradient


def test_gradient_at_zero_is_descriptor_cross_term():
    problem = _random_problem(9, weights=(1.7, 0.6, 0.0, 0.9))
    grad = energy_gradient(problem, np.zeros((6, 6)))
    expected = -2.0 * 1.7 * (problem.second_coeffs @ problem.first_coeffs.T)
    assert np.array_equal(grad, expected)


def test_gradient_matches_finite_differences():
    problem = _random_problem(21, k1=8, k2=8, d=5,
                              weights=(0.7, 1.3, 0.0, 0.4))
    rng = np.random.default_rng(22)
    c = rng.normal(size=(8, 8))
    grad = energy_gradient(problem, c)
    h = 1e-6
    fd = np.zeros_like(c)
    for i in range(8):
        for j in range(8):
            step = np.zeros_like(c)
            step[i, j] = h
            fd[i, j] = (energy_value(problem, c + step)
                        - energy_value(problem, c - step)) / (2 * h)
    assert np.abs(fd - grad).max() < 1e-4 * (1.0 + np.abs(grad).max())


def test_gradient_vanishes_at_least_squares_optimum():
    rng = np.random.default_rng(23)
    a1 = rng.normal(size=(5, 12))
    a2 = rng.normal(size=(5, 12))
    problem = EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                            weights=(1.0, 0.0, 0.0, 0.0))
    fitted = solve(problem)
    grad = energy_gradient(problem, fitted.matrix)
    assert np.linalg.norm(grad) < 1e-9


# ----------------------------------------------------------------- solve


def test_solve_descriptor_only_matches_least_squares():
    rng = np.random.default_rng(30)
    a1 = rng.normal(size=(4, 10))
    a2 = rng.normal(size=(4, 10))
    problem = EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                            weights=(1.0, 0.0, 0.0, 0.0))
    fitted = solve(problem)
    oracle = np.linalg.lstsq(a1.T, a2.T, rcond=None)[0].T
    assert np.abs(fitted.matrix - oracle).max() < 1e-10
    assert fitted.meta["method"] == "direct"
    assert fitted.meta["iterations"] == 0
    assert fitted.meta["gradient_norm"] < 1e-8


def test_solve_cg_reaches_rowwise_closed_form():
    rng = np.random.default_rng(31)
    k1, k2, d = 4, 5, 12
    a1 = rng.normal(size=(k1, d))
    a2 = rng.normal(size=(k2, d))
    mask = Mask(weights=rng.uniform(0.5, 1.5, size=(k2, k1)))
    w1, w4 = 1.0, 0.7
    problem = EnergyProblem(first_coeffs=a1, second_coeffs=a2, mask=mask,
                            weights=(w1, 0.0, 0.0, w4))
    gram = w1 * (a1 @ a1.T)
    oracle = np.empty((k2, k1))
    for i in range(k2):
        system = gram + w4 * np.diag(mask.weights[i])
        oracle[i] = np.linalg.solve(system, w1 * (a1 @ a2[i]))
    for init in (None, np.zeros((k2, k1))):
        fitted = solve(problem, method="cg", init=init)
        assert np.abs(fitted.matrix - oracle).max() < 1e-6
        assert fitted.meta["method"] == "cg"


def test_solve_full_problem_matches_dense_normal_equations():
    problem = _random_problem(32, k1=3, k2=3, d=5, n_mult=2,
                              weights=(1.0, 0.8, 0.0, 0.6))
    k1, k2 = problem.basis_sizes
    g0 = energy_gradient(problem, np.zeros((k2, k1)))
    hessian = np.empty((k1 * k2, k1 * k2))
    for idx in range(k1 * k2):
        unit = np.zeros((k2, k1))
        unit.flat[idx] = 1.0
        hessian[:, idx] = (energy_gradient(problem, unit) - g0).ravel()
    oracle = np.linalg.solve(hessian, -g0.ravel()).reshape(k2, k1)
    fitted = solve(problem)
    assert fitted.meta["method"] == "cg"
    assert np.abs(fitted.matrix - oracle).max() < 1e-5
    gap = energy_value(problem, fitted.matrix) - energy_value(problem, oracle)
    assert gap < 1e-10 * (1.0 + energy_value(problem, np.zeros((k2, k1))))


def test_solve_identical_pair_returns_exact_identity(skew_tetra_spec):
    problem = _self_problem(skew_tetra_spec)
    fitted = solve(problem)
    assert np.array_equal(fitted.matrix, np.eye(4))
    assert fitted.meta["method"] == "cg"
    assert fitted.meta["iterations"] == 0
    assert fitted.meta["gradient_norm"] == 0.0


def test_solve_pure_mask_penalty_returns_zero():
    rng = np.random.default_rng(33)
    mask = Mask(weights=rng.uniform(0.05, 3.0, size=(5, 4)))
    problem = EnergyProblem(first_coeffs=rng.normal(size=(4, 6)),
                            second_coeffs=rng.normal(size=(5, 6)),
                            mask=mask, weights=(0.0, 0.0, 0.0, 1.0))
    fitted = solve(problem)
    assert np.array_equal(fitted.matrix, np.zeros((5, 4)))
    assert fitted.meta["method"] == "direct"


def test_solve_trace_energies_never_increase():
    problem = _random_problem(34)
    trace = []
    fitted = solve(problem, trace=trace)
    assert len(trace) >= 2
    assert np.all(np.diff(trace) <= 1e-9 * (1.0 + trace[0]))
    assert trace[-1] == pytest.approx(
        energy_value(problem, fitted.matrix), rel=1e-9)


def test_solve_iteration_cap_raises_solver_error(monkeypatch):
    monkeypatch.setattr(fmap_mod, "_CG_MAX_ITER", 2)
    problem = _random_problem(35, k1=8, k2=8, d=10, n_mult=3,
                              weights=(1.0, 2.0, 0.0, 0.5))
    with pytest.raises(SolverError) as exc:
        solve(problem)
    assert exc.value.residual > 0


def test_solve_method_validation():
    problem = _random_problem(36)
    with pytest.raises(ConfigError):
        solve(problem, method="direct")
    with pytest.raises(ConfigError):
        solve(problem, method="newton")


def test_solve_with_quadratic_plugin_term():
    class Ridge:
        def value(self, c):
            return float(np.sum(c * c))

        def gradient(self, c):
            return 2.0 * c

    rng = np.random.default_rng(37)
    a1 = rng.normal(size=(4, 9))
    a2 = rng.normal(size=(4, 9))
    w3 = 0.8
    problem = EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                            orient_term=Ridge(),
                            weights=(1.0, 0.0, w3, 0.0))
    fitted = solve(problem)
    oracle = np.linalg.solve(a1 @ a1.T + w3 * np.eye(4), a1 @ a2.T).T
    assert np.abs(fitted.matrix - oracle).max() < 1e-6
    terms = energy_terms(problem, fitted.matrix)
    assert terms[2] == pytest.approx(np.sum(fitted.matrix**2), rel=1e-12)


# ------------------------------------------------------ weight balancing


def test_normalize_weights_matches_definition():
    problem = _random_problem(40, weights=(1.0, 1.0, 0.0, 1.0))
    base = (2.0, 3.0, 0.0, 5.0)
    balanced = normalize_weights(problem, base)
    c_ini = np.linalg.lstsq(problem.first_coeffs.T,
                            problem.second_coeffs.T, rcond=None)[0].T
    terms = energy_terms(problem, c_ini)
    scale = max(max(terms), float(np.sum(problem.second_coeffs**2)))
    floor = 1e-12 * scale
    expected = tuple(b / t if t > floor and t > 0.0 else b
                     for b, t in zip(base, terms))
    assert balanced == pytest.approx(expected, rel=1e-12)


def test_normalize_weights_passes_vanished_terms_through():
    rng = np.random.default_rng(41)
    a1 = rng.normal(size=(4, 10))
    c_true = rng.normal(size=(4, 4))
    d = np.diag([1.0, 2.0, 3.0, 4.0])
    problem = EnergyProblem(first_coeffs=a1, second_coeffs=c_true @ a1,
                            mult_pairs=[(d, d)],
                            weights=(1.0, 1.0, 0.0, 0.0))
    balanced = normalize_weights(problem, (2.0, 3.0, 1.5, 0.25))
    # consistent pair: the descriptor term vanishes at C_ini, as do the
    # absent orient and mask terms; only the mult weight is rescaled
    assert balanced[0] == 2.0
    assert balanced[2] == 1.5
    assert balanced[3] == 0.25
    assert balanced[1] != 3.0


def test_normalize_weights_counteract_descriptor_scaling():
    base = (1.0, 1.0, 0.0, 1.0)
    problem = _random_problem(42, weights=(1.0, 1.0, 0.0, 1.0))
    scaled = EnergyProblem(first_coeffs=10.0 * problem.first_coeffs,
                           second_coeffs=10.0 * problem.second_coeffs,
                           mult_pairs=problem.mult_pairs, mask=problem.mask,
                           weights=problem.weights)
    w = normalize_weights(problem, base)
    w_scaled = normalize_weights(scaled, base)
    assert w_scaled[0] == pytest.approx(w[0] / 100.0, rel=1e-9)
    c = np.random.default_rng(43).normal(size=(6, 6))
    assert w_scaled[0] * energy_terms(scaled, c)[0] == pytest.approx(
        w[0] * energy_terms(problem, c)[0], rel=1e-9)


def test_normalize_weights_validates_base():
    problem = _random_problem(44)
    with pytest.raises(ConfigError):
        normalize_weights(problem, (1.0, 1.0, 1.0))
    with pytest.raises(ConfigError):
        normalize_weights(problem, (1.0, -1.0, 0.0, 1.0))


# ------------------------------------------------- commutator energies


def test_commutator_energy_small_cases():
    assert commutator_energy(np.eye(2), [1.0, 2.0], [1.0, 2.0]) == 0.0
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert commutator_energy(swap, [1.0, 3.0], [1.0, 3.0]) == pytest.approx(8.0)
    assert commutator_energy(np.array([[1.0]]), [1j], [-1j]) == pytest.approx(4.0)


def test_commutator_energy_validation():
    with pytest.raises(DimensionError):
        commutator_energy(np.eye(2), [1.0], [1.0, 2.0])
    with pytest.raises(DimensionError):
        commutator_energy(np.ones(3), [1.0], [1.0])
    with pytest.raises(ValueError):
        commutator_energy(np.eye(1), [np.inf], [1.0])


def test_commutator_series_shapes_and_growth():
    series = sphere_torus_commutator_series(k_max=60)
    assert np.array_equal(series["truncation"], np.arange(1, 61))
    assert len(series["standard"]) == 60
    assert len(series["resolvent"]) == 60
    assert np.all(np.diff(series["standard"]) >= 0)
    assert np.all(np.diff(series["resolvent"]) >= 0)
    assert series["standard"][-1] > series["standard"][29]
    with pytest.raises(DimensionError):
        sphere_torus_commutator_series(k_max=0)


# ------------------------------------------------------- serialization


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(50)
    fmap = FunctionalMap(matrix=rng.normal(size=(5, 3)))
    path = tmp_path / "fmap.txt"
    save_functional_map(fmap, str(path))
    again = load_functional_map(str(path))
    assert np.array_equal(again.matrix, fmap.matrix)
    assert again.basis_sizes == (3, 5)


def test_functional_map_validation():
    fmap = FunctionalMap(matrix=np.zeros((3, 2)))
    assert fmap.basis_sizes == (2, 3)
    assert fmap.shape == (3, 2)
    with pytest.raises(DimensionError):
        FunctionalMap(matrix=np.zeros((3, 2)), basis_sizes=(3, 2))
    with pytest.raises(DimensionError):
        FunctionalMap(matrix=np.zeros(3))
    with pytest.raises(ValueError):
        FunctionalMap(matrix=np.array([[np.nan]]))


def test_energy_problem_validation():
    rng = np.random.default_rng(51)
    a1 = rng.normal(size=(4, 6))
    a2 = rng.normal(size=(5, 6))
    with pytest.raises(DimensionError):
        EnergyProblem(first_coeffs=a1, second_coeffs=rng.normal(size=(5, 7)))
    with pytest.raises(ConfigError):
        EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                      weights=(1.0, 1.0, 1.0))
    with pytest.raises(ConfigError):
        EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                      weights=(1.0, -1.0, 0.0, 0.0))
    with pytest.raises(ConfigError):
        # mask weight active but no mask supplied
        EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                      weights=(1.0, 0.0, 0.0, 1.0))
    with pytest.raises(ConfigError):
        # orientation weight active but no plugin supplied
        EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                      weights=(1.0, 0.0, 1.0, 0.0))
    with pytest.raises(DimensionError):
        EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                      mask=Mask(weights=np.ones((4, 5))),
                      weights=(1.0, 0.0, 0.0, 1.0))
    with pytest.raises(DimensionError):
        EnergyProblem(first_coeffs=a1, second_coeffs=a2,
                      mult_pairs=[(np.eye(3), np.eye(5))],
                      weights=(1.0, 1.0, 0.0, 0.0))
    with pytest.raises(ConfigError):
        # no descriptors and no mask: nothing pins the map down
        EnergyProblem(first_coeffs=np.zeros((4, 0)),
                      second_coeffs=np.zeros((5, 0)),
                      weights=(1.0, 0.0, 0.0, 0.0))
