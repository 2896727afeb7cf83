import numpy as np
import pytest

from specmatch import (DegenerateSpectrumError, DescriptorSet, DimensionError,
                       TriangleMesh, bumpy_icosphere, decompose_mesh,
                       export_descriptors, import_descriptors, landmark_wks,
                       mult_operator, normalize_columns, project, subsample,
                       surface_area, wks)


@pytest.fixture(scope="module")
def bumpy_spec():
    # no exact symmetries, hence no repeated eigenvalues: invariance
    # checks are not at the mercy of degenerate-subspace gauge choices
    return decompose_mesh(bumpy_icosphere(2, 0.1), 25)


def test_wks_rows_positive_finite(ico2_spec):
    d = wks(ico2_spec, n_energies=12, sigma_scale=1.0)
    assert d.values.shape == (162, 12)
    assert np.all(np.isfinite(d.values))
    assert d.values.min() > 0


def test_wks_needs_two_nonzero_eigenvalues(tetra_spec):
    from dataclasses import replace
    starved = replace(
        tetra_spec,
        eigenvalues=np.array([0.0, 1.0]),
        eigenfunctions=tetra_spec.eigenfunctions[:, :2],
        k=2,
    )
    with pytest.raises(DegenerateSpectrumError):
        wks(starved, n_energies=4, sigma_scale=1.0)


def test_wks_identical_meshes_agree(bumpy_spec):
    mesh = bumpy_icosphere(2, 0.1)
    spec2 = decompose_mesh(mesh, 25)
    w1 = wks(bumpy_spec, n_energies=20, sigma_scale=1.0)
    w2 = wks(spec2, n_energies=20, sigma_scale=1.0)
    assert np.abs(w1.values - w2.values).max() < 1e-8


def test_wks_invariant_under_rigid_motion(bumpy_spec):
    mesh = bumpy_icosphere(2, 0.1)
    axis = np.array([1.0, 2.0, 3.0])
    axis /= np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    rot = np.eye(3) + np.sin(0.7) * k + (1 - np.cos(0.7)) * (k @ k)
    moved = TriangleMesh(mesh.vertices @ rot.T + [0.3, -1.2, 2.0], mesh.faces)
    w1 = wks(bumpy_spec, n_energies=20, sigma_scale=1.0)
    w2 = wks(decompose_mesh(moved, 25), n_energies=20, sigma_scale=1.0)
    assert np.abs(w2.values - w1.values).max() < 1e-8


def test_wks_permutation_equivariant(bumpy_spec):
    mesh = bumpy_icosphere(2, 0.1)
    perm = np.random.default_rng(123).permutation(mesh.n_vertices)
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(mesh.n_vertices)
    shuffled = TriangleMesh(mesh.vertices[perm], inverse[mesh.faces])
    w1 = wks(bumpy_spec, n_energies=20, sigma_scale=1.0)
    w2 = wks(decompose_mesh(shuffled, 25), n_energies=20, sigma_scale=1.0)
    assert np.abs(w2.values - w1.values[perm]).max() < 1e-8


def test_wks_invariant_under_rescaling(bumpy_spec):
    mesh = bumpy_icosphere(2, 0.1)
    big = TriangleMesh(3.0 * mesh.vertices, mesh.faces)
    w1 = wks(bumpy_spec, n_energies=20, sigma_scale=1.0)
    w2 = wks(decompose_mesh(big, 25), n_energies=20, sigma_scale=1.0)
    assert np.abs(w2.values - w1.values).max() < 1e-6


def test_landmark_wks_peaks_at_landmark(ico2_spec):
    mark = 17
    d = landmark_wks(ico2_spec, [mark], n_energies=8, sigma_scale=0.5)
    assert d.values.shape == (162, 8)
    for col in d.values.T:
        assert np.argmax(col) == mark


def test_landmark_wks_empty_list(ico2_spec):
    d = landmark_wks(ico2_spec, [], n_energies=8, sigma_scale=0.5)
    assert d.d == 0
    assert d.values.shape == (162, 0)


def test_landmark_wks_deterministic(ico2_spec):
    a = landmark_wks(ico2_spec, [3, 71], n_energies=5, sigma_scale=1.0)
    b = landmark_wks(ico2_spec, [3, 71], n_energies=5, sigma_scale=1.0)
    assert np.array_equal(a.values, b.values)
    assert a.d == 10


def test_landmark_wks_rejects_bad_index(ico2_spec):
    with pytest.raises(IndexError):
        landmark_wks(ico2_spec, [999], n_energies=4, sigma_scale=1.0)


# ------------------------------------------------------------ projection


def _descriptor(values):
    return DescriptorSet(values=np.asarray(values, dtype=np.float64),
                         kind="custom", params={})


def test_project_constant_function(tetra, tetra_spec):
    coeff = project(tetra_spec, _descriptor(np.ones((4, 1))))
    assert coeff.matrix[0, 0] == pytest.approx(
        np.sqrt(surface_area(tetra)), rel=1e-12)
    assert np.abs(coeff.matrix[1:, 0]).max() < 1e-10


def test_project_recovers_basis_columns(ico2_spec):
    j = 7
    coeff = project(ico2_spec, _descriptor(
        ico2_spec.eigenfunctions[:, j:j + 1]))
    expected = np.zeros(ico2_spec.k)
    expected[j] = 1.0
    assert np.abs(coeff.matrix[:, 0] - expected).max() < 1e-8


def test_project_linear(ico2_spec):
    rng = np.random.default_rng(0)
    f = rng.normal(size=(162, 1))
    g = rng.normal(size=(162, 1))
    a = project(ico2_spec, _descriptor(f)).matrix
    b = project(ico2_spec, _descriptor(g)).matrix
    ab = project(ico2_spec, _descriptor(f + g)).matrix
    assert np.abs(ab - (a + b)).max() < 1e-12


def test_project_dimension_check(ico2_spec):
    with pytest.raises(DimensionError):
        project(ico2_spec, _descriptor(np.ones((7, 1))))


def test_projection_idempotent(ico2_spec):
    rng = np.random.default_rng(1)
    f = rng.normal(size=(162, 2))
    once = project(ico2_spec, _descriptor(f)).matrix
    reconstructed = ico2_spec.eigenfunctions @ once
    twice = project(ico2_spec, _descriptor(reconstructed)).matrix
    assert np.abs(twice - once).max() < 1e-10


# --------------------------------------------------- mult operators etc.


def test_mult_operator_constant_is_identity(ico2_spec):
    d = mult_operator(ico2_spec, np.ones(162))
    assert np.abs(d - np.eye(30)).max() < 1e-8
    d3 = mult_operator(ico2_spec, 3.0 * np.ones(162))
    assert np.abs(d3 - 3.0 * np.eye(30)).max() < 1e-8


def test_mult_operator_linear_and_symmetric(ico2_spec):
    rng = np.random.default_rng(2)
    f = rng.normal(size=162)
    g = rng.normal(size=162)
    df, dg = mult_operator(ico2_spec, f), mult_operator(ico2_spec, g)
    dfg = mult_operator(ico2_spec, f + g)
    assert np.abs(dfg - (df + dg)).max() < 1e-12
    assert np.abs(df - df.T).max() < 1e-10


def test_normalize_columns_mass_norm_equals_area(ico2_spec):
    rng = np.random.default_rng(3)
    values = normalize_columns(ico2_spec, rng.normal(size=(162, 4)))
    norms = np.sqrt(np.einsum("nd,n,nd->d", values, ico2_spec.mass, values))
    assert np.allclose(norms, np.sqrt(ico2_spec.mass.sum()), rtol=1e-12)


def test_subsample_uniform_indices():
    values = np.arange(40.0).reshape(4, 10)
    d = subsample(_descriptor(values), 3)
    expected = np.unique(np.round(np.linspace(0, 9, 3)).astype(int))
    assert np.array_equal(d.values, values[:, expected])
    assert subsample(_descriptor(values), 10).d == 10
    with pytest.raises(DimensionError):
        subsample(_descriptor(values), 0)


def test_export_import_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    d = _descriptor(rng.normal(size=(6, 3)))
    path = tmp_path / "desc.txt"
    export_descriptors(d, str(path))
    again = import_descriptors(str(path))
    assert np.allclose(again.values, d.values, rtol=0, atol=1e-15)
