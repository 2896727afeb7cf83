"""Shared fixtures.

The icosphere decompositions are the expensive pieces (dense eigensolves
on up to 2562 vertices), so they are computed once per session. Acceptance
tests that carry a runtime budget build their own decompositions inside
the timed window instead of borrowing these.
"""

import numpy as np
import pytest

from specmatch import (GeodesicProvider, TriangleMesh, decompose_mesh,
                       icosphere, rescale_to_area, save_mesh, tetrahedron)


@pytest.fixture(scope="session")
def tetra():
    return tetrahedron()


@pytest.fixture(scope="session")
def tetra_spec(tetra):
    return decompose_mesh(tetra, 4)


@pytest.fixture(scope="session")
def skew_tetra():
    # irregular on purpose: distinct vertex masses exercise the
    # mass-weighted identities that a regular tetrahedron hides
    vertices = [
        [0.0, 0.0, 0.0],
        [1.1, 0.0, 0.0],
        [0.3, 1.4, 0.0],
        [0.2, 0.5, 1.9],
    ]
    faces = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
    return TriangleMesh(vertices, faces)


@pytest.fixture(scope="session")
def skew_tetra_spec(skew_tetra):
    return decompose_mesh(skew_tetra, 4)


@pytest.fixture(scope="session")
def ico2():
    return rescale_to_area(icosphere(2), 1.0)


@pytest.fixture(scope="session")
def ico2_spec(ico2):
    return decompose_mesh(ico2, 30)


@pytest.fixture(scope="session")
def ico4():
    return rescale_to_area(icosphere(4), 1.0)


@pytest.fixture(scope="session")
def ico4_spec(ico4):
    return decompose_mesh(ico4, 50)


@pytest.fixture(scope="session")
def ico4_geo(ico4):
    return GeodesicProvider(ico4)


@pytest.fixture(scope="session")
def mesh_files(tmp_path_factory, tetra, ico2):
    """Mesh files on disk for CLI and parser tests."""
    root = tmp_path_factory.mktemp("meshes")
    out = {}
    for name, mesh in (
        ("tetra", tetra),
        ("ico1", icosphere(1)),
        ("ico2", ico2),
    ):
        path = root / (name + ".off")
        save_mesh(mesh, str(path))
        out[name] = str(path)
    return out


@pytest.fixture()
def identity_map():
    def build(n):
        from specmatch import PointwiseMap
        return PointwiseMap(targets=np.arange(n), n_source=n)
    return build
