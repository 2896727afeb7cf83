"""Synthetic test meshes: tetrahedron, icospheres, ring torus.

These generators exist so experiments and tests run without bundled data.
All of them are deterministic.
"""

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .mesh import TriangleMesh

__all__ = [
    "tetrahedron",
    "icosphere",
    "bumpy_icosphere",
    "ring_torus",
    "reflection_map",
]

_PHI = (1.0 + np.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=np.float64,
)

_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def tetrahedron(edge=1.0):
    """Regular tetrahedron with the given edge length.

    With edge 1 the surface area is sqrt(3).
    """
    v = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64
    )
    v *= edge / np.sqrt(8.0)  # raw edge length is 2*sqrt(2)
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]], dtype=np.int64)
    return TriangleMesh(v, f)


def icosphere(subdivisions, radius=1.0):
    """Icosahedron subdivided ``subdivisions`` times, vertices on a sphere.

    Vertex/face counts per level: 12/20, 42/80, 162/320, 642/1280,
    2562/5120, ...
    """
    if subdivisions < 0:
        raise ValidationError("subdivisions must be nonnegative")
    verts = [row / np.linalg.norm(row) for row in _ICO_VERTS]
    faces = _ICO_FACES
    for _ in range(subdivisions):
        midpoint = {}
        new_faces = []

        def mid(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                p = (verts[i] + verts[j]) / 2.0
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]])
        faces = np.asarray(new_faces, dtype=np.int64)
    return TriangleMesh(np.asarray(verts) * radius, faces)


def bumpy_icosphere(subdivisions, amplitude=0.1):
    """Icosphere with a smooth deterministic radial deformation.

    Same connectivity as ``icosphere(subdivisions)``, so the identity is a
    meaningful vertex correspondence between the two.
    """
    base = icosphere(subdivisions)
    x, y, z = base.vertices.T
    factor = 1.0 + amplitude * (np.sin(3.0 * x) * np.cos(2.0 * y) + 0.5 * np.sin(4.0 * z))
    return TriangleMesh(base.vertices * factor[:, None], base.faces)


def ring_torus(n_major=24, n_minor=16, major_radius=1.0, minor_radius=0.4):
    """Triangulated torus of revolution on an n_major x n_minor grid."""
    if n_major < 3 or n_minor < 3:
        raise ValidationError("torus grid needs at least 3 samples per loop")
    theta = 2.0 * np.pi * np.arange(n_major) / n_major
    phi = 2.0 * np.pi * np.arange(n_minor) / n_minor
    verts = np.empty((n_major * n_minor, 3))
    for i, th in enumerate(theta):
        ring = major_radius + minor_radius * np.cos(phi)
        base = i * n_minor
        verts[base : base + n_minor, 0] = ring * np.cos(th)
        verts[base : base + n_minor, 1] = ring * np.sin(th)
        verts[base : base + n_minor, 2] = minor_radius * np.sin(phi)
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            faces.append([a, b, c])
            faces.append([a, c, d])
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


def reflection_map(mesh, axis=0, tol=1e-9):
    """Vertex map onto the mirror image across the plane ``coord[axis] = 0``.

    Only meaningful for meshes whose vertex set is exactly symmetric under
    that reflection (icospheres, ring tori around a symmetric axis).

    Returns
    -------
    ndarray of int
        targets[j] = index of the vertex at the reflected position of j.

    Raises
    ------
    ValidationError
        If some vertex has no mirror partner within ``tol``.
    """
    mirrored = mesh.vertices.copy()
    mirrored[:, axis] = -mirrored[:, axis]
    tree = cKDTree(mesh.vertices)
    dist, idx = tree.query(mirrored)
    if np.any(dist > tol):
        j = int(np.argmax(dist))
        raise ValidationError(
            "vertex %d has no reflection partner (nearest at distance %g)"
            % (j, dist[j])
        )
    return idx.astype(np.int64)
