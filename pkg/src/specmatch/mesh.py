"""Triangle meshes: loading, saving, validation, areas.

Vertices are float64 rows of shape (n, 3); faces are integer rows of shape
(m, 3) indexing vertices 0-based. A mesh is validated on construction and
its arrays are frozen afterwards.
"""

import os

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ParseError, ValidationError

__all__ = [
    "TriangleMesh",
    "load_mesh",
    "save_mesh",
    "surface_area",
    "face_areas",
    "rescale_to_area",
]


class TriangleMesh:
    """Validated, immutable triangle mesh.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
        Vertex coordinates.
    faces : array_like, shape (m, 3)
        Vertex indices of each triangle, 0-based.

    Raises
    ------
    ValidationError
        If a face index is out of range, a face repeats a vertex, a
        triangle has zero area, coordinates are non-finite, or the edge
        graph is not connected.
    """

    def __init__(self, vertices, faces):
        vertices = np.asarray(vertices, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValidationError(
                "vertices must have shape (n, 3), got %r" % (vertices.shape,)
            )
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValidationError(
                "faces must have shape (m, 3), got %r" % (faces.shape,)
            )
        if not np.all(np.isfinite(vertices)):
            raise ValidationError("vertex coordinates contain non-finite values")
        n = vertices.shape[0]
        if faces.size:
            if faces.min() < 0 or faces.max() >= n:
                raise ValidationError(
                    "face indices must lie in [0, %d)" % n
                )
        if n < 3 or faces.shape[0] < 1:
            raise ValidationError("a mesh needs at least 3 vertices and 1 face")
        same = (
            (faces[:, 0] == faces[:, 1])
            | (faces[:, 1] == faces[:, 2])
            | (faces[:, 0] == faces[:, 2])
        )
        if np.any(same):
            raise ValidationError(
                "degenerate face with a repeated vertex at row %d"
                % int(np.nonzero(same)[0][0])
            )
        self.vertices = vertices
        self.faces = faces
        areas = face_areas(self)
        if np.any(areas <= 0.0) or not np.all(np.isfinite(areas)):
            raise ValidationError(
                "zero-area triangle at row %d" % int(np.argmin(areas))
            )
        self._check_connected()
        vertices.setflags(write=False)
        faces.setflags(write=False)

    def _check_connected(self):
        e = self.edges()
        adj = coo_matrix(
            (np.ones(len(e)), (e[:, 0], e[:, 1])),
            shape=(self.n_vertices, self.n_vertices),
        )
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise ValidationError(
                "edge graph has %d connected components; expected 1" % n_comp
            )

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    def edges(self):
        """Unique undirected edges, each as a sorted index pair, shape (e, 2)."""
        f = self.faces
        raw = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        raw.sort(axis=1)
        return np.unique(raw, axis=0)

    def __repr__(self):
        return "TriangleMesh(%d vertices, %d faces)" % (
            self.n_vertices,
            self.n_faces,
        )


def face_areas(mesh):
    """Areas of all triangles, shape (m,)."""
    v = mesh.vertices
    f = mesh.faces
    cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    return 0.5 * np.linalg.norm(cross, axis=1)


def surface_area(mesh):
    """Total surface area (sum of triangle areas)."""
    return float(face_areas(mesh).sum())


def rescale_to_area(mesh, target_area):
    """Uniformly scale a mesh so its surface area equals ``target_area``.

    Returns a new mesh; the input is untouched.
    """
    if target_area <= 0:
        raise ValidationError("target area must be positive")
    s = np.sqrt(target_area / surface_area(mesh))
    return TriangleMesh(mesh.vertices * s, mesh.faces)


def load_mesh(path):
    """Read a triangle mesh from an OFF or OBJ file (chosen by extension).

    Parameters
    ----------
    path : str
        File path ending in ``.off`` or ``.obj`` (case-insensitive).

    Returns
    -------
    TriangleMesh

    Raises
    ------
    ParseError
        Missing file, unknown extension, or malformed content.
    ValidationError
        Structurally invalid mesh (propagated from the constructor).
    """
    ext = os.path.splitext(path)[1].lower()
    if ext not in (".off", ".obj"):
        raise ParseError("unsupported mesh extension %r (want .off or .obj)" % ext)
    try:
        with open(path, "r") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ParseError("cannot read mesh file %s: %s" % (path, exc)) from exc
    if ext == ".off":
        vertices, faces = _parse_off(lines, path)
    else:
        vertices, faces = _parse_obj(lines, path)
    return TriangleMesh(vertices, faces)


def _content_lines(lines):
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def _parse_off(lines, path):
    it = _content_lines(lines)
    try:
        header = next(it)
    except StopIteration:
        raise ParseError("%s: empty OFF file" % path) from None
    tokens = header.split()
    if tokens[0] != "OFF":
        raise ParseError("%s: missing OFF header" % path)
    counts = tokens[1:]
    if not counts:
        try:
            counts = next(it).split()
        except StopIteration:
            raise ParseError("%s: missing OFF count line" % path) from None
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except (IndexError, ValueError):
        raise ParseError("%s: malformed OFF count line" % path) from None
    vertices = np.empty((nv, 3), dtype=np.float64)
    faces = np.empty((nf, 3), dtype=np.int64)
    try:
        for i in range(nv):
            parts = next(it).split()
            vertices[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
        for i in range(nf):
            parts = next(it).split()
            if int(parts[0]) != 3:
                raise ParseError(
                    "%s: face %d is not a triangle (%s vertices)"
                    % (path, i, parts[0])
                )
            faces[i] = [int(parts[1]), int(parts[2]), int(parts[3])]
    except StopIteration:
        raise ParseError("%s: OFF file ends early" % path) from None
    except (ValueError, IndexError) as exc:
        raise ParseError("%s: malformed OFF record: %s" % (path, exc)) from exc
    return vertices, faces


def _parse_obj(lines, path):
    vertices = []
    faces = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v":
            try:
                vertices.append(
                    [float(parts[1]), float(parts[2]), float(parts[3])]
                )
            except (ValueError, IndexError) as exc:
                raise ParseError(
                    "%s:%d: malformed vertex record" % (path, lineno)
                ) from exc
        elif parts[0] == "f":
            refs = parts[1:]
            if len(refs) != 3:
                raise ParseError(
                    "%s:%d: face with %d vertices; only triangles are supported"
                    % (path, lineno, len(refs))
                )
            idx = []
            for ref in refs:
                # "i", "i/t", "i//n", "i/t/n" all start with the vertex index
                head = ref.split("/", 1)[0]
                try:
                    value = int(head)
                except ValueError as exc:
                    raise ParseError(
                        "%s:%d: malformed face reference %r" % (path, lineno, ref)
                    ) from exc
                if value <= 0:
                    raise ValidationError(
                        "%s:%d: non-positive face index %d (OBJ indices are "
                        "1-based; relative indices are not supported)"
                        % (path, lineno, value)
                    )
                idx.append(value - 1)
            faces.append(idx)
        # every other record kind (vn, vt, o, g, s, usemtl, ...) is ignored
    if not vertices or not faces:
        raise ParseError("%s: OBJ file has no usable geometry" % path)
    return (
        np.asarray(vertices, dtype=np.float64),
        np.asarray(faces, dtype=np.int64),
    )


def save_mesh(mesh, path):
    """Write a mesh to an OFF or OBJ file (chosen by extension).

    Coordinates are written with 17 significant digits, so a load of the
    written file reproduces the float64 values exactly.
    """
    ext = os.path.splitext(path)[1].lower()
    if ext not in (".off", ".obj"):
        raise ParseError("unsupported mesh extension %r (want .off or .obj)" % ext)
    with open(path, "w") as fh:
        if ext == ".off":
            fh.write("OFF\n%d %d 0\n" % (mesh.n_vertices, mesh.n_faces))
            for x, y, z in mesh.vertices:
                fh.write("%.17g %.17g %.17g\n" % (x, y, z))
            for a, b, c in mesh.faces:
                fh.write("3 %d %d %d\n" % (a, b, c))
        else:
            for x, y, z in mesh.vertices:
                fh.write("v %.17g %.17g %.17g\n" % (x, y, z))
            for a, b, c in mesh.faces:
                fh.write("f %d %d %d\n" % (a + 1, b + 1, c + 1))
