"""Geodesic distances, correspondence error measures, and the
mask-penalty / error correlation experiment.

Distances are graph shortest paths over mesh edges with Euclidean weights.
Reported errors are normalized by the square root of the surface area so
they are invariant under uniform rescaling of the shape.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import DimensionError
from .masks import mask_penalty
from .mesh import surface_area
from .p2p import PointwiseMap, pointwise_to_fmap

__all__ = [
    "GeodesicTable",
    "GeodesicProvider",
    "geodesic_distances",
    "per_vertex_error",
    "direct_error",
    "correlation_experiment",
]


@dataclass
class GeodesicTable:
    """Shortest-path distances from a source set, in raw length units.

    distances : (len(sources), n_vertices)
    normalization : sqrt(surface area); `normalized` divides it out.
    """

    sources: np.ndarray
    distances: np.ndarray
    normalization: float

    @property
    def normalized(self):
        return self.distances / self.normalization


def _edge_graph(mesh):
    edges = mesh.edges()
    lengths = np.linalg.norm(
        mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1
    )
    n = mesh.n_vertices
    graph = csr_matrix(
        (np.concatenate([lengths, lengths]),
         (np.concatenate([edges[:, 0], edges[:, 1]]),
          np.concatenate([edges[:, 1], edges[:, 0]]))),
        shape=(n, n),
    )
    return graph


def geodesic_distances(mesh, sources):
    """Dijkstra distances from each source vertex to every vertex."""
    sources = np.asarray(sources, dtype=np.int64).ravel()
    n = mesh.n_vertices
    if sources.size and (sources.min() < 0 or sources.max() >= n):
        raise IndexError("source indices must lie in [0, %d)" % n)
    dist = dijkstra(_edge_graph(mesh), directed=False, indices=sources)
    return GeodesicTable(
        sources=sources,
        distances=np.atleast_2d(dist),
        normalization=float(np.sqrt(surface_area(mesh))),
    )


class GeodesicProvider:
    """Lazy per-source cache of Dijkstra rows for one mesh."""

    def __init__(self, mesh):
        self._graph = _edge_graph(mesh)
        self.n_vertices = mesh.n_vertices
        self.normalization = float(np.sqrt(surface_area(mesh)))
        self._rows = {}

    def _ensure(self, sources):
        missing = sorted(set(int(s) for s in sources) - self._rows.keys())
        if missing:
            if min(missing) < 0 or max(missing) >= self.n_vertices:
                raise IndexError(
                    "source indices must lie in [0, %d)" % self.n_vertices
                )
            rows = dijkstra(self._graph, directed=False, indices=missing)
            rows = np.atleast_2d(rows)
            for s, row in zip(missing, rows):
                self._rows[s] = row

    def row(self, source):
        """Raw distances from one source vertex to every vertex."""
        self._ensure([source])
        return self._rows[int(source)]

    def between(self, sources, targets):
        """Raw distances d(sources[i], targets[i]), batched by unique source."""
        sources = np.asarray(sources, dtype=np.int64).ravel()
        targets = np.asarray(targets, dtype=np.int64).ravel()
        if sources.shape != targets.shape:
            raise DimensionError("sources and targets must have equal length")
        if targets.size and (targets.min() < 0 or targets.max() >= self.n_vertices):
            raise IndexError("target indices must lie in [0, %d)" % self.n_vertices)
        self._ensure(sources)
        out = np.empty(sources.shape[0])
        for i, (s, t) in enumerate(zip(sources, targets)):
            out[i] = self._rows[int(s)][t]
        return out


def _as_provider(geo):
    if isinstance(geo, GeodesicProvider):
        return geo
    return GeodesicProvider(geo)


def _pair_distances(geo, pred, truth):
    if pred.n_target != truth.n_target:
        raise DimensionError(
            "maps cover %d and %d vertices" % (pred.n_target, truth.n_target)
        )
    return geo.between(pred.targets, truth.targets)


def per_vertex_error(pred, gt_direct, gt_symmetric, geo):
    """Normalized geodesic error per second-shape vertex, symmetric-aware.

    error_j = min(d(T(j), direct(j)), d(T(j), symmetric(j))) / sqrt(area).
    With gt_symmetric = None this is the direct error. Returns
    (per-vertex vector, mean).
    """
    geo = _as_provider(geo)
    dist = _pair_distances(geo, pred, gt_direct)
    if gt_symmetric is not None:
        dist = np.minimum(dist, _pair_distances(geo, pred, gt_symmetric))
    errors = dist / geo.normalization
    return errors, float(errors.mean())


def direct_error(pred, gt_direct, geo):
    """Normalized geodesic error against the direct ground truth only."""
    geo = _as_provider(geo)
    errors = _pair_distances(geo, pred, gt_direct) / geo.normalization
    return errors, float(errors.mean())


def _rewire(gt, noise_level, rng):
    """Send a noise_level fraction of correspondences to random vertices."""
    targets = np.array(gt.targets)
    n2 = targets.shape[0]
    count = int(round(noise_level * n2))
    if count:
        picked = rng.choice(n2, size=count, replace=False)
        targets[picked] = rng.integers(0, gt.n_source, size=count)
    return PointwiseMap(targets=targets, n_source=gt.n_source)


def correlation_experiment(spec1, spec2, gt, masks, n_samples, noise_levels,
                           rng_seed, *, geo):
    """Sampled mask-penalty vs geodesic-error table.

    Each sample rewires a fraction of ground-truth correspondences (the
    fraction cycles through noise_levels), converts the perturbed map to a
    functional map at the masks' basis sizes, normalizes it to unit
    Frobenius norm, and records every mask's penalty next to the sample's
    mean direct geodesic error. Deterministic for a fixed rng_seed: sample
    s uses an independent generator seeded by (rng_seed, s).

    Returns a list of (sample, mask kind, penalty, error) rows,
    n_samples * len(masks) of them.
    """
    masks = list(masks)
    if not masks:
        raise DimensionError("need at least one mask")
    shape = masks[0].shape
    for m in masks:
        if m.shape != shape:
            raise DimensionError(
                "masks disagree on shape: %r vs %r" % (m.shape, shape)
            )
    k2, k1 = shape
    noise_levels = [float(x) for x in noise_levels]
    if not noise_levels:
        raise DimensionError("need at least one noise level")
    geo = _as_provider(geo)
    rows = []
    for s in range(int(n_samples)):
        rng = np.random.default_rng((int(rng_seed), s))
        level = noise_levels[s % len(noise_levels)]
        perturbed = _rewire(gt, level, rng)
        fmap = pointwise_to_fmap(perturbed, spec1, spec2, k1, k2)
        norm = np.linalg.norm(fmap.matrix)
        matrix = fmap.matrix / norm if norm > 0 else fmap.matrix
        _, mean_err = direct_error(perturbed, gt, geo)
        for m in masks:
            rows.append((s, m.kind, float(mask_penalty(m, matrix)), mean_err))
    return rows
