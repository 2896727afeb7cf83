"""Conversion between functional maps and pointwise correspondences.

Direction convention, used everywhere: a pointwise map T sends vertices of
the second shape to vertices of the first, and the map matrix C is its
pullback, so (C f)(y) = f(T(y)) for coefficients f on the first shape.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .fmap import FunctionalMap, _as_matrix

__all__ = [
    "PointwiseMap",
    "fmap_to_pointwise",
    "icp_refine",
    "pointwise_to_fmap",
    "save_pointwise_map",
    "load_pointwise_map",
]

# brute-force NN block size: bounds the scratch matrix at ~8M doubles
_NN_BLOCK_ENTRIES = 8_000_000


@dataclass
class PointwiseMap:
    """Total vertex correspondence, second shape to first.

    targets : length n2, entry j is the matched first-shape vertex of
        second-shape vertex j
    n_source : n1, the number of first-shape vertices
    """

    targets: np.ndarray
    n_source: int

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=np.int64).ravel()
        self.n_source = int(self.n_source)
        if self.n_source < 1:
            raise DimensionError("n_source must be positive")
        if t.size and (t.min() < 0 or t.max() >= self.n_source):
            raise IndexError(
                "targets must lie in [0, %d), found range [%d, %d]"
                % (self.n_source, t.min(), t.max())
            )
        t.setflags(write=False)
        self.targets = t

    @property
    def n_target(self):
        return self.targets.shape[0]


def _nn_targets(emb1, emb2):
    """Row of emb1 nearest to each row of emb2; ties pick the smallest index.

    Distances are expanded as |x|^2 - 2 x.y (the |y|^2 term is constant per
    query and cannot change the argmin).
    """
    sq1 = np.sum(emb1**2, axis=1)
    out = np.empty(emb2.shape[0], dtype=np.int64)
    block = max(1, _NN_BLOCK_ENTRIES // max(1, emb1.shape[0]))
    for start in range(0, emb2.shape[0], block):
        stop = min(start + block, emb2.shape[0])
        scores = sq1[:, None] - 2.0 * (emb1 @ emb2[start:stop].T)
        out[start:stop] = np.argmin(scores, axis=0)
    return out


def _check_basis(c_matrix, spec1, spec2):
    k2, k1 = c_matrix.shape
    if k1 > spec1.k or k2 > spec2.k:
        raise DimensionError(
            "map needs bases (%d, %d) but decompositions hold (%d, %d)"
            % (k1, k2, spec1.k, spec2.k)
        )
    return k1, k2


def fmap_to_pointwise(c, spec1, spec2):
    """Nearest-neighbor pointwise map in the spectral embedding.

    T(j) minimizes |Phi1(i,:) C^T - Phi2(j,:)| over first-shape vertices i.
    """
    m = _as_matrix(c)
    k1, k2 = _check_basis(m, spec1, spec2)
    emb1 = spec1.eigenfunctions[:, :k1] @ m.T
    emb2 = spec2.eigenfunctions[:, :k2]
    return PointwiseMap(targets=_nn_targets(emb1, emb2), n_source=spec1.n)


def _icp_objective(m, spec1, spec2, targets):
    k2, k1 = m.shape
    diff = spec1.eigenfunctions[targets, :k1] @ m.T - spec2.eigenfunctions[:, :k2]
    return float(np.sum(diff**2))


def icp_refine(c, spec1, spec2, iterations=10):
    """Orthogonal-Procrustes ICP refinement of a square map.

    Alternates nearest-neighbor recovery of T and the best orthogonal C
    for that T (polar factor of Phi2^T Phi1[T]). Stops early when T
    repeats; otherwise after `iterations` rounds with
    meta['icp_converged'] = False. The final T is recomputed from the
    final C. Returns (FunctionalMap, PointwiseMap).
    """
    m = _as_matrix(c).copy()
    if m.shape[0] != m.shape[1]:
        raise DimensionError(
            "orthogonal refinement needs a square map, got %r" % (m.shape,)
        )
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    k = m.shape[0]
    _check_basis(m, spec1, spec2)
    phi1 = spec1.eigenfunctions[:, :k]
    phi2 = spec2.eigenfunctions[:, :k]

    prev = None
    objective = []
    rounds = 0
    converged = False
    for _ in range(iterations):
        targets = _nn_targets(phi1 @ m.T, phi2)
        if prev is not None and np.array_equal(targets, prev):
            converged = True
            break
        u, _, vt = np.linalg.svd(phi2.T @ phi1[targets])
        m = u @ vt
        objective.append(_icp_objective(m, spec1, spec2, targets))
        prev = targets
        rounds += 1
    refined = FunctionalMap(
        matrix=m,
        meta={
            "icp_rounds": rounds,
            "icp_converged": converged or iterations == 0,
            "objective_per_round": objective,
        },
    )
    final = PointwiseMap(targets=_nn_targets(phi1 @ m.T, phi2), n_source=spec1.n)
    return refined, final


def pointwise_to_fmap(pmap, spec1, spec2, k1, k2):
    """Reduced-basis pullback of a pointwise map.

    C = Phi2[:, :k2]^T diag(mass2) Phi1[targets, :k1]; exact at full basis
    on identical triangulations.
    """
    if not 1 <= k1 <= spec1.k or not 1 <= k2 <= spec2.k:
        raise DimensionError(
            "basis sizes (%d, %d) outside available (%d, %d)"
            % (k1, k2, spec1.k, spec2.k)
        )
    if pmap.n_target != spec2.n:
        raise DimensionError(
            "map covers %d vertices but the second shape has %d"
            % (pmap.n_target, spec2.n)
        )
    if pmap.n_source != spec1.n:
        raise DimensionError(
            "map sources %d vertices but the first shape has %d"
            % (pmap.n_source, spec1.n)
        )
    pulled = spec1.eigenfunctions[pmap.targets, :k1]
    matrix = spec2.eigenfunctions[:, :k2].T @ (spec2.mass[:, None] * pulled)
    return FunctionalMap(matrix=matrix, basis_sizes=(k1, k2))


def save_pointwise_map(pmap, path):
    """Write one 0-based target index per line, line j = T(j)."""
    np.savetxt(path, pmap.targets, fmt="%d")


def load_pointwise_map(path, n_source=None, one_based=False):
    """Read a one-index-per-line correspondence file.

    one_based : subtract 1 from every entry (common published format).
    n_source : first-shape vertex count; inferred as max+1 when omitted.
    """
    targets = np.loadtxt(path, dtype=np.int64, ndmin=1)
    if one_based:
        targets = targets - 1
    if n_source is None:
        n_source = int(targets.max()) + 1 if targets.size else 1
    return PointwiseMap(targets=targets, n_source=n_source)
