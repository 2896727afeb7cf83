"""Spectral point descriptors and their reduced-basis projections.

The wave kernel signature of a point x at log-energy e is

    WKS(x, e) = sum_k phi_k(x)^2 exp(-(e - log lam_k)^2 / (2 sigma^2))
                / sum_k exp(-(e - log lam_k)^2 / (2 sigma^2)),

summed over nonzero eigenvalues. Energies are sampled uniformly on
[log lam_min + 2 sigma, log lam_max - 2 sigma] with
sigma = sigma_scale * (log lam_max - log lam_min) / n_energies.

Descriptor columns are normalized to unit mass-weighted root-mean-square
(integral of f^2 over the surface equals the area) before use, which makes
term weights comparable across descriptor counts and keeps the descriptors
invariant under uniform mesh rescaling.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpectrumError, DimensionError

__all__ = [
    "DescriptorSet",
    "DescriptorCoefficients",
    "wks",
    "landmark_wks",
    "project",
    "mult_operator",
    "subsample",
    "normalize_columns",
    "export_descriptors",
    "import_descriptors",
]

def _nonzero_modes(eigenvalues):
    """Boolean mask of genuinely nonzero eigenvalues.

    The discrete zero mode comes out of the eigensolver as a tiny value
    whose magnitude scales with the spectrum, so the cutoff is relative.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    top = float(lam.max()) if lam.size else 0.0
    return lam > 1e-8 * max(top, 1.0)


@dataclass
class DescriptorSet:
    """Per-vertex descriptor functions, one per column.

    values : (n_vertices, d)
    kind : 'wks', 'landmark_wks', or 'custom'
    params : generation parameters
    """

    values: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DimensionError("descriptor values must be 2-D, got %r" % (v.shape,))
        if not np.all(np.isfinite(v)):
            raise ValueError("descriptor values must be finite")
        self.values = v

    @property
    def d(self):
        return self.values.shape[1]


@dataclass
class DescriptorCoefficients:
    """Reduced-basis coefficients of a descriptor set, shape (k, d)."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)


def _wks_grid(eigenvalues, n_energies, sigma_scale):
    nonzero = eigenvalues[_nonzero_modes(eigenvalues)]
    if nonzero.size < 2:
        raise DegenerateSpectrumError(
            "wave kernel signature needs at least 2 nonzero eigenvalues, "
            "found %d" % nonzero.size
        )
    if n_energies < 1:
        raise ValueError("n_energies must be at least 1")
    if sigma_scale <= 0:
        raise ValueError("sigma_scale must be positive")
    log_l = np.log(nonzero)
    e_min, e_max = log_l.min(), log_l.max()
    sigma = sigma_scale * (e_max - e_min) / n_energies
    energies = np.linspace(e_min + 2.0 * sigma, e_max - 2.0 * sigma, n_energies)
    # Gaussian weights: rows = eigenvalues, columns = energies
    gauss = np.exp(-((energies[None, :] - log_l[:, None]) ** 2) / (2.0 * sigma**2))
    return nonzero, gauss, energies, sigma


def wks(spec, n_energies=100, sigma_scale=1.0, normalize=True):
    """Wave kernel signature descriptor set, one column per energy level.

    Raises
    ------
    DegenerateSpectrumError
        Fewer than 2 nonzero eigenvalues in the decomposition.
    """
    keep = _nonzero_modes(spec.eigenvalues)
    _, gauss, energies, sigma = _wks_grid(spec.eigenvalues, n_energies, sigma_scale)
    phi2 = spec.eigenfunctions[:, keep] ** 2
    values = (phi2 @ gauss) / gauss.sum(axis=0)[None, :]
    if normalize:
        values = normalize_columns(spec, values)
    return DescriptorSet(
        values=values,
        kind="wks",
        params={
            "n_energies": int(n_energies),
            "sigma_scale": float(sigma_scale),
            "sigma": float(sigma),
            "energies": energies,
            "normalized": bool(normalize),
        },
    )


def landmark_wks(spec, landmarks, n_energies=100, sigma_scale=1.0, normalize=True):
    """Landmark-centered WKS: d = len(landmarks) * n_energies columns.

    Column block for landmark l holds, per energy e,
    sum_k phi_k(x) phi_k(l) * Gaussian(e, log lam_k) / partition(e).

    Raises
    ------
    IndexError
        Landmark index outside [0, n_vertices).
    """
    landmarks = list(landmarks)
    n = spec.eigenfunctions.shape[0]
    for l in landmarks:
        if not 0 <= int(l) < n:
            raise IndexError("landmark %r outside [0, %d)" % (l, n))
    if not landmarks:
        return DescriptorSet(
            values=np.zeros((n, 0)),
            kind="landmark_wks",
            params={"landmarks": [], "n_energies": int(n_energies)},
        )
    keep = _nonzero_modes(spec.eigenvalues)
    _, gauss, energies, sigma = _wks_grid(spec.eigenvalues, n_energies, sigma_scale)
    phi = spec.eigenfunctions[:, keep]
    partition = gauss.sum(axis=0)
    blocks = []
    for l in landmarks:
        weighted = phi * phi[int(l), :][None, :]
        blocks.append((weighted @ gauss) / partition[None, :])
    values = np.concatenate(blocks, axis=1)
    if normalize:
        values = normalize_columns(spec, values)
    return DescriptorSet(
        values=values,
        kind="landmark_wks",
        params={
            "landmarks": [int(l) for l in landmarks],
            "n_energies": int(n_energies),
            "sigma_scale": float(sigma_scale),
            "sigma": float(sigma),
            "energies": energies,
            "normalized": bool(normalize),
        },
    )


def normalize_columns(spec, values):
    """Scale each column to unit mass-weighted root-mean-square.

    After scaling, sum_i mass_i * f_i^2 equals the surface area for every
    column, so the scaling is invariant under uniform mesh rescaling.
    Near-zero columns are left untouched.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != spec.mass.shape[0]:
        raise DimensionError(
            "descriptors have %d rows but the mesh has %d vertices"
            % (values.shape[0], spec.mass.shape[0])
        )
    area = spec.mass.sum()
    norms = np.sqrt(spec.mass @ (values**2) / area)
    safe = np.where(norms > 1e-300, norms, 1.0)
    return values / safe[None, :]


def project(spec, descriptors):
    """Reduced-basis coefficients A = eigenfunctions^T * diag(mass) * values."""
    values = descriptors.values if isinstance(descriptors, DescriptorSet) else np.asarray(descriptors, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != spec.eigenfunctions.shape[0]:
        raise DimensionError(
            "descriptors have %d rows but the basis has %d"
            % (values.shape[0], spec.eigenfunctions.shape[0])
        )
    coeff = spec.eigenfunctions.T @ (spec.mass[:, None] * values)
    return DescriptorCoefficients(matrix=coeff)


def mult_operator(spec, descriptor_column):
    """Reduced multiplication operator D = Phi^T diag(mass) diag(f) Phi.

    Symmetric by construction (both diagonal factors commute); the
    constant descriptor 1 gives the identity.
    """
    f = np.asarray(descriptor_column, dtype=np.float64).ravel()
    if f.shape[0] != spec.eigenfunctions.shape[0]:
        raise DimensionError(
            "descriptor has %d entries but the mesh has %d vertices"
            % (f.shape[0], spec.eigenfunctions.shape[0])
        )
    if not np.all(np.isfinite(f)):
        raise ValueError("descriptor values must be finite")
    weighted = (spec.mass * f)[:, None] * spec.eigenfunctions
    return spec.eigenfunctions.T @ weighted


def subsample(descriptors, count):
    """Keep ``count`` uniformly spaced columns (deterministic)."""
    d = descriptors.d
    if not 1 <= count <= d:
        raise DimensionError("count must lie in [1, %d], got %r" % (d, count))
    idx = np.unique(np.round(np.linspace(0, d - 1, count)).astype(int))
    params = dict(descriptors.params)
    params["subsampled_from"] = d
    return DescriptorSet(
        values=descriptors.values[:, idx], kind=descriptors.kind, params=params
    )


def export_descriptors(descriptors, path):
    """Write descriptor values as delimited text, one vertex per row."""
    np.savetxt(path, descriptors.values, fmt="%.17g", delimiter="\t")


def import_descriptors(path):
    """Read a delimited-text descriptor matrix as a custom DescriptorSet."""
    values = np.loadtxt(path, delimiter="\t", ndmin=2)
    return DescriptorSet(values=values, kind="custom", params={"source": str(path)})
