"""Laplace-Beltrami spectra: assembly, eigendecomposition, analytic spectra.

The discrete operator is the cotangent stiffness matrix L (symmetric
positive semidefinite, zero row sums) paired with the barycentric lumped
mass vector m (one third of the incident triangle area per vertex). The
generalized problem L phi = lambda * diag(m) * phi is solved through the
symmetric standard form diag(m)^-1/2 L diag(m)^-1/2.

Serialized decomposition container (``save_decomposition``): little-endian
binary; 4-byte magic ``SMSD``, uint32 version (1), int64 n, int64 k,
float64 area, then eigenvalues (k float64), eigenfunctions (n*k float64,
row-major), mass (n float64). The round trip is lossless at float64.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import (
    ConvergenceError,
    DegenerateSpectrumError,
    DimensionError,
    InvalidResolventPoint,
    NumericalError,
    ParseError,
)
from .mesh import face_areas

__all__ = [
    "SpectralDecomposition",
    "AnalyticSpectrum",
    "cotangent_laplacian",
    "eigendecompose",
    "decompose_mesh",
    "sphere_spectrum",
    "torus_spectrum",
    "weyl_estimate",
    "rescale_spectra",
    "hs_partial_sum",
    "save_decomposition",
    "load_decomposition",
]

_DENSE_LIMIT = 4000
_MAGIC = b"SMSD"


@dataclass(frozen=True)
class SpectralDecomposition:
    """Truncated generalized eigendecomposition of a mesh Laplacian.

    eigenvalues : (k,) nondecreasing, nonnegative
    eigenfunctions : (n, k), mass-orthonormal columns
    mass : (n,) lumped vertex masses, summing to the surface area
    k : truncation order
    source_area : surface area of the originating mesh
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    mass: np.ndarray
    k: int
    source_area: float

    def __post_init__(self):
        for arr in (self.eigenvalues, self.eigenfunctions, self.mass):
            arr.setflags(write=False)

    @property
    def n(self):
        return self.eigenfunctions.shape[0]


@dataclass(frozen=True)
class AnalyticSpectrum:
    """Closed-form Laplace-Beltrami spectrum of a reference surface."""

    eigenvalues: np.ndarray
    surface: str
    area: float

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)


def cotangent_laplacian(mesh):
    """Assemble the cotangent stiffness matrix and lumped mass vector.

    Returns
    -------
    (scipy.sparse.csr_matrix, ndarray)
        Stiffness L (n x n, symmetric PSD, zero row sums) and the
        barycentric mass vector (n,), whose sum is the surface area.

    Raises
    ------
    NumericalError
        If any cotangent weight is non-finite.
    """
    v = mesh.vertices
    f = mesh.faces
    n = mesh.n_vertices

    rows, cols, vals = [], [], []
    # Corner c of each face contributes cot(angle at c)/2 to the opposite edge.
    for c in range(3):
        i, j, k = f[:, c], f[:, (c + 1) % 3], f[:, (c + 2) % 3]
        e1 = v[j] - v[i]
        e2 = v[k] - v[i]
        cross = np.linalg.norm(np.cross(e1, e2), axis=1)
        cot = np.einsum("ij,ij->i", e1, e2) / cross
        half = 0.5 * cot
        rows.extend([j, k])
        cols.extend([k, j])
        vals.extend([half, half])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite cotangent weight (degenerate triangle)")
    w = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    diag = np.asarray(w.sum(axis=1)).ravel()
    stiffness = scipy.sparse.diags(diag) - w

    areas = face_areas(mesh)
    mass = np.zeros(n)
    for c in range(3):
        np.add.at(mass, f[:, c], areas / 3.0)
    return stiffness.tocsr(), mass


def eigendecompose(stiffness, mass, k):
    """Lowest k eigenpairs of L phi = lambda * diag(mass) * phi.

    Dense symmetric solve below 4000 vertices, shift-invert Lanczos above.
    Eigenvalues are clamped to 0 when they sit in (-1e-10 * Lambda[k-1], 0);
    columns are mass-orthonormal and sign-fixed so each eigenfunction's
    largest-magnitude entry is positive (ties resolved by first index).

    Raises
    ------
    DimensionError
        k outside [1, n] or mismatched shapes.
    ConvergenceError
        The iterative solver did not converge.
    NumericalError
        Substantially negative eigenvalues (broken assembly) or
        nonpositive masses.
    """
    mass = np.asarray(mass, dtype=np.float64)
    n = mass.shape[0]
    if stiffness.shape != (n, n):
        raise DimensionError(
            "stiffness is %r but mass has %d entries" % (stiffness.shape, n)
        )
    if not 1 <= k <= n:
        raise DimensionError("k must lie in [1, %d], got %d" % (n, k))
    if np.any(mass <= 0) or not np.all(np.isfinite(mass)):
        raise NumericalError("mass vector must be strictly positive")

    inv_sqrt = 1.0 / np.sqrt(mass)
    if n <= _DENSE_LIMIT:
        dense = stiffness.toarray() if scipy.sparse.issparse(stiffness) else np.asarray(stiffness)
        sym = dense * inv_sqrt[:, None] * inv_sqrt[None, :]
        sym = 0.5 * (sym + sym.T)
        vals, vecs = scipy.linalg.eigh(sym, subset_by_index=(0, k - 1))
    else:
        area = mass.sum()
        sigma = -0.01 * 4.0 * np.pi / area
        m_diag = scipy.sparse.diags(mass)
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(
                stiffness.tocsc(), k=k, M=m_diag.tocsc(), sigma=sigma, which="LM"
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise ConvergenceError(
                "eigensolver did not converge for k=%d: %s" % (k, exc)
            ) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        # eigsh with M already returns mass-orthonormal vectors; convert to
        # the standard-form convention for the shared post-processing below
        vecs = vecs * np.sqrt(mass)[:, None]

    top = max(abs(vals[-1]), 1.0)
    floor = -1e-10 * top
    if np.any(vals < floor):
        raise NumericalError(
            "eigenvalue %g is negative beyond tolerance" % float(vals.min())
        )
    vals = np.where(vals < 0.0, 0.0, vals)

    funcs = vecs * inv_sqrt[:, None]
    # deterministic sign: largest-magnitude entry of each column positive
    lead = np.argmax(np.abs(funcs), axis=0)
    signs = np.sign(funcs[lead, np.arange(funcs.shape[1])])
    signs[signs == 0] = 1.0
    funcs = funcs * signs[None, :]

    return SpectralDecomposition(
        eigenvalues=np.ascontiguousarray(vals),
        eigenfunctions=np.ascontiguousarray(funcs),
        mass=mass.copy(),
        k=k,
        source_area=float(mass.sum()),
    )


def decompose_mesh(mesh, k):
    """Convenience: cotangent assembly followed by eigendecomposition."""
    stiffness, mass = cotangent_laplacian(mesh)
    return eigendecompose(stiffness, mass, k)


def sphere_spectrum(k, area=1.0):
    """First k Laplace-Beltrami eigenvalues of a sphere of the given area.

    Values are (4*pi/area) * l * (l+1), each repeated 2l+1 times.
    """
    _check_spectrum_args(k, area)
    vals = []
    l = 0
    while len(vals) < k:
        vals.extend([4.0 * np.pi / area * l * (l + 1)] * (2 * l + 1))
        l += 1
    return AnalyticSpectrum(
        eigenvalues=np.asarray(vals[:k], dtype=np.float64),
        surface="sphere",
        area=float(area),
    )


def torus_spectrum(k, area=1.0):
    """First k eigenvalues of the flat square torus of the given area.

    Values are (4*pi^2/area) * (m^2 + n^2) over integer lattice points
    (m, n), with multiplicity equal to the number of lattice
    representations. Enumerated over growing square boxes, keeping only
    fully covered shells.
    """
    _check_spectrum_args(k, area)
    radius = max(2, int(np.ceil(np.sqrt(k / np.pi))) + 2)
    while True:
        grid = np.arange(-radius, radius + 1)
        norms = (grid[:, None] ** 2 + grid[None, :] ** 2).ravel()
        norms = np.sort(norms[norms <= radius * radius])
        if len(norms) >= k:
            return AnalyticSpectrum(
                eigenvalues=4.0 * np.pi**2 / area * norms[:k].astype(np.float64),
                surface="flat_square_torus",
                area=float(area),
            )
        radius += 2


def weyl_estimate(k, area=1.0):
    """Asymptotic eigenvalue estimate (4*pi/area) * k."""
    _check_spectrum_args(k, area)
    return 4.0 * np.pi / area * k


def _check_spectrum_args(k, area):
    if k < 1:
        raise DimensionError("k must be at least 1, got %r" % (k,))
    if area <= 0:
        raise DegenerateSpectrumError("area must be positive, got %r" % (area,))


def rescale_spectra(first, second):
    """Divide both spectra by the larger of their maxima.

    The largest entry over both outputs is exactly 1. Ratios within each
    spectrum are preserved.

    Raises
    ------
    DegenerateSpectrumError
        If both spectra are identically zero (or empty).
    """
    first = np.asarray(first, dtype=np.float64)
    second = np.asarray(second, dtype=np.float64)
    if first.size == 0 or second.size == 0:
        raise DegenerateSpectrumError("cannot rescale an empty spectrum")
    top = max(first.max(), second.max())
    if top <= 0.0:
        raise DegenerateSpectrumError(
            "largest eigenvalue is %g; nothing to rescale against" % top
        )
    return first / top, second / top


def hs_partial_sum(eigenvalues, gamma, mu, k):
    """Partial sum of 1 / |lambda_n**gamma - mu|^2 over the first k entries.

    This is the truncated squared Hilbert-Schmidt norm of the resolvent of
    the gamma-th operator power at the point mu. Over a linearly growing
    spectrum it converges as k grows exactly when gamma > 1/2.

    Raises
    ------
    InvalidResolventPoint
        mu on the nonnegative real axis (the spectrum's essential range),
        or gamma <= 0.
    DimensionError
        k exceeds the number of provided eigenvalues.
    """
    mu = complex(mu)
    if gamma <= 0:
        raise InvalidResolventPoint("gamma must be positive, got %r" % (gamma,))
    if mu.imag == 0.0 and mu.real >= 0.0:
        raise InvalidResolventPoint(
            "mu = %r lies on the nonnegative real axis" % (mu,)
        )
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    if not 0 <= k <= eigenvalues.shape[0]:
        raise DimensionError(
            "k=%d outside [0, %d]" % (k, eigenvalues.shape[0])
        )
    lam = eigenvalues[:k]
    return float(np.sum(1.0 / np.abs(lam**gamma - mu) ** 2))


def save_decomposition(dec, path):
    """Write a SpectralDecomposition to the binary container format."""
    header = _MAGIC + struct.pack("<Iqqd", 1, dec.n, dec.k, dec.source_area)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dec.eigenvalues, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dec.eigenfunctions, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dec.mass, dtype="<f8").tobytes())


def load_decomposition(path):
    """Read a SpectralDecomposition written by save_decomposition.

    Raises
    ------
    ParseError
        Wrong magic, version, or truncated payload.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ParseError("cannot read decomposition %s: %s" % (path, exc)) from exc
    head = struct.calcsize("<Iqqd") + len(_MAGIC)
    if len(blob) < head or blob[:4] != _MAGIC:
        raise ParseError("%s is not a spectral decomposition container" % path)
    version, n, k, area = struct.unpack("<Iqqd", blob[4:head])
    if version != 1:
        raise ParseError("%s: unsupported container version %d" % (path, version))
    need = head + 8 * (k + n * k + n)
    if len(blob) != need:
        raise ParseError(
            "%s: expected %d bytes, found %d" % (path, need, len(blob))
        )
    body = np.frombuffer(blob, dtype="<f8", offset=head)
    eigenvalues = body[:k].copy()
    funcs = body[k : k + n * k].reshape(n, k).copy()
    mass = body[k + n * k :].copy()
    return SpectralDecomposition(
        eigenvalues=eigenvalues,
        eigenfunctions=funcs,
        mass=mass,
        k=int(k),
        source_area=float(area),
    )
