"""Functional-map energy assembly and minimization.

The full objective over map matrices C (second basis x first basis) is

    E(C) = w_desc * |C A1 - A2|^2
         + w_mult * sum_i |C D1_i - D2_i C|^2
         + w_orient * (plugged orientation term, 0 if absent)
         + w_mask  * sum_ij mask_ij C_ij^2

with Frobenius norms throughout. Every term is a convex quadratic in C, so
the minimizer solves a linear system. When only the descriptor and mask
terms are active the system decouples into one small SPD solve per row of
C; otherwise conjugate gradients run on the normal equations with a
matrix-free operator, so the full (k1*k2)^2 system is never materialized.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionError, SolverError
from .masks import resolvent_eigenvalues

__all__ = [
    "FunctionalMap",
    "EnergyProblem",
    "energy_terms",
    "energy_value",
    "energy_gradient",
    "solve",
    "normalize_weights",
    "commutator_energy",
    "sphere_torus_commutator_series",
    "save_functional_map",
    "load_functional_map",
]


@dataclass
class FunctionalMap:
    """A correspondence matrix acting on reduced-basis coefficients.

    matrix : (k2, k1), maps first-shape coefficients to second-shape ones
    basis_sizes : (k1, k2)
    meta : solver / refinement diagnostics, free-form
    """

    matrix: np.ndarray
    basis_sizes: tuple = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise DimensionError("map matrix must be 2-D, got %r" % (m.shape,))
        if not np.all(np.isfinite(m)):
            raise ValueError("map matrix entries must be finite")
        self.matrix = m
        derived = (m.shape[1], m.shape[0])
        if self.basis_sizes is None:
            self.basis_sizes = derived
        else:
            self.basis_sizes = (int(self.basis_sizes[0]), int(self.basis_sizes[1]))
            if self.basis_sizes != derived:
                raise DimensionError(
                    "basis_sizes %r inconsistent with matrix shape %r"
                    % (self.basis_sizes, m.shape)
                )

    @property
    def shape(self):
        return self.matrix.shape


def _as_matrix(c):
    m = getattr(c, "matrix", c)
    return np.asarray(m, dtype=np.float64) if not np.iscomplexobj(m) else np.asarray(m)


@dataclass
class EnergyProblem:
    """Data of one functional-map fitting problem.

    first_coeffs : (k1, d) descriptor coefficients on the first shape
    second_coeffs : (k2, d) matching coefficients on the second shape
    mult_pairs : list of (D1, D2) reduced multiplication operators,
        D1 (k1, k1) and D2 (k2, k2)
    mask : Mask with weights shaped (k2, k1), or None when w_mask = 0
    weights : (w_desc, w_mult, w_orient, w_mask), all nonnegative
    orient_term : optional plugin with value(C) -> float and
        gradient(C) -> (k2, k1); must be a convex quadratic form
    """

    first_coeffs: np.ndarray
    second_coeffs: np.ndarray
    mult_pairs: list = field(default_factory=list)
    mask: object = None
    weights: tuple = (1.0, 1.0, 0.0, 1.0)
    orient_term: object = None

    def __post_init__(self):
        a1 = np.asarray(self.first_coeffs, dtype=np.float64)
        a2 = np.asarray(self.second_coeffs, dtype=np.float64)
        if a1.ndim != 2 or a2.ndim != 2:
            raise DimensionError("coefficient matrices must be 2-D")
        if a1.shape[1] != a2.shape[1]:
            raise DimensionError(
                "descriptor counts differ: %d vs %d" % (a1.shape[1], a2.shape[1])
            )
        if a1.shape[0] < 1 or a2.shape[0] < 1:
            raise DimensionError("basis sizes must be at least 1")
        self.first_coeffs, self.second_coeffs = a1, a2
        k1, k2 = a1.shape[0], a2.shape[0]

        w = tuple(float(x) for x in self.weights)
        if len(w) != 4:
            raise ConfigError("weights must have 4 entries, got %d" % len(w))
        if any(x < 0 for x in w):
            raise ConfigError("weights must be nonnegative, got %r" % (w,))
        self.weights = w

        pairs = list(self.mult_pairs)
        if pairs:
            d1s = np.stack([np.asarray(p[0], dtype=np.float64) for p in pairs])
            d2s = np.stack([np.asarray(p[1], dtype=np.float64) for p in pairs])
            if d1s.shape[1:] != (k1, k1) or d2s.shape[1:] != (k2, k2):
                raise DimensionError(
                    "multiplication operators must be (%d, %d) and (%d, %d) square"
                    % (k1, k1, k2, k2)
                )
        else:
            d1s = np.zeros((0, k1, k1))
            d2s = np.zeros((0, k2, k2))
        self._d1_stack, self._d2_stack = d1s, d2s

        if self.mask is not None:
            mw = np.asarray(self.mask.weights, dtype=np.float64)
            if mw.shape != (k2, k1):
                raise DimensionError(
                    "mask shaped %r, expected (%d, %d)" % (mw.shape, k2, k1)
                )
            self._mask_weights = mw
        elif w[3] > 0:
            raise ConfigError("w_mask > 0 requires a mask")
        else:
            self._mask_weights = None

        if w[2] > 0 and self.orient_term is None:
            raise ConfigError("w_orient > 0 requires an orient_term plugin")
        if w[0] * a1.shape[1] == 0 and w[3] == 0:
            raise ConfigError(
                "need w_desc > 0 with descriptors, or w_mask > 0; "
                "the problem is rank-deficient otherwise"
            )

    @property
    def basis_sizes(self):
        return (self.first_coeffs.shape[0], self.second_coeffs.shape[0])


def _check_c(problem, c):
    m = _as_matrix(c)
    k1, k2 = problem.basis_sizes
    if m.shape != (k2, k1):
        raise DimensionError("map shaped %r, expected (%d, %d)" % (m.shape, k2, k1))
    return m


def energy_terms(problem, c):
    """Unweighted term values (desc, mult, orient, mask) at C."""
    m = _check_c(problem, c)
    desc = np.sum((m @ problem.first_coeffs - problem.second_coeffs) ** 2)
    if problem._d1_stack.shape[0]:
        resid = m @ problem._d1_stack - problem._d2_stack @ m
        mult = np.sum(resid**2)
    else:
        mult = 0.0
    orient = float(problem.orient_term.value(m)) if problem.orient_term else 0.0
    mask = np.sum(problem._mask_weights * m**2) if problem._mask_weights is not None else 0.0
    return float(desc), float(mult), orient, float(mask)


def energy_value(problem, c):
    """Total weighted energy at C (nonnegative)."""
    terms = energy_terms(problem, c)
    return float(sum(w * t for w, t in zip(problem.weights, terms)))


def energy_gradient(problem, c):
    """Gradient of the total energy with respect to C, shape (k2, k1)."""
    m = _check_c(problem, c)
    w1, w2, w3, w4 = problem.weights
    grad = np.zeros_like(m)
    if w1:
        grad += 2.0 * w1 * ((m @ problem.first_coeffs - problem.second_coeffs)
                            @ problem.first_coeffs.T)
    if w2 and problem._d1_stack.shape[0]:
        resid = m @ problem._d1_stack - problem._d2_stack @ m
        d1t = np.swapaxes(problem._d1_stack, 1, 2)
        d2t = np.swapaxes(problem._d2_stack, 1, 2)
        grad += 2.0 * w2 * (resid @ d1t - d2t @ resid).sum(axis=0)
    if w3 and problem.orient_term is not None:
        grad += w3 * np.asarray(problem.orient_term.gradient(m), dtype=np.float64)
    if w4 and problem._mask_weights is not None:
        grad += 2.0 * w4 * problem._mask_weights * m
    return grad


def _decoupled_solve(a1, a2, w_desc, w_mask, mask_weights):
    """Row-wise minimizer when only descriptor and mask terms are active.

    Row i solves (w_desc A1 A1^T + w_mask diag(mask row i)) c_i
    = w_desc A1 A2[i]. Without a mask the problem is plain least squares
    and the minimum-norm solution is taken directly (the descriptor Gram
    is often numerically rank-deficient); with a mask, singular rows fall
    back to minimum-norm.
    """
    k1, k2 = a1.shape[0], a2.shape[0]
    if w_desc == 0.0:
        # pure quadratic penalty: zero minimizes every masked entry and
        # minimum-norm settles the unmasked ones
        return np.zeros((k2, k1))
    if not w_mask or mask_weights is None:
        x, *_ = np.linalg.lstsq(a1.T, a2.T, rcond=None)
        return x.T
    gram = w_desc * (a1 @ a1.T)
    rhs = w_desc * (a1 @ a2.T)
    diag_idx = np.arange(k1)
    systems = np.broadcast_to(gram, (k2, k1, k1)).copy()
    systems[:, diag_idx, diag_idx] += w_mask * mask_weights
    # row systems are often numerically singular (descriptor Grams are
    # rank-deficient, mask diagonals vanish on identical spectra); a plain
    # solve then returns finite garbage with small backward error, so take
    # the rank-revealing minimum-norm solution per row
    rows = np.empty((k2, k1))
    for i in range(k2):
        rows[i] = np.linalg.lstsq(systems[i], rhs[:, i], rcond=None)[0]
    return rows


_CG_MAX_ITER = 5000
_CG_REL_TOL = 1e-8


def _hessian_diagonal(problem):
    """Diagonal of the energy Hessian.

    Per entry (i, j): 2 w1 (A1 A1^T)_jj
    + 2 w2 sum_i [(D1_i D1_i^T)_jj + (D2_i^T D2_i)_ii - 2 D1_i[j,j] D2_i[i,i]]
    + 2 w4 mask_ij. Each mult contribution is a sum of squares, so the
    whole diagonal is nonnegative. An orient plugin exposes no structure
    and contributes nothing here.
    """
    w1, w2, w3, w4 = problem.weights
    k1, k2 = problem.basis_sizes
    diag = np.zeros((k2, k1))
    if w1 and problem.first_coeffs.shape[1]:
        a1 = problem.first_coeffs
        diag += 2.0 * w1 * np.einsum("jb,jb->j", a1, a1)[None, :]
    if w2 and problem._d1_stack.shape[0]:
        d1, d2 = problem._d1_stack, problem._d2_stack
        row = np.einsum("mjb,mjb->j", d1, d1)
        col = np.einsum("mai,mai->i", d2, d2)
        cross = np.einsum("mi,mj->ij", d2.diagonal(axis1=1, axis2=2),
                          d1.diagonal(axis1=1, axis2=2))
        diag += 2.0 * w2 * (row[None, :] + col[:, None] - 2.0 * cross)
    if w4 and problem._mask_weights is not None:
        diag += 2.0 * w4 * problem._mask_weights
    return diag


def _row_block_preconditioner(problem):
    """Cholesky factors of per-row Hessian blocks, for preconditioned CG.

    The descriptor and mask terms decouple over rows of C; their row
    blocks are w1 A1 A1^T + diag contributions, captured exactly. The
    mult term couples rows and only its diagonal enters. Blocks are
    damped by 1e-8 of the mean diagonal so the factorization exists even
    when descriptor Grams are rank-deficient.
    """
    w1 = problem.weights[0]
    k1, k2 = problem.basis_sizes
    blocks = np.zeros((k2, k1, k1))
    diag = _hessian_diagonal(problem)
    if w1 and problem.first_coeffs.shape[1]:
        a1 = problem.first_coeffs
        blocks += 2.0 * w1 * (a1 @ a1.T)
        diag = diag - 2.0 * w1 * np.einsum("jb,jb->j", a1, a1)[None, :]
    idx = np.arange(k1)
    blocks[:, idx, idx] += diag
    scale = float(np.trace(blocks.sum(axis=0))) / max(k1 * k2, 1)
    blocks[:, idx, idx] += 1e-8 * max(scale, 1e-300)
    return [scipy.linalg.cho_factor(b, check_finite=False) for b in blocks]


def _apply_preconditioner(factors, r):
    return np.stack(
        [scipy.linalg.cho_solve(f, row, check_finite=False)
         for f, row in zip(factors, r)]
    )


def _cg_solve(problem, init, trace=None):
    """Preconditioned conjugate gradients on the normal equations.

    The Hessian is applied matrix-free as gradient(X) - gradient(0); the
    CG residual equals the energy gradient at the current iterate, so the
    stopping rule is exactly the solve() contract. A row-block
    preconditioner (the decoupled part of the Hessian) handles the wildly
    unequal term scales that relative weighting produces. The residual
    norm oscillates on ill-conditioned problems while the energy still
    decreases, so the best iterate is tracked and returned; directions
    whose curvature falls below rounding noise end the iteration (the
    numerical null space is reached).
    """
    k1, k2 = problem.basis_sizes
    g0 = energy_gradient(problem, np.zeros((k2, k1)))
    tol = _CG_REL_TOL * (1.0 + np.linalg.norm(g0))
    factors = _row_block_preconditioner(problem)

    x = init.copy()
    r = -energy_gradient(problem, x)
    z = _apply_preconditioner(factors, r)
    p = z.copy()
    rz = float(np.vdot(r, z))
    rs = float(np.vdot(r, r))
    best_x, best_rs = x.copy(), rs
    curv_max = 0.0
    if trace is not None:
        trace.append(energy_value(problem, x))
    for it in range(_CG_MAX_ITER):
        if np.sqrt(rs) <= tol:
            return x, it, np.sqrt(rs)
        hp = energy_gradient(problem, p) - g0
        php = float(np.vdot(p, hp))
        pp = float(np.vdot(p, p))
        curv = php / pp if pp > 0 else 0.0
        if php <= 0.0 or curv <= 1e-14 * curv_max:
            break
        curv_max = max(curv_max, curv)
        alpha = rz / php
        x += alpha * p
        r -= alpha * hp
        rs = float(np.vdot(r, r))
        if trace is not None:
            trace.append(energy_value(problem, x))
        if rs < best_rs:
            best_x, best_rs = x.copy(), rs
        z = _apply_preconditioner(factors, r)
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    residual = float(np.sqrt(best_rs))
    if residual <= tol:
        return best_x, _CG_MAX_ITER, residual
    raise SolverError(
        "conjugate gradients stalled at gradient norm %.3e (tolerance %.3e)"
        % (residual, tol),
        residual=residual,
    )


def solve(problem, method="auto", init=None, trace=None):
    """Minimize the energy; returns a FunctionalMap.

    method : 'auto' picks the row-decoupled direct solve when only the
        descriptor and mask terms are active, conjugate gradients
        otherwise; 'direct' and 'cg' force a path.
    trace : optional list; the CG path appends its energy value per
        iteration (first entry is the energy at the start point).

    Raises
    ------
    SolverError
        Iteration cap reached before the gradient tolerance.
    ConfigError
        'direct' forced while a coupling term is active.
    """
    w1, w2, w3, w4 = problem.weights
    coupled = (w2 > 0 and problem._d1_stack.shape[0] > 0) or w3 > 0
    if method == "auto":
        method = "cg" if coupled else "direct"
    elif method == "direct" and coupled:
        raise ConfigError("direct solve cannot handle coupling terms; use 'cg'")
    elif method not in ("direct", "cg"):
        raise ConfigError("unknown method %r" % (method,))

    base = _decoupled_solve(
        problem.first_coeffs, problem.second_coeffs, w1, w4, problem._mask_weights
    )
    if method == "cg":
        if init is not None:
            start = _check_c(problem, init).copy()
        else:
            start = _pick_start(problem, base)
        x, iters, residual = _cg_solve(problem, start, trace=trace)
        meta = {"method": "cg", "iterations": iters, "gradient_norm": float(residual)}
        return FunctionalMap(matrix=x, meta=meta)

    cand = _pick_start(problem, base)
    residual = np.linalg.norm(energy_gradient(problem, cand))
    g0 = energy_gradient(problem, np.zeros_like(cand))
    if residual > _CG_REL_TOL * (1.0 + np.linalg.norm(g0)):
        # ill-conditioned direct solve; polish with CG from the direct result
        x, iters, residual = _cg_solve(problem, cand, trace=trace)
        meta = {"method": "direct+cg", "iterations": iters,
                "gradient_norm": float(residual)}
        return FunctionalMap(matrix=x, meta=meta)
    meta = {"method": "direct", "iterations": 0, "gradient_norm": float(residual)}
    return FunctionalMap(matrix=cand, meta=meta)


def _pick_start(problem, base):
    """Choose the solver start between the decoupled direct solution and
    the spectrum-aligned seed (truncated identity).

    On degenerate problems (symmetric shapes, repeated eigenvalues) whole
    blocks of C carry no energy information at all; CG leaves them at the
    start value, so the start acts as the tie-break on the minimizer
    manifold. The aligned seed is the structural prior the mask itself
    encodes (low penalty near the diagonal), so it wins ties up to
    floating-point dust. On well-posed problems both starts reach the
    unique minimizer and the lower-energy one just converges faster.
    """
    k1, k2 = problem.basis_sizes
    aligned = np.eye(k2, k1)
    e_base = energy_value(problem, base)
    e_aligned = energy_value(problem, aligned)
    slack = 1e-12 * (1.0 + energy_value(problem, np.zeros((k2, k1))))
    return base if e_base < e_aligned - slack else aligned


_TERM_FLOOR_REL = 1e-12


def normalize_weights(problem, base_weights):
    """Rebalance weights so every active term contributes comparably.

    Solves the descriptor-only problem for an initial map C_ini and
    returns base_i / term_i(C_ini). Terms that vanish at C_ini (below a
    1e-12 relative floor, to keep floating-point dust from exploding the
    ratio) pass their base weight through unchanged.
    """
    base = tuple(float(x) for x in base_weights)
    if len(base) != 4:
        raise ConfigError("base_weights must have 4 entries")
    if any(x < 0 for x in base):
        raise ConfigError("base_weights must be nonnegative")
    c_ini = _decoupled_solve(
        problem.first_coeffs, problem.second_coeffs, 1.0, 0.0, None
    )
    terms = energy_terms(problem, c_ini)
    # the descriptor energy at C = 0 anchors "essentially satisfied": on a
    # perfectly matched pair every term at C_ini is floating-point dust and
    # dividing by it would wreck the solve's conditioning
    scale = max(max(terms), float(np.sum(problem.second_coeffs**2)))
    floor = _TERM_FLOOR_REL * scale
    return tuple(
        b / t if t > floor and t > 0.0 else b for b, t in zip(base, terms)
    )


def commutator_energy(c, op1, op2):
    """Squared Frobenius norm of C diag(op1) - diag(op2) C.

    Diagonal operator values may be complex; squared moduli are summed.
    """
    m = _as_matrix(c)
    if m.ndim != 2:
        raise DimensionError("map matrix must be 2-D")
    op1 = np.atleast_1d(np.asarray(op1))
    op2 = np.atleast_1d(np.asarray(op2))
    if op1.ndim != 1 or op2.ndim != 1:
        raise DimensionError("diagonal operator values must be 1-D")
    if not (np.all(np.isfinite(op1.real)) and np.all(np.isfinite(op1.imag))
            and np.all(np.isfinite(op2.real)) and np.all(np.isfinite(op2.imag))):
        raise ValueError("operator values must be finite")
    k2, k1 = m.shape
    if op1.shape[0] != k1 or op2.shape[0] != k2:
        raise DimensionError(
            "operators sized %d, %d do not fit a (%d, %d) map"
            % (op1.shape[0], op2.shape[0], k2, k1)
        )
    resid = m * op1[None, :] - op2[:, None] * m
    return float(np.sum(np.abs(resid) ** 2))


def sphere_torus_commutator_series(k_max=100, gamma=1.0, a=0.0, b=1.0, area=1.0):
    """Running commutator energies between the analytic sphere and flat-torus
    spectra under the identity map, truncated at 1..k_max basis functions.

    Uses the k_max lowest nonzero eigenvalues of each surface (the shared
    zero mode commutes exactly and carries no information). The standard
    series sums (lam_torus_j - lam_sphere_j)^2 and grows without bound; the
    resolvent series rescales both spectra by their common maximum and
    evaluates the resolvent at the correspondingly rescaled point, so its
    value converges as k_max grows.

    Returns a dict with keys 'truncation' (1..k_max), 'standard', and
    'resolvent' (running sums, aligned with 'truncation').
    """
    from .spectral import sphere_spectrum, torus_spectrum

    if k_max < 1:
        raise DimensionError("k_max must be at least 1")
    lam_s = sphere_spectrum(k_max + 1, area).eigenvalues[1:]
    lam_t = torus_spectrum(k_max + 1, area).eigenvalues[1:]
    standard = np.cumsum((lam_t - lam_s) ** 2)
    scale = max(lam_s[-1], lam_t[-1])
    factor = scale**gamma
    r_s = resolvent_eigenvalues(lam_s / scale, gamma, a / factor, b / factor)
    r_t = resolvent_eigenvalues(lam_t / scale, gamma, a / factor, b / factor)
    resolvent = np.cumsum(np.abs(r_t - r_s) ** 2)
    return {
        "truncation": np.arange(1, k_max + 1),
        "standard": standard,
        "resolvent": resolvent,
    }


def save_functional_map(fmap, path):
    """Write the map matrix as tab-delimited text, one row per line."""
    np.savetxt(path, _as_matrix(fmap), fmt="%.17g", delimiter="\t")


def load_functional_map(path):
    """Read a tab-delimited map matrix written by save_functional_map."""
    matrix = np.loadtxt(path, delimiter="\t", ndmin=2)
    return FunctionalMap(matrix=matrix)
