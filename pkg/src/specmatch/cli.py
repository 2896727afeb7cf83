"""Batch command-line front end for the matching pipeline.

One subcommand per experiment family: ``spectrum`` (eigensolve and cache),
``match`` (full pair pipeline), ``refine`` (ICP on an existing map),
``eval`` (error reports), ``mask`` (penalty-mask rendering), ``sweep``
(parameter sweeps), ``demo-sphere-torus`` (analytic divergence /
convergence tables), and ``correlate`` (mask-penalty vs error experiment).

An INI config file (section name = subcommand, keys = flag names) supplies
defaults; command-line flags win. Numeric text output carries 17
significant digits so diffs are meaningful. Exit codes: 0 success, 2
configuration error, 3 compute error, 4 I/O error; failures print a JSON
record {"stage", "cause", "message"} to stderr.

Spectral decompositions are cached under --cache-dir (or the
SPECMATCH_CACHE environment variable), keyed by the SHA-256 of the mesh
file bytes and the basis size, and written atomically; cache hits skip
the eigensolve.
"""

import argparse
import configparser
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .descriptors import (import_descriptors, landmark_wks, mult_operator,
                          project, subsample, wks)
from .errors import (ConfigError, ConvergenceError, DegenerateSpectrumError,
                     DimensionError, NumericalError, ParseError, SolverError,
                     SpecmatchError, ValidationError)
from .eval import GeodesicProvider, correlation_experiment, direct_error, \
    per_vertex_error
from .fmap import (EnergyProblem, energy_terms, load_functional_map,
                   normalize_weights, save_functional_map, solve,
                   sphere_torus_commutator_series)
from .masks import (heat_mask, mask_penalty, resolvent_mask, slanted_mask,
                    standard_mask)
from .mesh import load_mesh
from .p2p import (PointwiseMap, fmap_to_pointwise, icp_refine,
                  load_pointwise_map, save_pointwise_map)
from .render import write_line_plot, write_pgm, write_scatter_plot
from .spectral import (decompose_mesh, load_decomposition, rescale_spectra,
                       save_decomposition, sphere_spectrum, torus_spectrum,
                       weyl_estimate)

__all__ = ["main"]

_STAGE = ["config"]

_IO_ERRORS = (ParseError, ValidationError, OSError)
_COMPUTE_ERRORS = (SolverError, ConvergenceError, NumericalError,
                   DegenerateSpectrumError)


def _stage(name):
    _STAGE[0] = name


def _g(x):
    return "%.17g" % x


def _parse_bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError("expected a boolean, got %r" % (text,))


def _parse_float_list(text):
    text = str(text).strip()
    if not text:
        return []
    return [float(tok) for tok in text.split(",")]


def _parse_weights(text):
    vals = _parse_float_list(text)
    if len(vals) != 4:
        raise ConfigError("weights need 4 comma-separated values, got %r" % text)
    if any(v < 0 for v in vals):
        raise ConfigError("weights must be nonnegative: %r" % text)
    return tuple(vals)


def _parse_name_list(text):
    return [tok.strip() for tok in str(text).split(",") if tok.strip()]


# Option tables: (name, converter, default, required, help). Flags default
# to None at parse time; merge order is table default < config file < flag.

_COMMON = [
    ("out-dir", str, ".", False, "output directory"),
    ("cache-dir", str, None, False,
     "spectral cache directory (default: $SPECMATCH_CACHE)"),
]

_DESCRIPTOR_OPTS = [
    ("descriptor", str, "wks", False, "descriptor kind: wks|landmark|file"),
    ("n-energies", int, 100, False, "WKS energy count"),
    ("sigma-scale", float, 1.0, False, "WKS bandwidth multiplier"),
    ("descriptor-count", int, None, False,
     "subsample descriptors to this many columns"),
    ("landmarks", str, None, False, "landmark index file (one per line)"),
    ("landmarks-one-based", _parse_bool, False, False,
     "landmark file uses 1-based indices"),
    ("descriptor-source-file", str, None, False,
     "imported descriptor table for the source shape"),
    ("descriptor-target-file", str, None, False,
     "imported descriptor table for the target shape"),
    ("mult-count", int, None, False,
     "multiplication-operator count (default: all descriptor columns)"),
]

_MASK_OPTS = [
    ("mask", str, "resolvent", False,
     "mask kind: resolvent|standard|slanted|heat|none"),
    ("gamma", float, 0.5, False, "resolvent spectral power"),
    ("w", float, 0.5, False, "resolvent real/imaginary balance in [0, 1]"),
    ("a", float, 0.0, False, "resolvent point, real part"),
    ("b", float, 1.0, False, "resolvent point, imaginary part"),
    ("t", float, 5.0, False, "heat-mask diffusion time"),
    ("eta", float, 0.03, False, "slanted-mask decay rate"),
    ("estimated-rank", int, None, False,
     "slanted-mask rank estimate (default: k1)"),
]

_SOLVE_OPTS = [
    ("weights", _parse_weights, (1.0, 1.0, 0.0, 1.0), False,
     "base term weights: desc,mult,orient,mask"),
    ("relative-weighting", _parse_bool, True, False,
     "rebalance weights by term values at the initial map"),
]

_PAIR_OPTS = [
    ("source", str, None, True, "first (source) mesh path"),
    ("target", str, None, True, "second (target) mesh path"),
    ("k1", int, 50, False, "source basis size"),
    ("k2", int, 50, False, "target basis size"),
]

_GT_OPTS = [
    ("gt", str, None, False,
     "ground-truth pointwise map file (default: identity when source == target)"),
    ("gt-symmetric", str, None, False, "symmetric ground-truth map file"),
    ("gt-one-based", _parse_bool, False, False,
     "ground-truth files use 1-based indices"),
]

_OPTIONS = {
    "spectrum": [
        ("mesh", str, None, True, "mesh path (OFF or OBJ)"),
        ("k", int, 50, False, "basis size"),
    ] + _COMMON,
    "match": _PAIR_OPTS + _DESCRIPTOR_OPTS + _MASK_OPTS + _SOLVE_OPTS + [
        ("refine", str, "none", False, "refinement: none|icp"),
        ("icp-iterations", int, 10, False, "ICP round cap"),
        ("seed", int, 0, False, "run seed (recorded; pipeline is deterministic)"),
        ("jobs", int, 1, False, "worker threads"),
    ] + _GT_OPTS + _COMMON,
    "refine": [
        ("fmap", str, None, True, "functional-map text file"),
        ("source", str, None, True, "first (source) mesh path"),
        ("target", str, None, True, "second (target) mesh path"),
        ("iterations", int, 10, False, "ICP round cap"),
    ] + _GT_OPTS + _COMMON,
    "eval": [
        ("mesh", str, None, True, "first (source) mesh path"),
        ("map", str, None, True, "pointwise map file to evaluate"),
        ("gt", str, None, True, "direct ground-truth map file"),
        ("gt-symmetric", str, None, False, "symmetric ground-truth map file"),
        ("one-based", _parse_bool, False, False,
         "map and ground-truth files use 1-based indices"),
    ] + _COMMON,
    "mask": [
        ("first", str, None, True,
         "source spectrum: mesh path, .smsd file, or sphere:K | torus:K | weyl:K"),
        ("second", str, None, True, "target spectrum (same forms)"),
        ("k", int, 50, False, "basis size for mesh/decomposition sources"),
        ("area", float, 1.0, False, "surface area for analytic sources"),
    ] + _MASK_OPTS + _COMMON,
    "sweep": _PAIR_OPTS + _DESCRIPTOR_OPTS + _MASK_OPTS + _SOLVE_OPTS + [
        ("param", str, None, True, "swept parameter: gamma|w|t|eta|alpha4|k"),
        ("values", str, None, True, "comma-separated values (may be empty)"),
        ("jobs", int, 1, False, "parallel sweep points"),
    ] + _GT_OPTS + _COMMON,
    "demo-sphere-torus": [
        ("k-max", int, 100, False, "largest truncation (>= 2)"),
    ] + _COMMON,
    "correlate": [
        ("source", str, None, True, "first (source) mesh path"),
        ("target", str, None, False, "second mesh path (default: source)"),
        ("k", int, 50, False, "basis size"),
        ("n-samples", int, 200, False, "sampled maps"),
        ("noise-levels", str, "0.05,0.1,0.2,0.4,0.6,0.8", False,
         "comma-separated rewiring fractions, cycled across samples"),
        ("masks", str, "resolvent,standard", False,
         "comma-separated mask kinds to score"),
        ("seed", int, 0, False, "experiment seed"),
    ] + _MASK_OPTS + _GT_OPTS + _COMMON,
}


def _dest(name):
    return name.replace("-", "_")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="specmatch",
        description="Spectral shape correspondence with commutativity masks.",
    )
    parser.add_argument("--config", help="INI config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, options in _OPTIONS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", help="INI config file; flags override it")
        for name, conv, _default, _required, help_text in options:
            p.add_argument("--" + name, dest=_dest(name), type=conv,
                           default=None, help=help_text)
    return parser


def _merge_config(args):
    """Fill unset flags from the config file section, then table defaults."""
    table = _OPTIONS[args.command]
    from_file = {}
    if args.config:
        ini = configparser.ConfigParser()
        read = ini.read(args.config)
        if not read:
            raise ConfigError("config file %r not readable" % args.config)
        if ini.has_section(args.command):
            known = {_dest(name): conv for name, conv, _d, _r, _h in table}
            for key, raw in ini.items(args.command):
                dest = _dest(key)
                if dest not in known:
                    raise ConfigError(
                        "unknown config key %r in section [%s]"
                        % (key, args.command)
                    )
                from_file[dest] = known[dest](raw)
    for name, _conv, default, required, _help in table:
        dest = _dest(name)
        if getattr(args, dest, None) is None:
            setattr(args, dest, from_file.get(dest, default))
        if required and getattr(args, dest) is None:
            raise ConfigError("--%s is required for %s" % (name, args.command))
    return args


def _atomic(path, writer):
    tmp = "%s.tmp-%d" % (path, os.getpid())
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _atomic_text(path, text):
    def writer(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)
    _atomic(path, writer)


def _write_matrix(path, matrix):
    _atomic(path, lambda tmp: np.savetxt(tmp, matrix, fmt="%.17g",
                                         delimiter="\t"))


def _out(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _cache_dir(args):
    return args.cache_dir or os.environ.get("SPECMATCH_CACHE")


def _decompose_cached(mesh_path, k, cache_dir):
    """Load a mesh and its decomposition, consulting the cache when set."""
    _stage("mesh")
    mesh = load_mesh(mesh_path)
    _stage("spectrum")
    if not cache_dir:
        return mesh, decompose_mesh(mesh, k)
    os.makedirs(cache_dir, exist_ok=True)
    with open(mesh_path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    path = os.path.join(cache_dir, "%s-k%d.smsd" % (digest, k))
    if os.path.exists(path):
        return mesh, load_decomposition(path)
    spec = decompose_mesh(mesh, k)
    _atomic(path, lambda tmp: save_decomposition(spec, tmp))
    return mesh, spec


def _load_indices(path, one_based):
    values = np.loadtxt(path, dtype=np.int64, ndmin=1)
    return values - 1 if one_based else values


def _identity_gt(args, n1, n2):
    """Ground truth from --gt, or the identity for a self pair."""
    if args.gt:
        return load_pointwise_map(args.gt, n_source=n1,
                                  one_based=args.gt_one_based)
    if args.source == args.target:
        return PointwiseMap(targets=np.arange(n2), n_source=n1)
    return None


def _symmetric_gt(args, n1):
    if getattr(args, "gt_symmetric", None):
        return load_pointwise_map(args.gt_symmetric, n_source=n1,
                                  one_based=args.gt_one_based)
    return None


# ---------------------------------------------------------------- pipeline


def _build_descriptor_pair(spec1, spec2, cfg):
    _stage("descriptors")
    kind = cfg["descriptor"]
    if kind == "wks":
        d1 = wks(spec1, cfg["n_energies"], cfg["sigma_scale"])
        d2 = wks(spec2, cfg["n_energies"], cfg["sigma_scale"])
    elif kind == "landmark":
        if not cfg["landmarks"]:
            raise ConfigError("--landmarks is required for landmark descriptors")
        marks = _load_indices(cfg["landmarks"], cfg["landmarks_one_based"])
        d1 = landmark_wks(spec1, marks, cfg["n_energies"], cfg["sigma_scale"])
        d2 = landmark_wks(spec2, marks, cfg["n_energies"], cfg["sigma_scale"])
    elif kind == "file":
        if not (cfg["descriptor_source_file"] and cfg["descriptor_target_file"]):
            raise ConfigError(
                "descriptor files are required for --descriptor file"
            )
        d1 = import_descriptors(cfg["descriptor_source_file"])
        d2 = import_descriptors(cfg["descriptor_target_file"])
        if d1.d != d2.d:
            raise ConfigError(
                "imported descriptor counts differ: %d vs %d" % (d1.d, d2.d)
            )
    else:
        raise ConfigError("unknown descriptor kind %r" % kind)
    if cfg["descriptor_count"]:
        d1 = subsample(d1, cfg["descriptor_count"])
        d2 = subsample(d2, cfg["descriptor_count"])
    return d1, d2


def _build_mask(lam1, lam2, cfg):
    _stage("mask")
    kind = cfg["mask"]
    if kind == "none":
        return None
    if kind == "standard":
        return standard_mask(lam1, lam2)
    if kind == "slanted":
        return slanted_mask(len(lam1), len(lam2),
                            estimated_rank=cfg["estimated_rank"],
                            eta=cfg["eta"])
    if kind == "heat":
        return heat_mask(lam1, lam2, t=cfg["t"])
    if kind == "resolvent":
        r1, r2 = rescale_spectra(lam1, lam2)
        return resolvent_mask(r1, r2, gamma=cfg["gamma"], w=cfg["w"],
                              a=cfg["a"], b=cfg["b"])
    raise ConfigError("unknown mask kind %r" % kind)


def _pipeline_config(args):
    cfg = {key: getattr(args, key) for key in (
        "k1", "k2", "descriptor", "n_energies", "sigma_scale",
        "descriptor_count", "landmarks", "landmarks_one_based",
        "descriptor_source_file", "descriptor_target_file", "mult_count",
        "mask", "gamma", "w", "a", "b", "t", "eta", "estimated_rank",
        "weights", "relative_weighting")}
    return cfg


def _run_pipeline(spec1, spec2, desc1, desc2, cfg):
    """Mask + energy assembly + solve for one parameter setting."""
    k1, k2 = cfg["k1"], cfg["k2"]
    if not 1 <= k1 <= spec1.k or not 1 <= k2 <= spec2.k:
        raise ConfigError(
            "basis sizes (%d, %d) exceed decompositions (%d, %d)"
            % (k1, k2, spec1.k, spec2.k)
        )
    mask = _build_mask(spec1.eigenvalues[:k1], spec2.eigenvalues[:k2], cfg)
    _stage("solve")
    w_desc, w_mult, w_orient, w_mask = cfg["weights"]
    if w_orient > 0:
        raise ConfigError("no orientation plugin is registered in the CLI; "
                          "set the third weight to 0")
    if mask is None:
        w_mask = 0.0
    a1 = project(spec1, desc1).matrix[:k1]
    a2 = project(spec2, desc2).matrix[:k2]
    mult_pairs = []
    if w_mult > 0:
        source = desc1
        target = desc2
        if cfg["mult_count"]:
            source = subsample(desc1, cfg["mult_count"])
            target = subsample(desc2, cfg["mult_count"])
        for col in range(source.d):
            d1 = mult_operator(spec1, source.values[:, col])[:k1, :k1]
            d2 = mult_operator(spec2, target.values[:, col])[:k2, :k2]
            mult_pairs.append((d1, d2))
    problem = EnergyProblem(
        first_coeffs=a1, second_coeffs=a2, mult_pairs=mult_pairs,
        mask=mask, weights=(w_desc, w_mult, 0.0, w_mask),
    )
    if cfg["relative_weighting"]:
        problem = replace(problem,
                          weights=normalize_weights(problem, problem.weights))
    return solve(problem), mask, problem


def _report_lines(fmap, problem):
    terms = energy_terms(problem, fmap)
    names = ("desc", "mult", "orient", "mask")
    lines = ["k1=%d" % problem.basis_sizes[0],
             "k2=%d" % problem.basis_sizes[1],
             "descriptors=%d" % problem.first_coeffs.shape[1]]
    lines += ["weight_%s=%s" % (n, _g(w))
              for n, w in zip(names, problem.weights)]
    lines += ["energy_%s=%s" % (n, _g(t)) for n, t in zip(names, terms)]
    for key in ("method", "iterations", "gradient_norm"):
        if key in fmap.meta:
            value = fmap.meta[key]
            lines.append("solver_%s=%s" % (
                key, _g(value) if isinstance(value, float) else value))
    return lines


# ------------------------------------------------------------- subcommands


def cmd_spectrum(args):
    cache = _cache_dir(args)
    mesh, spec = _decompose_cached(args.mesh, args.k, cache)
    _stage("output")
    stem = os.path.splitext(os.path.basename(args.mesh))[0]
    container = _out(args, "%s-k%d.smsd" % (stem, args.k))
    _atomic(container, lambda tmp: save_decomposition(spec, tmp))
    _write_matrix(_out(args, "%s-k%d-eigenvalues.txt" % (stem, args.k)),
                  spec.eigenvalues)
    print("decomposed %s: n=%d k=%d -> %s" % (args.mesh, spec.n, spec.k,
                                              container))


def cmd_match(args):
    cache = _cache_dir(args)
    mesh1, spec1 = _decompose_cached(args.source, args.k1, cache)
    if args.target == args.source and args.k2 == args.k1:
        mesh2, spec2 = mesh1, spec1
    else:
        mesh2, spec2 = _decompose_cached(args.target, args.k2, cache)
    cfg = _pipeline_config(args)
    desc1, desc2 = _build_descriptor_pair(spec1, spec2, cfg)
    fmap, mask, problem = _run_pipeline(spec1, spec2, desc1, desc2, cfg)
    _stage("refine")
    pmap = fmap_to_pointwise(fmap, spec1, spec2)
    report = _report_lines(fmap, problem)
    refined = refined_pmap = None
    if args.refine == "icp":
        refined, refined_pmap = icp_refine(fmap, spec1, spec2,
                                           iterations=args.icp_iterations)
        report.append("icp_rounds=%d" % refined.meta["icp_rounds"])
        report.append("icp_converged=%s" % refined.meta["icp_converged"])
    elif args.refine != "none":
        raise ConfigError("unknown refinement %r" % args.refine)
    _stage("eval")
    gt = _identity_gt(args, spec1.n, spec2.n)
    if gt is not None:
        geo = GeodesicProvider(mesh1)
        _, mean_direct = direct_error(pmap, gt, geo)
        report.append("mean_direct_error=%s" % _g(mean_direct))
        sym = _symmetric_gt(args, spec1.n)
        if sym is not None:
            _, mean_min = per_vertex_error(pmap, gt, sym, geo)
            report.append("mean_per_vertex_error=%s" % _g(mean_min))
        if refined_pmap is not None:
            _, refined_err = direct_error(refined_pmap, gt, geo)
            report.append("mean_direct_error_refined=%s" % _g(refined_err))
    _stage("output")
    _atomic(_out(args, "fmap.txt"),
            lambda tmp: save_functional_map(fmap, tmp))
    write_pgm(_out(args, "fmap.pgm"), np.abs(fmap.matrix))
    _atomic(_out(args, "pointwise.txt"),
            lambda tmp: save_pointwise_map(pmap, tmp))
    if mask is not None:
        write_pgm(_out(args, "mask.pgm"), mask.weights)
    if refined is not None:
        _atomic(_out(args, "refined-fmap.txt"),
                lambda tmp: save_functional_map(refined, tmp))
        _atomic(_out(args, "refined-pointwise.txt"),
                lambda tmp: save_pointwise_map(refined_pmap, tmp))
    _atomic_text(_out(args, "report.txt"), "\n".join(report) + "\n")
    print("match: wrote %s" % args.out_dir)


def cmd_refine(args):
    _stage("mesh")
    fmap = load_functional_map(args.fmap)
    if fmap.matrix.shape[0] != fmap.matrix.shape[1]:
        raise DimensionError("refinement needs a square map, got %r"
                             % (fmap.matrix.shape,))
    k = fmap.matrix.shape[0]
    cache = _cache_dir(args)
    mesh1, spec1 = _decompose_cached(args.source, k, cache)
    if args.target == args.source:
        mesh2, spec2 = mesh1, spec1
    else:
        mesh2, spec2 = _decompose_cached(args.target, k, cache)
    _stage("refine")
    refined, pmap = icp_refine(fmap, spec1, spec2, iterations=args.iterations)
    ortho = np.linalg.norm(refined.matrix.T @ refined.matrix - np.eye(k))
    report = ["k=%d" % k,
              "icp_rounds=%d" % refined.meta["icp_rounds"],
              "icp_converged=%s" % refined.meta["icp_converged"],
              "orthogonality_residual=%s" % _g(ortho)]
    _stage("eval")
    gt = _identity_gt(args, spec1.n, spec2.n)
    if gt is not None:
        _, mean_direct = direct_error(pmap, gt, GeodesicProvider(mesh1))
        report.append("mean_direct_error=%s" % _g(mean_direct))
    _stage("output")
    _atomic(_out(args, "refined-fmap.txt"),
            lambda tmp: save_functional_map(refined, tmp))
    write_pgm(_out(args, "refined-fmap.pgm"), np.abs(refined.matrix))
    _atomic(_out(args, "refined-pointwise.txt"),
            lambda tmp: save_pointwise_map(pmap, tmp))
    _atomic_text(_out(args, "report.txt"), "\n".join(report) + "\n")
    print("refine: wrote %s" % args.out_dir)


def cmd_eval(args):
    _stage("mesh")
    mesh = load_mesh(args.mesh)
    _stage("eval")
    pred = load_pointwise_map(args.map, n_source=mesh.n_vertices,
                              one_based=args.one_based)
    gt = load_pointwise_map(args.gt, n_source=mesh.n_vertices,
                            one_based=args.one_based)
    sym = None
    if args.gt_symmetric:
        sym = load_pointwise_map(args.gt_symmetric,
                                 n_source=mesh.n_vertices,
                                 one_based=args.one_based)
    geo = GeodesicProvider(mesh)
    direct_vec, direct_mean = direct_error(pred, gt, geo)
    min_vec, min_mean = per_vertex_error(pred, gt, sym, geo)
    _stage("output")
    _write_matrix(_out(args, "per-vertex-error.txt"), min_vec)
    report = ["n=%d" % pred.n_target,
              "mean_direct_error=%s" % _g(direct_mean),
              "mean_per_vertex_error=%s" % _g(min_mean),
              "max_direct_error=%s" % _g(float(direct_vec.max()))]
    _atomic_text(_out(args, "report.txt"), "\n".join(report) + "\n")
    print("eval: mean direct error %s" % _g(direct_mean))


def _eigenvalues_from_source(token, k, area, cache_dir):
    """Eigenvalues from an analytic generator, a container, or a mesh."""
    parts = token.split(":")
    if parts[0] in ("sphere", "torus", "weyl"):
        count = int(parts[1]) if len(parts) > 1 else k
        if parts[0] == "sphere":
            return sphere_spectrum(count, area).eigenvalues
        if parts[0] == "torus":
            return torus_spectrum(count, area).eigenvalues
        return np.array([weyl_estimate(i, area) for i in range(1, count + 1)])
    if token.endswith(".smsd"):
        _stage("spectrum")
        spec = load_decomposition(token)
        if k > spec.k:
            raise ConfigError("container holds k=%d < requested %d" % (spec.k, k))
        return spec.eigenvalues[:k]
    _, spec = _decompose_cached(token, k, cache_dir)
    return spec.eigenvalues


def _mask_svg(path, weights):
    """Grayscale cell grid; same 0..255 mapping as the PGM output."""
    k2, k1 = weights.shape
    top = weights.max()
    cell = max(2, int(round(512 / max(k1, k2))))
    parts = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d">'
             % (k1 * cell, k2 * cell)]
    for i in range(k2):
        for j in range(k1):
            level = 0 if top == 0 else int(round(255 * weights[i, j] / top))
            parts.append(
                '<rect x="%d" y="%d" width="%d" height="%d" '
                'fill="rgb(%d,%d,%d)"/>'
                % (j * cell, i * cell, cell, cell, level, level, level)
            )
    parts.append("</svg>")
    _atomic_text(path, "\n".join(parts) + "\n")


def cmd_mask(args):
    cache = _cache_dir(args)
    lam1 = _eigenvalues_from_source(args.first, args.k, args.area, cache)
    lam2 = _eigenvalues_from_source(args.second, args.k, args.area, cache)
    cfg = {key: getattr(args, key)
           for key in ("mask", "gamma", "w", "a", "b", "t", "eta",
                       "estimated_rank")}
    if cfg["mask"] == "none":
        raise ConfigError("mask kind 'none' cannot be rendered")
    mask = _build_mask(lam1, lam2, cfg)
    _stage("output")
    stem = "%s-mask" % mask.kind
    _write_matrix(_out(args, stem + ".txt"), mask.weights)
    write_pgm(_out(args, stem + ".pgm"), mask.weights)
    _mask_svg(_out(args, stem + ".svg"), mask.weights)
    print("mask: wrote %s/%s.{txt,pgm,svg}" % (args.out_dir, stem))


_SWEEP_PARAMS = ("gamma", "w", "t", "eta", "alpha4", "k")


def _sweep_point(base_cfg, param, value):
    cfg = dict(base_cfg)
    if param == "k":
        cfg["k1"] = cfg["k2"] = int(round(value))
    elif param == "alpha4":
        w = list(cfg["weights"])
        w[3] = value
        cfg["weights"] = tuple(w)
    else:
        cfg[param] = value
    return cfg


def cmd_sweep(args):
    param = args.param.lower()
    if param not in _SWEEP_PARAMS:
        raise ConfigError("unknown sweep parameter %r; expected one of %s"
                          % (args.param, ", ".join(_SWEEP_PARAMS)))
    values = _parse_float_list(args.values)
    base_cfg = _pipeline_config(args)
    header = "# %s\tmean_direct_error\tmean_per_vertex_error\tmask_penalty\n" \
        % param
    if not values:
        _atomic_text(_out(args, "sweep.tsv"), header)
        print("sweep: empty value list, wrote header only")
        return
    k_cap = max(args.k1, args.k2)
    if param == "k":
        k_cap = max(k_cap, int(round(max(values))))
    cache = _cache_dir(args)
    mesh1, spec1 = _decompose_cached(args.source, k_cap, cache)
    if args.target == args.source:
        mesh2, spec2 = mesh1, spec1
    else:
        mesh2, spec2 = _decompose_cached(args.target, k_cap, cache)
    desc1, desc2 = _build_descriptor_pair(spec1, spec2, base_cfg)
    gt = _identity_gt(args, spec1.n, spec2.n)
    sym = _symmetric_gt(args, spec1.n)
    geo = GeodesicProvider(mesh1) if gt is not None else None

    def run_point(value):
        cfg = _sweep_point(base_cfg, param, value)
        fmap, mask, _problem = _run_pipeline(spec1, spec2, desc1, desc2, cfg)
        penalty = mask_penalty(mask, fmap.matrix) if mask is not None \
            else float("nan")
        direct_mean = min_mean = float("nan")
        if gt is not None:
            pmap = fmap_to_pointwise(fmap, spec1, spec2)
            _, direct_mean = direct_error(pmap, gt, geo)
            _, min_mean = per_vertex_error(pmap, gt, sym, geo)
        return value, direct_mean, min_mean, penalty

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(run_point, values))
    else:
        rows = [run_point(v) for v in values]
    _stage("output")
    body = "".join("\t".join(_g(col) for col in row) + "\n" for row in rows)
    _atomic_text(_out(args, "sweep.tsv"), header + body)
    print("sweep: %d points -> %s" % (len(rows), _out(args, "sweep.tsv")))


def cmd_demo(args):
    if args.k_max < 2:
        raise ConfigError("--k-max must be at least 2")
    _stage("spectrum")
    k_max = args.k_max
    sphere = sphere_spectrum(k_max, 1.0).eigenvalues
    torus = torus_spectrum(k_max, 1.0).eigenvalues
    weyl = np.array([weyl_estimate(i, 1.0) for i in range(1, k_max + 1)])
    series = sphere_torus_commutator_series(k_max=k_max)
    # align with the spectra rows: truncation at k includes the shared zero
    # mode, which contributes nothing, so row k carries k-1 nonzero pairs
    comm_std = np.concatenate([[0.0], series["standard"][:k_max - 1]])
    comm_res = np.concatenate([[0.0], series["resolvent"][:k_max - 1]])
    _stage("output")
    lines = ["# k\tsphere\ttorus\tweyl\tcommutator_standard\tcommutator_resolvent"]
    for i in range(k_max):
        lines.append("\t".join([
            str(i + 1), _g(sphere[i]), _g(torus[i]), _g(weyl[i]),
            _g(comm_std[i]), _g(comm_res[i]),
        ]))
    _atomic_text(_out(args, "demo.tsv"), "\n".join(lines) + "\n")
    ks = np.arange(1, k_max + 1, dtype=np.float64)
    write_line_plot(
        _out(args, "spectra.svg"), ks,
        {"sphere": sphere, "flat torus": torus, "linear estimate": weyl},
        title="Analytic spectra, unit area", x_label="index", y_label="eigenvalue",
    )
    write_line_plot(
        _out(args, "commutators.svg"), ks,
        {"laplacian commutator": np.maximum(comm_std, 1e-300),
         "resolvent commutator": np.maximum(comm_res, 1e-300)},
        title="Commutator energy vs truncation", x_label="truncation",
        y_label="energy", log_y=True,
    )
    print("demo: wrote %s and plots" % _out(args, "demo.tsv"))


def cmd_correlate(args):
    target = args.target or args.source
    args.target = target
    cache = _cache_dir(args)
    mesh1, spec1 = _decompose_cached(args.source, args.k, cache)
    if target == args.source:
        mesh2, spec2 = mesh1, spec1
    else:
        mesh2, spec2 = _decompose_cached(target, args.k, cache)
    gt = _identity_gt(args, spec1.n, spec2.n)
    if gt is None:
        raise ConfigError("--gt is required for distinct meshes")
    kinds = _parse_name_list(args.masks)
    if not kinds:
        raise ConfigError("--masks must name at least one mask kind")
    cfg = {key: getattr(args, key)
           for key in ("gamma", "w", "a", "b", "t", "eta", "estimated_rank")}
    masks = []
    for kind in kinds:
        cfg["mask"] = kind
        mask = _build_mask(spec1.eigenvalues[:args.k],
                           spec2.eigenvalues[:args.k], cfg)
        if mask is None:
            raise ConfigError("mask kind 'none' cannot be scored")
        masks.append(mask)
    _stage("eval")
    noise = _parse_float_list(args.noise_levels)
    rows = correlation_experiment(
        spec1, spec2, gt, masks, args.n_samples, noise, args.seed,
        geo=GeodesicProvider(mesh1),
    )
    _stage("output")
    body = ["# sample\tmask\tpenalty\terror"]
    body += ["%d\t%s\t%s\t%s" % (s, kind, _g(p), _g(e))
             for s, kind, p, e in rows]
    _atomic_text(_out(args, "correlate.tsv"), "\n".join(body) + "\n")

    from scipy.stats import spearmanr
    summary = []
    groups = {}
    for idx, kind in enumerate(kinds):
        sub = [(p, e) for s, mk, p, e in rows[idx::len(kinds)] if mk == kind]
        pen = np.array([p for p, _ in sub])
        err = np.array([e for _, e in sub])
        groups[kind] = (pen, err)
        res = spearmanr(pen, err)
        rho = float(getattr(res, "statistic", getattr(res, "correlation",
                                                      float("nan"))))
        summary.append("spearman_%s=%s" % (kind, _g(rho)))
    _atomic_text(_out(args, "summary.txt"), "\n".join(summary) + "\n")
    write_scatter_plot(_out(args, "correlate.svg"), groups,
                       title="Mask penalty vs geodesic error",
                       x_label="penalty", y_label="mean error")
    print("correlate: %d rows -> %s" % (len(rows),
                                        _out(args, "correlate.tsv")))


_HANDLERS = {
    "spectrum": cmd_spectrum,
    "match": cmd_match,
    "refine": cmd_refine,
    "eval": cmd_eval,
    "mask": cmd_mask,
    "sweep": cmd_sweep,
    "demo-sphere-torus": cmd_demo,
    "correlate": cmd_correlate,
}


def main(argv=None):
    parser = _build_parser()
    try:
        _stage("config")
        # inside the try: option converters raise ConfigError on bad values
        args = parser.parse_args(argv)
        _merge_config(args)
        _HANDLERS[args.command](args)
        return 0
    except _IO_ERRORS as exc:
        _report_error(exc)
        return 4
    except _COMPUTE_ERRORS as exc:
        _report_error(exc)
        return 3
    except (SpecmatchError, configparser.Error, ValueError, IndexError) as exc:
        _report_error(exc)
        return 2


def _report_error(exc):
    record = {"stage": _STAGE[0], "cause": type(exc).__name__,
              "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
