"""Analytic spectra and the case for a resolvent commutator.

Two closed-form surfaces with the same area have very different Laplacian
eigenvalues: the unit-area sphere grows in clusters 4*pi*l*(l+1), the flat
square torus along lattice shells 4*pi^2*(m^2+n^2), and both follow the
same linear envelope 4*pi*k (Weyl's law). Because the eigenvalues grow
without bound, the raw Laplacian-commutator energy of even the identity
map keeps growing as the basis is enlarged. Replacing the operator with
its resolvent bounds the spectrum, and the same energy saturates.

Run from the repository root:

    python3 demos/01_analytic_spectra.py

Outputs land in demos/output/.
"""

import os

import numpy as np

from specmatch.fmap import sphere_torus_commutator_series
from specmatch.render import write_line_plot
from specmatch.spectral import sphere_spectrum, torus_spectrum, weyl_estimate

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

K = 100
sphere = sphere_spectrum(K, area=1.0).eigenvalues
torus = torus_spectrum(K, area=1.0).eigenvalues
weyl = np.array([weyl_estimate(k, area=1.0) for k in range(1, K + 1)])

print("first nonzero eigenvalues (unit area)")
print("  sphere %.6f  (= 8*pi, multiplicity 3)" % sphere[1])
print("  torus  %.6f  (= 4*pi^2, multiplicity 4)" % torus[1])
print("  Weyl slope per index: %.6f (= 4*pi)" % weyl[0])

ks = np.arange(1, K + 1, dtype=np.float64)
write_line_plot(
    os.path.join(OUT, "analytic-spectra.svg"), ks,
    {"sphere": sphere, "flat torus": torus, "linear estimate": weyl},
    title="Analytic spectra, unit area", x_label="index", y_label="eigenvalue",
)

# commutator energy of the identity map between the two surfaces, as a
# function of how many eigenpairs the truncated basis keeps
series = sphere_torus_commutator_series(k_max=K, gamma=1.0, a=0.0, b=1.0)
standard = series["standard"]
resolvent = series["resolvent"]

print()
print("identity-map commutator energy vs truncation")
print("  raw Laplacian:   k=50 %.4g   k=100 %.4g   ratio %.3f" % (
    standard[49], standard[99], standard[99] / standard[49]))
print("  resolvent form:  k=50 %.6g  k=100 %.6g  change %.4f%%" % (
    resolvent[49], resolvent[99],
    100.0 * (resolvent[99] - resolvent[49]) / resolvent[99]))
print("the raw energy keeps climbing; the resolvent energy has converged")

write_line_plot(
    os.path.join(OUT, "commutator-growth.svg"), ks,
    {"laplacian commutator": np.maximum(standard, 1e-300),
     "resolvent commutator": np.maximum(resolvent, 1e-300)},
    title="Commutator energy vs truncation", x_label="truncation",
    y_label="energy", log_y=True,
)
print()
print("wrote %s" % os.path.join(OUT, "analytic-spectra.svg"))
print("wrote %s" % os.path.join(OUT, "commutator-growth.svg"))
