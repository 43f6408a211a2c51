"""
Orthonormal cubic spline wavelets on the unit interval
======================================================

Builds the wavelet and boundary generators from the packaged scaling
functions, assembles the interval basis up to level 5 and checks the
properties the solver relies on.
"""

import numpy as np

from orthowave import basis1d

# The generator set: six scaling functions read from the coefficient table,
# six wavelets and four boundary wavelets constructed from null spaces.
g = basis1d.default_generators()
for name, f in g.named().items():
    lo, hi = f.support
    print(f"{name:6s} support [{lo:+.0f}, {hi:+.0f}]  norm {f.norm():.15f}")

# Inner wavelets annihilate cubics.
moments = [[w.moment(m) for m in range(4)] for w in g.wavelets]
print("largest wavelet moment:", np.abs(moments).max())

# The interval basis grows by 6 * 2**j functions per level.
for k in range(6):
    b = basis1d.build_basis(g, k)
    rep = basis1d.verify_basis(b)
    print(
        f"k={k}  n={len(b):4d}  |Gram - I|={rep.orthonormality:.1e}  "
        f"H1 condition={rep.h1_condition:.3f}"
    )

# Every function is a piecewise cubic on the grid 2**-(k+3); a level-j
# wavelet lies in the C1 Hermite space one dyadic level finer.
b = basis1d.build_basis(g, 2)
f = b[30]
print(f"function 30: level {f.level}, kind {f.kind}, Hermite residual on grid 2^-{f.level + 3}:",
      basis1d.hermite_space_residual(f.shape, f.level + 3))
