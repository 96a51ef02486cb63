"""The tube around the characteristic circle and the truncated inverse.

For rho = s (e1 + i e2) the symbol of Delta + 2 rho.grad vanishes on a circle
of radius s through the origin.  G~ inverts the symbol off a thin tube around
that circle and P keeps what is inside it, so Delta_rho G~ = I - P exactly.
"""
import numpy as np

from cgoplanes.faddeev import RhoParam, apply_Delta_rho, apply_Gtilde, apply_P, lattice_tube, lower_bound_violations
from cgoplanes.fields import GridField, norm_l2

N, L = 64, 2.5
rng = np.random.default_rng(0)
f = GridField(rng.standard_normal((N, N, N)) + 1j * rng.standard_normal((N, N, N)), L)

for s in (6.0, 12.0, 24.0):
    rho = RhoParam(s)
    tube = lattice_tube(N, L, rho)
    gap = norm_l2(apply_Delta_rho(apply_Gtilde(f, rho), rho) - (f - apply_P(f, rho))) / norm_l2(f)
    v = lower_bound_violations(N, L, rho)
    print(f"s={s:5.1f}  tube radius {rho.tube_radius:.3f}  modes in tube {int(tube.sum()):5d}  "
          f"identity gap {gap:.1e}  bound violations {v['near_violations'] + v['far_violations']}")
