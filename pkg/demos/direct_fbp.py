"""Filtered backprojection of a Gaussian from its plane integrals over the ball."""
import numpy as np

from cgoplanes.fields import GridField, norm_l2
from cgoplanes.geometry import BallDomain, sample_planes
from cgoplanes.pipeline.phantoms import parse_phantom
from cgoplanes.transform import PlaneSample, radon_invert_fbp, relative_plane_integral

dom = BallDomain(1.0, 2.5, 64)
ph = parse_phantom("gaussian:1.0:0.25:0.2,0,0")
truth = GridField.from_function(ph, dom.N, dom.L)

for dirs, offs in ((30, 15), (100, 31), (200, 41)):
    samples = [PlaneSample(p, relative_plane_integral(ph, p, dom)) for p in sample_planes(dirs, offs, dom)]
    rec = radon_invert_fbp(samples, dom)
    err = norm_l2(rec - truth, dom) / norm_l2(truth, dom)
    peak = np.unravel_index(np.argmax(rec.values.real), rec.values.shape)
    print(f"{dirs:4d} directions x {offs:2d} offsets: relative L2 error {err:.3f}, "
          f"peak at x = {dom.L * (2 * peak[0] / dom.N - 1):+.3f}")
