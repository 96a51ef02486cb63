import numpy as np
import pytest

from cgoplanes.fields import GridField
from cgoplanes.geometry import BallDomain, Plane, sample_planes
from cgoplanes.transform import (PlaneSample, UnderResolved, holomorphic_moment, organize, plane_integral,
                                 radon_invert_fbp, read_samples, relative_plane_integral, slab_estimate,
                                 support_localize, write_samples)

DOM = BallDomain(1.0, 2.5, 64)


def gauss(w, c=(0.0, 0.0, 0.0)):
    return lambda x, y, z: np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / (2 * w * w))


def disc_gauss(w, d, R=1.0):
    """Integral of a centered Gaussian over the plane disc at distance d inside the unit ball."""
    a2 = R * R - d * d
    return 2 * np.pi * w * w * np.exp(-d * d / (2 * w * w)) * (1 - np.exp(-a2 / (2 * w * w)))


@pytest.mark.parametrize("d", [0.0, 0.3, 0.7, 0.95])
def test_relative_plane_integral_closed_form(d):
    p = Plane.from_normal((0.3, -0.5, 0.8), d)
    assert relative_plane_integral(gauss(0.3), p, DOM) == pytest.approx(disc_gauss(0.3, d), rel=1e-9)
    assert relative_plane_integral(gauss(0.3), Plane.from_normal((0, 0, 1), 1.2), DOM) == 0


def test_plane_integral_full_plane():
    f = GridField.from_function(gauss(0.3), 64, 2.5)
    p = Plane.from_normal((0.0, 0.0, 1.0), 0.2)
    exact = 2 * np.pi * 0.09 * np.exp(-0.04 / 0.18)
    assert plane_integral(f, p).real == pytest.approx(exact, rel=1e-2)          # trilinear
    assert plane_integral(f, p, order=3).real == pytest.approx(exact, rel=1e-4)


def test_holomorphic_moments():
    p = Plane.from_normal((0.0, 0.0, 1.0), 0.0)
    assert abs(holomorphic_moment(gauss(0.3), p, 1, DOM)) < 1e-12     # radial: odd moments vanish
    m0 = holomorphic_moment(gauss(0.3), p, 0, DOM)
    assert m0 == pytest.approx(relative_plane_integral(gauss(0.3), p, DOM))


def test_slab_estimate_extrapolates():
    p = Plane.from_normal((0.0, 0.0, 1.0), 0.2)
    out = slab_estimate(gauss(0.3), p, DOM, [0.2, 0.3, 0.4])
    assert out["limit"] == pytest.approx(disc_gauss(0.3, 0.2), rel=1e-3)
    with pytest.raises(UnderResolved):
        slab_estimate(gauss(0.3), p, DOM, [0.01])


def test_fbp_gaussian_direct():
    dom = BallDomain(1.0, 2.5, 64)
    samples = [PlaneSample(p, relative_plane_integral(gauss(0.25), p, dom)) for p in sample_planes(100, 31, dom)]
    rec = radon_invert_fbp(samples, dom)
    truth = GridField.from_function(gauss(0.25), 64, 2.5)
    m = dom.mask()
    err = np.linalg.norm((rec.values - truth.values)[m]) / np.linalg.norm(truth.values[m])
    assert err < 0.15


def test_organize_rejects_ragged():
    planes = sample_planes(3, 5, DOM)
    samples = [PlaneSample(p, 0.0) for p in planes][:-1]
    with pytest.raises(ValueError):
        organize(samples, DOM)
    n, off, vals = organize([PlaneSample(p, 0.0) for p in planes], DOM)
    assert vals.shape == (3, 5) and np.allclose(off, [-2 / 3, -1 / 3, 0, 1 / 3, 2 / 3])


def _synthetic(f, dirs, offsets):
    planes = sample_planes(dirs, 1, DOM)
    out = []
    for p in planes:
        for d in offsets:
            q = Plane.from_normal(p.normal, d, DOM.center)
            out.append(PlaneSample(q, relative_plane_integral(f, q, DOM)))
    return out


def bump(a, c=(0.0, 0.0, 0.0)):
    def f(x, y, z):
        r2 = ((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / (a * a)
        out = np.zeros(np.shape(r2))
        m = r2 < 1
        out[m] = np.exp(1 - 1 / (1 - r2[m]))
        return out
    return f


def test_support_localize_helgason_family():
    offs = np.linspace(-0.9, 0.9, 19)
    reg = support_localize(_synthetic(bump(0.3), 40, offs), DOM, 1e-8)
    # support radius 0.3; vanishing planes start at 0.4
    assert reg.max_radius() <= 0.4 / np.cos(0.32) + DOM.h
    assert reg.contains(np.zeros((1, 3)))[0]


def test_support_localize_gap_aware():
    # only the outer planes are sampled: the certified region is the inner slab union, never empty
    offs = np.array([-0.9, -0.8, 0.8, 0.9])
    reg = support_localize(_synthetic(bump(0.3), 12, offs), DOM, 1e-8)
    assert not reg.is_empty
    assert np.allclose(reg.hi, 0.8) and np.allclose(reg.lo, -0.8)
    # everything vanishes on a contiguous sampling: empty support
    zero = support_localize(_synthetic(lambda x, y, z: 0 * x, 4, np.linspace(-0.9, 0.9, 7)), DOM, 1e-8)
    assert zero.is_empty and zero.tube_depth() == DOM.radius


def test_samples_roundtrip(tmp_path):
    s = _synthetic(gauss(0.3), 3, [0.0, 0.5])
    write_samples(tmp_path / "s.csv", s, DOM)
    back = read_samples(tmp_path / "s.csv", DOM)
    assert [b.value for b in back] == [a.value for a in s]
    assert all(np.allclose(a.plane.normal, b.plane.normal) for a, b in zip(s, back))
