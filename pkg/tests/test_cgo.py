import numpy as np
import pytest

from cgoplanes import cgo
from cgoplanes.cutoffs import make_chi0, make_chi1, make_chi3
from cgoplanes.faddeev import RhoParam, apply_Delta_rho, apply_P
from cgoplanes.fields import GridField, axis_coords, norm_l2
from cgoplanes.geometry import BallDomain, Plane

N, L = 64, 2.5
DOM = BallDomain(1.0, L, N)
CHI0 = make_chi0(1.1, 0.3, 1.0, L)
PLANE = Plane.from_normal((0.3, 0.2, 1.0), 0.2)


def gauss(x, y, z, w=0.3, c=(0.0, 0.0, 0.0)):
    return np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / (2 * w * w))


@pytest.mark.parametrize("sign", [1, -1])
def test_beam_modes_lie_on_characteristic_circle(sign):
    rho = RhoParam(12.0, sign)
    k3 = np.linspace(-11.9, 11.9, 41)
    k2 = sign * (np.sqrt(rho.s**2 - k3**2) - rho.s)
    # symbol of Delta + 2 rho.grad on exp(i(k2 y2 + k3 y3)): -(k2^2 + k3^2) + 2 i (i sign s) k2
    sym = -(k2**2 + k3**2) - 2 * sign * rho.s * k2
    assert np.allclose(sym, 0, atol=1e-10)
    chi1 = make_chi1(rho.delta, 0.1)
    prof = cgo.beam_profile(chi1, rho, N, L)
    assert prof.dropped_fraction < 1e-2             # chi1 modes with |k3| >= s are evanescent
    # on y2 = 0 the beam is chi1 minus the dropped modes (Parseval)
    x = axis_coords(N, L)
    j0 = int(np.argmin(np.abs(x)))
    rel = np.linalg.norm(prof.values[j0] - chi1(x)) / np.linalg.norm(chi1(x))
    assert rel == pytest.approx(np.sqrt(prof.dropped_fraction), rel=1e-8)


def test_product_residual_matches_slab_identity():
    """(Delta_rho) chi0 chi1 = chi0 chi1'' where chi0 = 1; the spectral
    second derivative of the bump converges quickly in N."""
    rho = RhoParam(8.0)
    chi1 = make_chi1(rho.delta, 0.2)
    errs = []
    for n in (64, 128):
        u0 = cgo.build_u0(rho, PLANE, CHI0, chi1, n, L, "product")
        _, rep = cgo.residual_r0(u0, None, rho, CHI0, chi1)
        errs.append(rep["slab_identity_rel_err"])
        assert rep["norm_box"] ** 2 == pytest.approx(rep["norm_inner"] ** 2 + rep["norm_annulus"] ** 2
                                                     + rep["norm_outside"] ** 2, rel=1e-10)
    assert errs[1] < 0.5 * errs[0] and errs[1] < 0.15


@pytest.mark.parametrize("amplitude", ["product", "beam"])
def test_u1_support_and_equation_in_slab(amplitude):
    rho = RhoParam(12.0)
    sol = cgo.build_cgo(gauss, PLANE, DOM, rho, CHI0, amplitude)
    if amplitude == "product":
        assert sol.residual_report["outside_slab_fraction"] == 0.0
    else:
        # the beam diffracts slightly out of the slab
        assert sol.residual_report["outside_slab_fraction"] < 0.01
    # where chi3 = 1 the residual of u_app is P r + q u1
    q = cgo.frame_potential(gauss, sol.frame, N, L)
    loc = cgo.radial_cutoff(N, L, 1.02, 1.1) if amplitude == "beam" else 1.0
    r = (apply_Delta_rho(sol.u0, rho) + sol.u0 * q) * loc
    res = apply_Delta_rho(sol.u_app, rho) + sol.u_app * q
    expect = apply_P(r, rho) + sol.u1 * q
    x = axis_coords(N, L)
    slab = np.abs(x - sol.frame.offset) < 0.9 * rho.delta
    m = np.zeros(res.values.shape, bool)
    m[:, :, slab] = True
    m &= np.broadcast_to(DOM.mask(), m.shape)
    # exact up to aliasing of the chi3 product
    assert np.abs(res.values - expect.values)[m].max() <= 1e-3 * np.abs(r.values).max()


def test_u2_solver_reaches_tolerance_on_domain():
    rho = RhoParam(12.0)
    sol = cgo.build_cgo(gauss, PLANE, DOM, rho, CHI0, "beam", solve=True, tol=1e-6)
    rep = sol.residual_report
    assert rep["u2_converged"] and rep["u2_residual"] <= 1e-6
    q = cgo.frame_potential(gauss, sol.frame, N, L)
    res = apply_Delta_rho(sol.u, rho) + sol.u * q
    assert norm_l2(res, DOM) <= 2e-6 * norm_l2(sol.u0, DOM)


def test_u2_fixed_point_small_potential():
    rho = RhoParam(12.0)
    q = lambda x, y, z: 0.05 * gauss(x, y, z)            # noqa: E731
    sol = cgo.build_cgo(q, PLANE, DOM, rho, CHI0, "beam")
    qf = cgo.frame_potential(q, sol.frame, N, L)
    r = apply_Delta_rho(sol.u_app, rho) + sol.u_app * qf
    r = r * cgo.radial_cutoff(N, L, 1.02, 1.1)
    try:
        out = cgo.solve_u2(r, qf, rho, max_iters=30, tol=1e-6, method="fixed_point", omega=DOM)
    except cgo.SolverDivergence as e:
        pytest.fail(f"fixed point diverged: {e}")
    assert out.history[-1] < out.history[0]


def test_exact_v_and_conjugation():
    rho = RhoParam(4.0)
    u = GridField.from_function(lambda x, y, z: gauss(x, y, z, 0.25), N, L)
    q = GridField.from_function(gauss, N, L)
    assert cgo.conjugation_defect(u, q, rho) < 1e-6
    v = cgo.exact_v(u, rho)
    Y1, Y2, _ = u.coords()
    assert np.allclose(v.values, np.exp(4 * Y1 + 4j * Y2) * u.values)
    with pytest.raises(cgo.ExponentOverflow):
        cgo.exact_v(u, RhoParam(400.0))


def test_weak_limit_defect_decreases_with_delta():
    big = BallDomain(1.0, L, 128)
    fr = cgo.frame_for(PLANE, big)
    F = fr.sample(gauss, 128, L)
    gaps = []
    for delta in (0.6, 0.3, 0.15):
        u = GridField(cgo.planar_profile(128, L, CHI0) * cgo.slab_profile(128, L, make_chi1(delta, fr.offset)), L)
        gaps.append(cgo.weak_limit_gap((u, u), F, PLANE, big, CHI0))
    orders = np.log2(np.array(gaps[:-1]) / np.array(gaps[1:]))
    assert orders.min() >= 1.5


def test_diagnostics_csv(tmp_path):
    rho = RhoParam(8.0)
    sol = cgo.build_cgo(None, PLANE, DOM, rho, CHI0, "product")
    row = cgo.diagnostic_row(3, sol)
    cgo.append_diagnostics(tmp_path / "d.csv", [row])
    cgo.append_diagnostics(tmp_path / "d.csv", [row])
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0].split(",") == list(cgo.DIAG_COLUMNS) and len(lines) == 3
    assert make_chi3(rho.delta).delta == rho.delta
