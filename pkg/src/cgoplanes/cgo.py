"""Plane-concentrated CGO amplitudes u = u0 + u1 + u2 for Delta + q.

Everything here lives on the grid of a :class:`~cgoplanes.geometry.PlaneFrame`:
frame coordinates ``y`` with the plane at ``y3 = offset`` and the domain center
at the origin.  In these coordinates ``rho = sign * s * (e1 + i e2)``.

Two amplitudes are available:

``"product"``
    ``u0 = chi0(y') chi1(y3)``, the product cutoff.
``"beam"``
    ``u0 = chi0(y') B(y2, y3)`` where ``B`` is the exact null solution of
    ``Delta_rho`` whose ``y3`` profile at ``y2 = 0`` is ``chi1``.  Each
    Fourier mode ``k3`` of ``chi1`` is carried with the ``y2`` frequency that puts
    it on the characteristic circle, so ``Delta_rho B = 0`` and the only
    residual of ``u0`` on the domain is ``q u0``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from .cutoffs import Chi0, Chi1, Chi3, _transition
from .faddeev import (RhoParam, apply_Delta_rho, apply_Gtilde, apply_P, lattice_symbol,
                      lattice_tube)
from .fields import GridField, abs_derivative, axis_coords, axis_freqs, ball_mask, mesh, norm_l2
from .geometry import BallDomain, Plane, PlaneFrame

log = logging.getLogger(__name__)

Potential = Union[None, float, GridField, Callable]

AMPLITUDES = ("product", "beam")


# ---------------------------------------------------------------- helpers

def frame_for(plane: Plane, dom: BallDomain) -> PlaneFrame:
    return PlaneFrame(plane.normalized(dom.center), np.asarray(dom.center, float))


def frame_potential(q: Potential, frame: PlaneFrame, N: int, L: float) -> Optional[GridField]:
    """Potential on the frame grid.  Callables of world coordinates are evaluated
    exactly; grid fields are resampled (trilinear)."""
    if q is None:
        return None
    if isinstance(q, GridField):
        return frame.resample(q)
    if callable(q):
        return frame.sample(q, N, L)
    if np.isscalar(q):
        return None if q == 0 else GridField(np.full((N, N, N), complex(q)), L)
    raise TypeError(f"unsupported potential of type {type(q).__name__}")


def _times_q(f: GridField, q: Optional[GridField]) -> GridField:
    return GridField.zeros(f.N, f.L) if q is None else f * q


def radial_cutoff(N: int, L: float, r_in: float, r_out: float, inside: bool = True) -> np.ndarray:
    """Smooth radial profile: 1 for |y| <= r_in, 0 for |y| >= r_out (or its complement)."""
    if not 0 < r_in < r_out:
        raise ValueError("need 0 < r_in < r_out")
    Y1, Y2, Y3 = mesh(N, L)
    r = np.sqrt(Y1**2 + Y2**2 + Y3**2)
    c = 1.0 - _transition((r - r_in) / (r_out - r_in))
    return c if inside else 1.0 - c


def slab_profile(N: int, L: float, func) -> np.ndarray:
    """Broadcastable (1, 1, N) array of a profile in the y3 coordinate."""
    return np.asarray(func(axis_coords(N, L)), float)[None, None, :]


def planar_profile(N: int, L: float, chi0: Chi0) -> np.ndarray:
    x = axis_coords(N, L)
    return np.asarray(chi0(x[:, None], x[None, :]))[:, :, None]


# ---------------------------------------------------------------- amplitudes

@dataclass(frozen=True)
class BeamProfile:
    values: np.ndarray          # (N, N) array over (y2, y3)
    dropped_fraction: float     # L2 share of chi1 modes with |k3| >= s (evanescent, dropped)


def beam_profile(chi1: Chi1, rho: RhoParam, N: int, L: float) -> BeamProfile:
    """``B(y2, y3) = sum_k3 c(k3) exp(i k3 y3 + i k2(k3) y2)`` with
    ``k2(k3) = sign (sqrt(s^2 - k3^2) - s)``, the branch through k = 0."""
    y = axis_coords(N, L)
    c = sfft.fft(chi1(y).astype(complex))
    k3 = axis_freqs(N, L)
    keep = np.abs(k3) < rho.s
    tot = float(np.sum(np.abs(c) ** 2))
    dropped = float(np.sum(np.abs(c[~keep]) ** 2)) / tot if tot > 0 else 0.0
    k2 = np.zeros_like(k3)
    k2[keep] = rho.sign * (np.sqrt(rho.s**2 - k3[keep] ** 2) - rho.s)
    spec = np.where(keep, c, 0.0)[None, :] * np.exp(1j * y[:, None] * k2[None, :])
    return BeamProfile(sfft.ifft(spec, axis=1), dropped)


def build_u0(rho: RhoParam, plane: Plane, chi0: Chi0, chi1: Chi1, N: int, L: float,
             amplitude: str = "product") -> GridField:
    """``u0 = chi0(y') chi1(y3)`` on the frame grid of ``plane`` (or the beam variant)."""
    if amplitude not in AMPLITUDES:
        raise ValueError(f"amplitude must be one of {AMPLITUDES}")
    c0 = planar_profile(N, L, chi0)
    if amplitude == "product":
        return GridField(c0 * slab_profile(N, L, chi1), L)
    B = beam_profile(chi1, rho, N, L).values
    return GridField(c0 * B[None, :, :], L)


def residual_r0(u0: GridField, q: Optional[GridField], rho: RhoParam,
                chi0: Optional[Chi0] = None, chi1: Optional[Chi1] = None):
    """``(Delta_rho + q) u0`` spectrally, plus a check of the slab identity.

    With ``chi0`` and ``chi1`` given (product amplitude), the report compares the
    result on ``|y'| <= R_cut`` with ``chi0 chi1'' + q u0`` and splits the full-box
    norm into the inner part and the annulus where chi0 is not constant.
    """
    r = apply_Delta_rho(u0, rho) + _times_q(u0, q)
    report = {}
    if chi0 is not None and chi1 is not None:
        N, L = u0.N, u0.L
        x = axis_coords(N, L)
        rp = np.hypot(x[:, None], x[None, :])[:, :, None]
        inner = np.broadcast_to(rp <= chi0.R_cut, r.values.shape)
        ident = planar_profile(N, L, chi0) * slab_profile(N, L, chi1.second_derivative)
        ident = ident + _times_q(u0, q).values
        diff = np.abs(r.values - ident)[inner]
        scale = max(np.abs(ident[inner]).max(), 1e-300)
        annulus = np.broadcast_to((rp > chi0.R_cut) & (rp < chi0.R_cut + chi0.width), r.values.shape)
        h3 = u0.h**3
        report = {
            "slab_identity_rel_err": float(diff.max() / scale),
            "norm_inner": float(np.sqrt(np.sum(np.abs(r.values[inner]) ** 2) * h3)),
            "norm_annulus": float(np.sqrt(np.sum(np.abs(r.values[annulus]) ** 2) * h3)),
            "norm_outside": float(np.sqrt(np.sum(np.abs(r.values[~(inner | annulus)]) ** 2) * h3)),
            "norm_box": norm_l2(r),
        }
    return r, report


def build_u1(u0: GridField, q: Optional[GridField], rho: RhoParam, chi3: Chi3,
             localize: Optional[np.ndarray] = None) -> GridField:
    """``u1 = -chi3(y3) G~((Delta_rho + q) u0)``; ``localize`` optionally
    multiplies the source first (used by the beam amplitude to keep the chi0
    transition annulus, which lies outside the domain, out of the source)."""
    src = apply_Delta_rho(u0, rho) + _times_q(u0, q)
    if localize is not None:
        src = src * localize
    g = apply_Gtilde(src, rho)
    return GridField(-slab_profile(u0.N, u0.L, chi3) * g.values, u0.L)


def estimate_norms(u0: GridField, q: Optional[GridField], rho: RhoParam, dom) -> dict:
    """The three domain norms ``|P r|``, ``||D''| G~ r|`` and ``|G~ r|`` with
    ``r = (Delta_rho + q) u0``."""
    r = apply_Delta_rho(u0, rho) + _times_q(u0, q)
    g = apply_Gtilde(r, rho)
    return {
        "p_norm": norm_l2(apply_P(r, rho), dom),
        "dpp_norm": norm_l2(abs_derivative(g, axes=(2,)), dom),
        "g_norm": norm_l2(g, dom),
    }


# ---------------------------------------------------------------- u2

class SolverDivergence(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = list(trace)


@dataclass
class U2Result:
    u2: GridField
    achieved_residual: float        # |(Delta_rho+q)u2 + r|_Omega / |r|_Omega
    residual_box: float             # same over the whole box
    iterations: int
    converged: bool
    method: str
    history: list = field(default_factory=list)
    n_tube_modes: int = 0


def _reg_multiplier(sig, tube, tau):
    m = np.zeros_like(sig)
    off = ~tube
    if tau == 0:
        np.divide(1.0, sig, out=m, where=off)
    else:
        m[off] = np.conj(sig[off]) / (np.abs(sig[off]) ** 2 + tau * tau)
    return m


def _residual(u2: GridField, r: GridField, q, rho, omega):
    res = apply_Delta_rho(u2, rho) + _times_q(u2, q) + r
    rn_o = norm_l2(r, omega)
    rn_b = norm_l2(r)
    ro = norm_l2(res, omega) / rn_o if rn_o > 0 else norm_l2(res, omega)
    rb = norm_l2(res) / rn_b if rn_b > 0 else norm_l2(res)
    return ro, rb


def solve_u2(r: GridField, q: Optional[GridField], rho: RhoParam, tau: Optional[float] = None,
             max_iters: int = 50, tol: float = 1e-6, method: str = "krylov",
             omega: Optional[BallDomain] = None, exterior: tuple = (1.15, 1.3)) -> U2Result:
    """Solve ``(Delta_rho + q) u2 = -r`` on the domain.

    ``method="fixed_point"`` iterates ``u2 <- G_reg(-r - q u2)`` over every lattice
    mode.  On the torus the lattice modes in the tube (the zero mode among them)
    make this nearly singular, so it stalls at a floor set by those modes.

    ``method="krylov"`` (default) writes ``u2 = G z`` with ``G`` the regularized
    inverse on the tube complement, and lets the tube content of ``z`` drive
    sources ``chi_out * P z`` supported outside the domain (``chi_out`` rises
    from 0 to 1 between ``exterior[0]`` and ``exterior[1]`` times the domain
    radius).  The system ``(sigma G + q G + chi_out P) z = -r`` is solved with
    GMRES; the equation then holds exactly on the domain, and
    ``achieved_residual`` is measured there.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if tau is None:
        tau = 1e-3 * rho.s
    if omega is None:
        omega = BallDomain(1.0, r.L, r.N)
    N, L = r.N, r.L
    if norm_l2(r) == 0:
        return U2Result(GridField.zeros(N, L), 0.0, 0.0, 0, True, method)
    sig = lattice_symbol(N, L, rho)
    tube = lattice_tube(N, L, rho)
    Greg = _reg_multiplier(sig, tube, tau)
    qv = None if q is None else q.values

    if method == "fixed_point":
        Gfull = np.conj(sig) / (np.abs(sig) ** 2 + tau * tau) if tau > 0 else _reg_multiplier(sig, np.abs(sig) < 1e-12, 0)
        u = GridField.zeros(N, L)
        hist = []
        grow = 0
        for it in range(1, max_iters + 1):
            rhs = -r.values - (0 if qv is None else qv * u.values)
            u = GridField(sfft.ifftn(Gfull * sfft.fftn(rhs)), L)
            ro, rb = _residual(u, r, q, rho, omega)
            hist.append(ro)
            if len(hist) > 1 and hist[-1] > hist[-2]:
                grow += 1
                if grow >= 5:
                    raise SolverDivergence(f"fixed point diverging after {it} iterations", hist)
            else:
                grow = 0
            if ro <= tol:
                return U2Result(u, ro, rb, it, True, method, hist)
        log.warning("fixed point stopped at residual %.3e after %d iterations", hist[-1], max_iters)
        return U2Result(u, hist[-1], rb, max_iters, False, method, hist)

    if method != "krylov":
        raise ValueError(f"unknown method {method!r}")
    chi_out = radial_cutoff(N, L, exterior[0] * omega.radius, exterior[1] * omega.radius, inside=False)
    shape = (N, N, N)
    sG = sig * Greg
    tubef = tube.astype(float)

    def matvec(zf):
        Z = sfft.fftn(zf.reshape(shape))
        out = sfft.ifftn(sG * Z) + chi_out * sfft.ifftn(tubef * Z)
        if qv is not None:
            out += qv * sfft.ifftn(Greg * Z)
        return out.ravel()

    A = LinearOperator((N**3, N**3), matvec=matvec, dtype=complex)
    b = -r.values.ravel()
    hist = []
    # GMRES measures the box residual; aim below the domain-relative target
    rn_o, rn_b = norm_l2(r, omega), norm_l2(r)
    rtol = tol * min(1.0, rn_o / rn_b if rn_b > 0 else 1.0) * 0.5
    z, info = gmres(A, b, rtol=rtol, atol=0.0, restart=max_iters, maxiter=1,
                    callback=lambda pr: hist.append(float(pr)), callback_type="pr_norm")
    u = GridField(sfft.ifftn(Greg * sfft.fftn(z.reshape(shape))), L)
    ro, rb = _residual(u, r, q, rho, omega)
    converged = ro <= tol
    if not converged:
        log.warning("krylov u2 solve reached residual %.3e (tol %.1e) after %d iterations", ro, tol, len(hist))
    return U2Result(u, ro, rb, len(hist), converged, method, hist, int(tube.sum()))


# ---------------------------------------------------------------- assembly

@dataclass
class ApproxSolution:
    rho: RhoParam
    plane: Plane
    frame: PlaneFrame
    u0: GridField
    u1: GridField
    u2: Optional[GridField]
    residual_report: dict
    delta: float
    amplitude: str = "product"

    @property
    def u_app(self) -> GridField:
        return self.u0 + self.u1

    @property
    def u(self) -> GridField:
        return self.u_app if self.u2 is None else self.u_app + self.u2


def build_cgo(q: Potential, plane: Plane, dom: BallDomain, rho: RhoParam, chi0: Chi0,
              amplitude: str = "product", solve: bool = False, tau: Optional[float] = None,
              max_iters: int = 50, tol: float = 1e-6, localize: tuple = (1.02, 1.1),
              norms: bool = True) -> ApproxSolution:
    """Assemble u0, u1 (and u2 when ``solve``) for one plane and one rho.

    For the beam amplitude the u1 source is multiplied by a radial cutoff equal
    to 1 on the domain and 0 beyond ``localize[1]`` radii; the residual that
    enters u2 is localized the same way.  Only the equation on the domain matters
    for the boundary data.
    """
    from .cutoffs import make_chi1, make_chi3

    N, L = dom.N, dom.L
    frame = frame_for(plane, dom)
    d = frame.offset
    delta = rho.delta
    chi1 = make_chi1(delta, d, L)
    chi3 = make_chi3(delta, d, L)
    qf = frame_potential(q, frame, N, L)
    u0 = build_u0(rho, frame.plane, chi0, chi1, N, L, amplitude)
    loc = None
    if amplitude == "beam":
        loc = radial_cutoff(N, L, localize[0] * dom.radius, localize[1] * dom.radius)
    u1 = build_u1(u0, qf, rho, chi3, loc)
    ua = u0 + u1
    res = apply_Delta_rho(ua, rho) + _times_q(ua, qf)
    slab = np.abs(axis_coords(N, L) - d) <= 2 * delta + 1e-12
    mass = np.sum(np.abs(ua.values) ** 2, axis=(0, 1))
    report = {
        "residual_box": norm_l2(res),
        "residual_omega": norm_l2(res, dom),
        "u0_box": norm_l2(u0),
        "u1_omega": norm_l2(u1, dom),
        "u_app_box": norm_l2(ua),
        "outside_slab_fraction": float(mass[~slab].sum() / max(mass.sum(), 1e-300)),
        "u2_residual": float("nan"),
        "u2_iters": 0,
    }
    if norms:
        report.update(estimate_norms(u0, qf, rho, dom))
    u2 = None
    if solve:
        rr = res if loc is None else res * loc
        out = solve_u2(rr, qf, rho, tau, max_iters, tol, omega=dom)
        u2 = out.u2
        report.update(u2_residual=out.achieved_residual, u2_residual_box=out.residual_box,
                      u2_iters=out.iterations, u2_converged=out.converged,
                      u2_omega=norm_l2(u2, dom))
    return ApproxSolution(rho, plane, frame, u0, u1, u2, report, delta, amplitude)


# ---------------------------------------------------------------- exponentials

class ExponentOverflow(OverflowError):
    pass


def exact_v(u: GridField, rho: RhoParam, max_exponent: float = 700.0) -> GridField:
    """``v = exp(rho . y) u`` on the frame grid (exponent referenced to the frame origin)."""
    Y1, Y2, _ = mesh(u.N, u.L)
    a = rho.sign * rho.s
    supp = np.abs(u.values) > 0
    if supp.any():
        y1 = np.broadcast_to(Y1, u.values.shape)[supp]
        worst = float(np.abs(a * y1).max())
        if worst > max_exponent:
            raise ExponentOverflow(f"|Re(rho.x)| reaches {worst:.1f} > {max_exponent} on supp(u); "
                                   "use a smaller s or recentre the frame")
    phase = np.exp(a * Y1 + 1j * a * Y2)
    return GridField(phase * u.values, u.L)


def conjugation_defect(u: GridField, q: Optional[GridField], rho: RhoParam) -> float:
    """Relative gap between ``(Delta + q) v`` and ``exp(rho.y) (Delta_rho + q) u``."""
    from .fields import laplacian

    v = exact_v(u, rho)
    lhs = laplacian(v) + _times_q(v, q)
    rhs = exact_v(apply_Delta_rho(u, rho) + _times_q(u, q), rho)
    return norm_l2(lhs - rhs) / max(norm_l2(rhs), 1e-300)


def weak_limit_gap(u0_pair, f: GridField, plane: Plane, dom: BallDomain, chi0: Optional[Chi0] = None) -> float:
    """``|int_Omega u0a u0b f - R^Omega(f chi0^2)(plane)|`` with every field on the
    frame grid of ``plane`` (so the plane is ``y3 = offset``)."""
    from .transform import relative_plane_integral

    a, b = u0_pair
    frame_plane = Plane(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
                        np.array([0, 0, plane.offset(dom.center)]))
    centred = BallDomain(dom.radius, dom.L, dom.N)
    lhs = np.sum((a.values * b.values * f.values)[ball_mask(f.N, f.L, dom.radius)]) * f.h**3
    g = f if chi0 is None else f * GridField(np.broadcast_to(planar_profile(f.N, f.L, chi0) ** 2, f.values.shape), f.L)
    return float(abs(lhs - relative_plane_integral(g, frame_plane, centred)))


# ---------------------------------------------------------------- diagnostics

DIAG_COLUMNS = ("plane_id", "s", "beta", "eps0", "p_norm", "dpp_norm", "g_norm",
                "residual_box", "residual_omega", "u2_residual", "u2_iters")


def diagnostic_row(plane_id, sol: ApproxSolution) -> dict:
    r = sol.residual_report
    nan = float("nan")
    return {
        "plane_id": plane_id, "s": sol.rho.s, "beta": sol.rho.beta, "eps0": sol.rho.eps0,
        "p_norm": r.get("p_norm", nan), "dpp_norm": r.get("dpp_norm", nan), "g_norm": r.get("g_norm", nan),
        "residual_box": r["residual_box"], "residual_omega": r["residual_omega"],
        "u2_residual": r.get("u2_residual", float("nan")), "u2_iters": r.get("u2_iters", 0),
    }


def append_diagnostics(path, rows) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=DIAG_COLUMNS, lineterminator="\n")
        if new:
            w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
