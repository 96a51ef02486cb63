"""Boundary quadrature on the sphere, Cauchy data and the Alessandrini quantity I."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import map_coordinates, spline_filter

from .faddeev import RhoParam
from .fields import GridField, _mask_for, spectral_derivative
from .geometry import BallDomain, PlaneFrame, SurfacePatch


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Gauss-Legendre (in cos theta) x uniform (in phi) product rule on the sphere."""

    nodes: np.ndarray       # (M, 3) world points
    weights: np.ndarray     # (M,) area weights
    normals: np.ndarray     # (M, 3) outward unit normals
    dom: BallDomain

    @classmethod
    def sphere(cls, dom: BallDomain, n_theta: int = 64, n_phi: int = 128) -> "BoundaryMesh":
        if n_theta < 2 or n_phi < 3:
            raise ValueError("need n_theta >= 2 and n_phi >= 3")
        x, w = np.polynomial.legendre.leggauss(n_theta)
        phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
        st = np.sqrt(1 - x * x)
        n = np.stack([
            (st[:, None] * np.cos(phi)[None, :]).ravel(),
            (st[:, None] * np.sin(phi)[None, :]).ravel(),
            np.repeat(x, n_phi),
        ], axis=1)
        R = dom.radius
        wts = np.repeat(w, n_phi) * (2 * np.pi / n_phi) * R * R
        return cls(np.asarray(dom.center) + R * n, wts, n, dom)

    @property
    def size(self) -> int:
        return len(self.weights)


@dataclass(frozen=True, eq=False)
class CauchyData:
    """Trace and normal derivative at mesh nodes.  ``normals`` and ``points``
    are expressed in the coordinates of the field they came from."""

    trace: np.ndarray
    normal_derivative: np.ndarray
    points: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.trace.shape != self.normal_derivative.shape:
            raise ValueError("trace and normal derivative differ in length")
        if not (np.all(np.isfinite(self.trace)) and np.all(np.isfinite(self.normal_derivative))):
            raise ValueError("Cauchy data contain NaN or Inf")


class StencilOutOfBox(ValueError):
    pass


def _interp(coeffs_re, coeffs_im, f: GridField, pts: np.ndarray, order: int) -> np.ndarray:
    idx = ((pts + f.L) / f.h).T
    kw = dict(order=order, mode="grid-wrap", prefilter=False)
    return map_coordinates(coeffs_re, idx, **kw) + 1j * map_coordinates(coeffs_im, idx, **kw)


def extract_cauchy(v: GridField, mesh: BoundaryMesh, dom: BallDomain, frame: Optional[PlaneFrame] = None,
                   order: int = 5, step: Optional[float] = None, derivative: str = "fd") -> CauchyData:
    """Trace by spline interpolation of ``order`` (1 = trilinear) and normal
    derivative either by the 4th-order central difference along the normal with
    ``step`` (default h/2) or by interpolating the spectral gradient.

    With ``frame`` the field lives on that frame's grid and nodes are mapped into it.
    """
    pts = mesh.nodes if frame is None else frame.to_frame(mesh.nodes)
    nrm = mesh.normals if frame is None else mesh.normals @ frame.R
    h = v.h
    step = 0.5 * h if step is None else float(step)
    reach = 2 * step if derivative == "fd" else 0.0
    if np.any(np.abs(pts) + reach > v.L - 2 * h):
        raise StencilOutOfBox("boundary nodes lie within 2h of the box edge; enlarge L")
    if order > 1:
        cr = spline_filter(v.values.real, order=order, mode="grid-wrap")
        ci = spline_filter(v.values.imag, order=order, mode="grid-wrap")
    else:
        cr, ci = v.values.real, v.values.imag
    trace = _interp(cr, ci, v, pts, order)
    if derivative == "fd":
        offs = np.array([-2, -1, 1, 2]) * step
        allp = np.concatenate([pts + o * nrm for o in offs])
        vals = _interp(cr, ci, v, allp, order).reshape(4, -1)
        dn = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * step)
    elif derivative == "spectral":
        dn = np.zeros(len(pts), complex)
        for a in range(3):
            mi = [0, 0, 0]
            mi[a] = 1
            g = spectral_derivative(v, mi)
            if order > 1:
                gr = spline_filter(g.values.real, order=order, mode="grid-wrap")
                gi = spline_filter(g.values.imag, order=order, mode="grid-wrap")
            else:
                gr, gi = g.values.real, g.values.imag
            dn += _interp(gr, gi, g, pts, order) * nrm[:, a]
    else:
        raise ValueError("derivative must be 'fd' or 'spectral'")
    return CauchyData(trace, dn, pts, nrm)


def cauchy_equal_on(cd1: CauchyData, cd2: CauchyData, patch: SurfacePatch, mesh: BoundaryMesh,
                    tol_trace: float, tol_deriv: float):
    """``(equal, max trace deviation, max derivative deviation)`` over nodes in the patch."""
    if cd1.trace.shape != cd2.trace.shape or cd1.trace.shape[0] != mesh.size:
        raise ValueError("Cauchy data must live on the same mesh")
    sel = patch.contains(mesh.nodes, mesh.dom)
    if not sel.any():
        raise ValueError("patch contains no mesh nodes")
    dt = float(np.abs(cd1.trace[sel] - cd2.trace[sel]).max())
    dd = float(np.abs(cd1.normal_derivative[sel] - cd2.normal_derivative[sel]).max())
    return (dt <= tol_trace and dd <= tol_deriv), dt, dd


def I_boundary(cd1: CauchyData, cd2: CauchyData, mesh: BoundaryMesh) -> complex:
    """``int dv1/dn v2 - v1 dv2/dn`` over the sphere."""
    integrand = cd1.normal_derivative * cd2.trace - cd1.trace * cd2.normal_derivative
    return complex(np.sum(mesh.weights * integrand))


def I_volume(q1: Optional[GridField], q2: Optional[GridField], v1: GridField, v2: GridField, dom) -> complex:
    """``int_Omega (q2 - q1) v1 v2`` (sharp-mask Riemann sum)."""
    v1._check(v2)
    dq = np.zeros(v1.values.shape, complex)
    if q2 is not None:
        dq = dq + q2.values
    if q1 is not None:
        dq = dq - q1.values
    m = _mask_for(v1, dom)
    p = dq * v1.values * v2.values
    total = p.sum() if m is None else p[m].sum()
    return complex(total * v1.h**3)


def I_conjugated(cd1: CauchyData, cd2: CauchyData, rho: RhoParam, mesh: BoundaryMesh,
                 normals: Optional[np.ndarray] = None) -> complex:
    """Boundary form after the exponentials cancel:
    ``int du1/dn u2 - u1 du2/dn + 2 (rho.n) u1 u2`` with ``rho`` the parameter of the first factor.

    ``normals`` default to those stored with ``cd1`` (the frame of the fields), in
    which ``rho = sign s (e1 + i e2)``.
    """
    n = normals if normals is not None else (cd1.normals if cd1.normals is not None else mesh.normals)
    rv = rho.frame_vector()
    rn = n @ rv
    integrand = (cd1.normal_derivative * cd2.trace - cd1.trace * cd2.normal_derivative
                 + 2.0 * rn * cd1.trace * cd2.trace)
    return complex(np.sum(mesh.weights * integrand))


CAUCHY_COLUMNS = ("x", "y", "z", "nx", "ny", "nz", "weight", "re_trace", "im_trace", "re_dn", "im_dn")


def write_cauchy_csv(path, cd: CauchyData, mesh: BoundaryMesh) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CAUCHY_COLUMNS)
        for i in range(mesh.size):
            row = (*mesh.nodes[i], *mesh.normals[i], mesh.weights[i], cd.trace[i].real, cd.trace[i].imag,
                   cd.normal_derivative[i].real, cd.normal_derivative[i].imag)
            w.writerow([repr(float(x)) for x in row])
