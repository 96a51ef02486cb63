"""Plane integrals (the Radon transform on R^3), their domain-relative and slab
variants, filtered backprojection, support localization and holomorphic moments.

Integrands may be :class:`GridField` samples (interpolated at quadrature nodes)
or callables ``f(x1, x2, x3)`` of world coordinates (evaluated exactly).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np
from scipy.ndimage import map_coordinates

from .fields import GridField, mesh
from .geometry import BallDomain, Plane

Integrand = Union[GridField, Callable]


@dataclass(frozen=True)
class PlaneSample:
    plane: Plane
    value: complex

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("plane sample value must be finite")


def sample_points(f: Integrand, pts: np.ndarray, order: int = 1) -> np.ndarray:
    """Values of ``f`` at world points ``pts`` (..., 3)."""
    pts = np.asarray(pts, float)
    if isinstance(f, GridField):
        idx = np.moveaxis((pts + f.L) / f.h, -1, 0).reshape(3, -1)
        re = map_coordinates(f.values.real, idx, order=order, mode="grid-wrap")
        im = map_coordinates(f.values.imag, idx, order=order, mode="grid-wrap")
        return (re + 1j * im).reshape(pts.shape[:-1])
    out = f(pts[..., 0], pts[..., 1], pts[..., 2])
    return np.broadcast_to(np.asarray(out, complex), pts.shape[:-1])


def plane_integral(f: GridField, plane: Plane, order: int = 1) -> complex:
    """Tensor rule with step h over the part of the plane inside the box."""
    L, h = f.L, f.h
    c = plane.base_point
    m = int(np.ceil(np.sqrt(3.0) * L / h)) + 1
    t = h * np.arange(-m, m + 1)
    A, B = np.meshgrid(t, t, indexing="ij")
    pts = c + A[..., None] * plane.omega_R + B[..., None] * plane.omega_I
    inside = np.all((pts >= -L) & (pts < L), axis=-1)
    vals = sample_points(f, pts[inside], order)
    return complex(vals.sum() * h * h)


def disc_rule(radius: float, n_r: int, n_t: int):
    """Polar product rule on a disc: Gauss-Legendre in r (weight r dr), uniform in angle."""
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * radius * (x + 1.0)
    wr = 0.5 * radius * w * r
    th = 2.0 * np.pi * np.arange(n_t) / n_t
    return r, th, wr * (2.0 * np.pi / n_t)


def _disc_nodes(plane: Plane, dom: BallDomain, h: float | None):
    d = plane.offset(dom.center)
    if abs(d) >= dom.radius:
        return None
    rad = float(np.sqrt(dom.radius**2 - d * d))
    step = h if h is not None else dom.h
    n_r = max(16, int(np.ceil(rad / step)))
    n_t = max(32, int(np.ceil(2 * np.pi * rad / step)))
    r, th, w = disc_rule(rad, n_r, n_t)
    foot = np.asarray(dom.center) + d * plane.normal
    a = r[:, None] * np.cos(th)[None, :]
    b = r[:, None] * np.sin(th)[None, :]
    pts = foot + a[..., None] * plane.omega_R + b[..., None] * plane.omega_I
    return pts, a + 1j * b, np.broadcast_to(w[:, None], a.shape)


def relative_plane_integral(f: Integrand, plane: Plane, dom: BallDomain, order: int = 1) -> complex:
    """Integral of ``f`` over the disc where the plane meets the ball (polar rule)."""
    nodes = _disc_nodes(plane, dom, f.h if isinstance(f, GridField) else None)
    if nodes is None:
        return 0j
    pts, _, w = nodes
    return complex(np.sum(sample_points(f, pts, order) * w))


def holomorphic_moment(q: Integrand, plane: Plane, k: int, dom: BallDomain, order: int = 1) -> complex:
    """``int_{plane & ball} q z^k`` with ``z`` the complex in-plane coordinate about the foot point."""
    if k < 0:
        raise ValueError("k must be >= 0")
    nodes = _disc_nodes(plane, dom, q.h if isinstance(q, GridField) else None)
    if nodes is None:
        return 0j
    pts, z, w = nodes
    return complex(np.sum(sample_points(q, pts, order) * z**k * w))


class UnderResolved(ValueError):
    pass


def slab_estimate(f: Integrand, plane: Plane, dom: BallDomain, eps_list: Sequence[float],
                  h: float | None = None, n_gauss: int = 16) -> dict:
    """Slab averages ``(2 eps)^-1 int_{ball, |dist| < eps} f`` and their
    Richardson extrapolation to eps = 0 (polynomial in eps^2)."""
    h = h if h is not None else (f.h if isinstance(f, GridField) else dom.h)
    eps = np.asarray(list(eps_list), float)
    if eps.size == 0:
        raise ValueError("eps_list is empty")
    if np.any(eps < 2 * h):
        raise UnderResolved(f"slab half-widths {eps[eps < 2 * h].tolist()} are below 2h = {2 * h:.4g}")
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    d0 = plane.offset(dom.center)
    vals = []
    for e in eps:
        acc = 0j
        for xi, wi in zip(x, w):
            p = Plane.from_normal(plane.normal, d0 + e * xi, dom.center)
            acc += 0.5 * wi * relative_plane_integral(f, p, dom)
        vals.append(acc)
    vals = np.asarray(vals)
    deg = min(len(eps) - 1, 2)
    if deg == 0:
        limit = complex(vals[0])
    else:
        V = np.vander(eps**2, deg + 1, increasing=True)
        cr = np.linalg.lstsq(V, vals.real, rcond=None)[0][0]
        ci = np.linalg.lstsq(V, vals.imag, rcond=None)[0][0]
        limit = complex(cr, ci)
    return {"eps": eps.tolist(), "values": vals.tolist(), "limit": limit}


# ------------------------------------------------------------------ sample tables

def _direction_key(n: np.ndarray) -> tuple:
    return tuple(np.round(n, 10))


def organize(samples: Sequence[PlaneSample], dom: BallDomain):
    """Group samples by unit normal (n ~ -n with offset negated).

    Returns ``(normals (M, 3), offsets (K,), values (M, K))``; all directions
    must share the same sorted offset list.
    """
    groups: dict = {}
    order = []
    for smp in samples:
        n = smp.plane.normal
        p = smp.plane.offset(dom.center)
        # canonical hemisphere: first nonzero coordinate from the top positive
        for c in n[::-1]:
            if abs(c) > 1e-12:
                if c < 0:
                    n, p = -n, -p
                break
        key = _direction_key(n)
        if key not in groups:
            groups[key] = (n, {})
            order.append(key)
        groups[key][1][round(p, 10)] = smp.value
    if not groups:
        raise ValueError("no samples")
    offs0 = sorted(groups[order[0]][1])
    for key in order:
        if sorted(groups[key][1]) != offs0:
            raise ValueError("ragged sampling: directions carry different offset sets")
    normals = np.array([groups[k][0] for k in order])
    offsets = np.array(offs0)
    values = np.array([[groups[k][1][p] for p in offs0] for k in order], complex)
    return normals, offsets, values


def radon_invert_fbp(samples: Sequence[PlaneSample], dom: BallDomain, N: int | None = None,
                     L: float | None = None, apodize: bool = True, upsample: int = 8,
                     region: str = "domain", blur_kernel: Callable | None = None,
                     blur_reg: float = 1e-2) -> GridField:
    """Three-dimensional Radon inversion ``f = -(8 pi^2)^-1 int_{S^2} d_p^2 Rf``.

    Normals are taken as equal-weight nodes on the hemisphere; the data are the
    domain-relative transform, so they vanish for |p| >= R and are zero padded.
    The second derivative is applied in Fourier space (``-k^2``, times a cosine
    window when ``apodize``).

    ``blur_kernel(t)`` optionally names a unit-mass weight the data were
    averaged against along the normal (data = Rf convolved with it); it is then
    divided out with a Tikhonov-regularized inverse, ``conj(W) / (|W|^2 + reg^2)``.
    """
    N = N or dom.N
    L = L or dom.L
    normals, offsets, values = organize(samples, dom)
    M, K = values.shape
    if K < 3:
        raise ValueError("need at least 3 offsets per direction")
    dp = np.diff(offsets)
    if not np.allclose(dp, dp[0], rtol=1e-6, atol=1e-12):
        raise ValueError("offsets must be equispaced")
    dp = float(dp[0])
    # pad to a power-of-two length covering well beyond the domain
    reach = np.sqrt(3.0) * L
    n_side = int(np.ceil((reach - offsets[-1]) / dp)) + 1
    n_tot = 1 << int(np.ceil(np.log2(K + 2 * n_side)))
    lo = offsets[0] - dp * ((n_tot - K) // 2)
    data = np.zeros((M, n_tot), complex)
    data[:, (n_tot - K) // 2:(n_tot - K) // 2 + K] = values
    k = 2 * np.pi * np.fft.fftfreq(n_tot, d=dp)
    filt = -(k**2)
    if apodize:
        filt = filt * np.cos(0.5 * np.pi * k / (np.pi / dp))
    if blur_kernel is not None:
        t = dp * (np.arange(n_tot) - n_tot // 2)
        W = np.fft.fft(np.fft.ifftshift(np.asarray(blur_kernel(t), float))) * dp
        filt = filt * np.conj(W) / (np.abs(W) ** 2 + blur_reg**2)
    # zero-padded spectrum gives the filtered data on a finer offset grid
    F = np.fft.fft(data, axis=1) * filt
    n_fine = n_tot * upsample
    Ff = np.zeros((M, n_fine), complex)
    half = n_tot // 2
    Ff[:, :half] = F[:, :half]
    Ff[:, n_fine - half:] = F[:, half:]
    g = np.fft.ifft(Ff, axis=1) * upsample
    p_fine = lo + (dp / upsample) * np.arange(n_fine)

    X, Y, Z = mesh(N, L)
    c = np.asarray(dom.center)
    Xb, Yb, Zb = np.broadcast_arrays(X - c[0], Y - c[1], Z - c[2])
    if region == "domain":
        sel = Xb**2 + Yb**2 + Zb**2 <= (dom.radius + 2 * (2 * L / N)) ** 2
    elif region == "box":
        sel = np.ones(Xb.shape, bool)
    else:
        raise ValueError("region must be 'domain' or 'box'")
    P = np.stack([Xb[sel], Yb[sel], Zb[sel]], axis=-1)
    acc = np.zeros(P.shape[0], complex)
    for j in range(M):
        pj = P @ normals[j]
        acc += np.interp(pj, p_fine, g[j].real, left=0.0, right=0.0)
        acc += 1j * np.interp(pj, p_fine, g[j].imag, left=0.0, right=0.0)
    # -(8 pi^2)^-1 * 2 (both hemispheres) * (2 pi / M) per node
    acc *= -1.0 / (2.0 * np.pi * M)
    out = np.zeros((N, N, N), complex)
    out[sel] = acc
    return GridField(out, L)


# ------------------------------------------------------------------ localization

@dataclass(frozen=True)
class SupportRegion:
    """Intersection of slabs ``lo_j <= (x - c).n_j <= hi_j`` with the domain ball."""

    normals: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    dom: BallDomain

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.hi < self.lo))

    def signed_distance(self, pts) -> np.ndarray:
        """Max constraint violation; <= 0 inside (a lower bound on the true distance)."""
        p = np.asarray(pts, float) - np.asarray(self.dom.center)
        proj = p @ self.normals.T
        viol = np.maximum(proj - self.hi, self.lo - proj)
        ball = np.linalg.norm(p, axis=-1) - self.dom.radius
        return np.maximum(viol.max(axis=-1), ball)

    def contains(self, pts) -> np.ndarray:
        return self.signed_distance(pts) <= 0

    def mask(self, N: int | None = None, L: float | None = None) -> np.ndarray:
        N = N or self.dom.N
        L = L or self.dom.L
        if self.is_empty:
            return np.zeros((N, N, N), bool)
        X, Y, Z = mesh(N, L)
        pts = np.stack(np.broadcast_arrays(X, Y, Z), axis=-1)
        return self.contains(pts)

    def max_radius(self, N: int | None = None, L: float | None = None) -> float:
        """Largest distance from the center over grid nodes in the region (0 if empty)."""
        m = self.mask(N, L)
        if not m.any():
            return 0.0
        N = N or self.dom.N
        L = L or self.dom.L
        X, Y, Z = mesh(N, L)
        c = self.dom.center
        r2 = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2
        return float(np.sqrt(np.broadcast_to(r2, m.shape)[m].max()))

    def tube_depth(self, N: int | None = None, L: float | None = None) -> float:
        """Certified distance from the region to the boundary sphere."""
        if self.is_empty:
            return self.dom.radius
        return max(0.0, self.dom.radius - self.max_radius(N, L))

    def width_along(self, direction, N: int | None = None, L: float | None = None) -> float:
        m = self.mask(N, L)
        if not m.any():
            return 0.0
        N = N or self.dom.N
        L = L or self.dom.L
        X, Y, Z = mesh(N, L)
        u = np.asarray(direction, float)
        u = u / np.linalg.norm(u)
        proj = np.broadcast_to(u[0] * X + u[1] * Y + u[2] * Z, m.shape)[m]
        return float(proj.max() - proj.min())


def support_localize(samples: Sequence[PlaneSample], dom: BallDomain, vanish_tol: float) -> SupportRegion:
    """Half-space localization from vanishing plane integrals.

    For every direction, walk inward from each end of the sorted offsets while
    the values vanish (``|value| < vanish_tol``) and the offsets stay contiguous.
    If all sampled planes at offsets ``>= p`` vanish and the samples reach the
    boundary, the support lies in ``x.n <= p`` (support theorem at the sampling
    resolution).  A run stops at a non-vanishing sample or at a gap in the
    sampled offsets; a direction that is contiguous and vanishes everywhere
    yields an empty region.
    """
    normals, offsets, values = organize(samples, dom)
    small = np.abs(values) < vanish_tol
    M, K = small.shape
    steps = np.diff(offsets)
    # a step well above the finest spacing marks an unsampled gap
    gap_after = np.zeros(K, bool)
    if K > 1:
        gap_after[:-1] = steps > 1.5 * steps.min()
    lo = np.full(M, -dom.radius)
    hi = np.full(M, dom.radius)
    for j in range(M):
        s = small[j]
        i = K - 1
        while i >= 0 and s[i]:
            hi[j] = offsets[i]
            if i == 0 or gap_after[i - 1]:
                break
            i -= 1
        i = 0
        while i < K and s[i]:
            lo[j] = offsets[i]
            if i == K - 1 or gap_after[i]:
                break
            i += 1
        if s.all() and not gap_after.any():
            lo[j], hi[j] = 1.0, -1.0
    return SupportRegion(normals, lo, hi, dom)


# ------------------------------------------------------------------ CSV

SAMPLE_COLUMNS = ("nx", "ny", "nz", "offset", "re", "im")


def write_samples(path, samples: Sequence[PlaneSample], dom: BallDomain) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for smp in samples:
            n = smp.plane.normal
            w.writerow([repr(float(v)) for v in (*n, smp.plane.offset(dom.center),
                                                   complex(smp.value).real, complex(smp.value).imag)])


def read_samples(path, dom: BallDomain) -> list[PlaneSample]:
    out = []
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            n = np.array([float(row["nx"]), float(row["ny"]), float(row["nz"])])
            p = Plane.from_normal(n, float(row["offset"]), dom.center)
            out.append(PlaneSample(p, complex(float(row["re"]), float(row["im"]))))
    return out
