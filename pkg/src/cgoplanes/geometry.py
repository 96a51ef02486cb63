"""Ball domains, affine two-planes in R^3, boundary patches and plane sampling."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import map_coordinates

from .fields import GridField, mesh

_ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class BallDomain:
    """Closed ball of radius ``radius`` inside the periodic box ``[-L, L)^3``."""

    radius: float = 1.0
    L: float = 2.5
    N: int = 128
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not self.radius < self.L:
            raise ValueError(f"ball of radius {self.radius} does not fit strictly inside box half-width {self.L}")
        if self.L < 2 * self.radius:
            raise ValueError(f"padding guard violated: need L >= 2*radius, got L={self.L}, radius={self.radius}")
        if self.N < 32 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 32, got {self.N}")
        if max(abs(c) for c in self.center) + self.radius >= self.L:
            raise ValueError("ball leaves the box")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    def mask(self) -> np.ndarray:
        X, Y, Z = mesh(self.N, self.L)
        c = self.center
        return (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2 <= self.radius**2

    def contains(self, pts) -> np.ndarray:
        p = np.asarray(pts, float) - np.asarray(self.center)
        return np.einsum("...i,...i->...", p, p) <= self.radius**2


def orthonormal_pair(normal) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (omega_R, omega_I) spanning the plane orthogonal to ``normal``,
    oriented so that (omega_R, omega_I, normal) is right handed."""
    n = np.asarray(normal, float)
    n = n / np.linalg.norm(n)
    a = np.zeros(3)
    a[int(np.argmin(np.abs(n)))] = 1.0
    w_r = a - (a @ n) * n
    w_r /= np.linalg.norm(w_r)
    w_i = np.cross(n, w_r)
    return w_r, w_i / np.linalg.norm(w_i)


@dataclass(frozen=True, eq=False)
class Plane:
    """Affine two-plane ``base_point + span{omega_R, omega_I}``."""

    omega_R: np.ndarray
    omega_I: np.ndarray
    base_point: np.ndarray

    def __post_init__(self):
        wr = np.asarray(self.omega_R, float)
        wi = np.asarray(self.omega_I, float)
        if abs(np.linalg.norm(wr) - 1) > 1e-9 or abs(np.linalg.norm(wi) - 1) > 1e-9:
            raise ValueError("frame vectors must be unit length")
        if abs(wr @ wi) > 1e-9:
            raise ValueError("frame vectors must be orthogonal")
        # re-orthonormalize to machine precision
        wr = wr / np.linalg.norm(wr)
        wi = wi - (wi @ wr) * wr
        wi = wi / np.linalg.norm(wi)
        object.__setattr__(self, "omega_R", wr)
        object.__setattr__(self, "omega_I", wi)
        object.__setattr__(self, "base_point", np.asarray(self.base_point, float))

    @classmethod
    def from_normal(cls, normal, offset: float, center=(0.0, 0.0, 0.0)) -> "Plane":
        """Plane ``{x : (x - center).n = offset}`` with the canonical frame."""
        n = np.asarray(normal, float)
        n = n / np.linalg.norm(n)
        wr, wi = orthonormal_pair(n)
        return cls(wr, wi, np.asarray(center, float) + offset * n)

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.omega_R, self.omega_I)

    def offset(self, center=(0.0, 0.0, 0.0)) -> float:
        """Signed distance of the plane from ``center`` along :attr:`normal`."""
        return float((self.base_point - np.asarray(center, float)) @ self.normal)

    def normalized(self, center=(0.0, 0.0, 0.0)) -> "Plane":
        """Same plane with base point moved to the point closest to ``center``."""
        c = np.asarray(center, float)
        return Plane(self.omega_R, self.omega_I, c + self.offset(c) * self.normal)

    def rotation(self) -> np.ndarray:
        """Columns omega_R, omega_I, normal: maps frame coordinates to world directions."""
        return np.column_stack([self.omega_R, self.omega_I, self.normal])

    def key(self, center=(0.0, 0.0, 0.0), ndigits: int = 12) -> tuple:
        p = self.normalized(center)
        return tuple(np.round(np.concatenate([p.omega_R, p.omega_I, p.base_point]), ndigits))


@dataclass(frozen=True)
class Circle:
    center: np.ndarray
    radius: float
    e1: np.ndarray
    e2: np.ndarray

    def points(self, n: int) -> np.ndarray:
        t = 2 * np.pi * np.arange(n) / n
        return self.center + self.radius * (np.cos(t)[:, None] * self.e1 + np.sin(t)[:, None] * self.e2)


@dataclass(frozen=True)
class SurfacePatch:
    """Geodesic cap on the sphere about ``center_direction``."""

    center_direction: np.ndarray
    angular_radius: float

    def __post_init__(self):
        d = np.asarray(self.center_direction, float)
        object.__setattr__(self, "center_direction", d / np.linalg.norm(d))
        if not 0 < self.angular_radius <= np.pi:
            raise ValueError("angular_radius must lie in (0, pi]")

    def angle_to(self, pts, dom: BallDomain) -> np.ndarray:
        p = np.asarray(pts, float) - np.asarray(dom.center)
        u = p / np.linalg.norm(p, axis=-1, keepdims=True)
        return np.arccos(np.clip(u @ self.center_direction, -1.0, 1.0))

    def contains(self, pts, dom: BallDomain, strict: bool = False) -> np.ndarray:
        if self.angular_radius >= np.pi:
            return np.ones(np.shape(pts)[:-1], bool)
        a = self.angle_to(pts, dom)
        return a < self.angular_radius if strict else a <= self.angular_radius


def plane_distance(plane: Plane, dom: BallDomain) -> float:
    return abs(plane.offset(dom.center))


def gamma_curve(plane: Plane, dom: BallDomain) -> Optional[Circle]:
    """The circle where the plane cuts the sphere, or ``None`` if it misses or is tangent."""
    d = plane.offset(dom.center)
    if abs(d) >= dom.radius:
        return None
    c = np.asarray(dom.center) + d * plane.normal
    return Circle(c, float(np.sqrt(dom.radius**2 - d * d)), plane.omega_R, plane.omega_I)


class PlaneMissesDomain(ValueError):
    pass


def patch_containing_gamma(plane: Plane, dom: BallDomain, margin: float) -> SurfacePatch:
    """Smallest cap about the normal foot direction whose interior holds the
    boundary circle with ``margin`` radians to spare."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    if gamma_curve(plane, dom) is None:
        raise PlaneMissesDomain("the plane does not cut the domain boundary")
    d = plane.offset(dom.center)
    foot = plane.normal if d >= 0 else -plane.normal
    theta = float(np.arccos(abs(d) / dom.radius))
    return SurfacePatch(foot, min(theta + margin, np.pi))


def fibonacci_hemisphere(count: int) -> np.ndarray:
    """``count`` unit vectors with nonnegative z from a Fibonacci lattice."""
    i = np.arange(count) + 0.5
    z = 1.0 - i / count
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(count)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def sample_offsets(count: int, radius: float) -> np.ndarray:
    """``count`` equispaced signed offsets strictly inside (-radius, radius)."""
    if count < 1:
        raise ValueError("offsets must be >= 1")
    if count % 2 == 0:
        raise ValueError("offsets must be odd so that offset 0 is sampled")
    return radius * (2.0 * (np.arange(count) + 1) / (count + 1) - 1.0)


def sample_planes(dirs: int, offsets: int, dom: BallDomain) -> list[Plane]:
    """Planes for all (direction, offset) pairs, directions outer, offsets inner."""
    if dirs < 1:
        raise ValueError("dirs must be >= 1")
    normals = fibonacci_hemisphere(dirs) if dirs > 1 else np.array([[0.0, 0.0, 1.0]])
    offs = sample_offsets(offsets, dom.radius)
    return [Plane.from_normal(n, p, dom.center) for n in normals for p in offs]


def hemisphere_covering_radius(normals, probes: int = 20000) -> float:
    """Largest angle from a probe direction to the nearest normal, with n ~ -n."""
    n = np.asarray(normals, float)
    n = n / np.linalg.norm(n, axis=1, keepdims=True)
    p = fibonacci_hemisphere(probes)
    c = np.abs(p @ n.T).max(axis=1)
    return float(np.arccos(np.clip(c, -1, 1)).max())


def cap_depth(r: float, R: float) -> float:
    """Depth ``R - sqrt(R^2 - r^2)`` reached by a plane whose boundary circle has radius r."""
    if r < 0 or R <= 0:
        raise ValueError("need r >= 0 and R > 0")
    if r > R:
        raise ValueError(f"chord radius {r} exceeds ball radius {R}")
    return float(R - np.sqrt(R * R - r * r))


@dataclass(frozen=True, eq=False)
class PlaneFrame:
    """Coordinates adapted to a plane: ``x = center + R @ y`` with
    R = [omega_R | omega_I | normal]; the plane is ``y3 = offset``."""

    plane: Plane
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def R(self) -> np.ndarray:
        return self.plane.rotation()

    @property
    def offset(self) -> float:
        return self.plane.offset(self.center)

    def to_world(self, y) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(y) @ self.R.T

    def to_frame(self, x) -> np.ndarray:
        return (np.asarray(x) - np.asarray(self.center)) @ self.R

    def world_coords(self, N: int, L: float):
        """World coordinates (three arrays) of every frame-grid node."""
        Y1, Y2, Y3 = mesh(N, L)
        R = self.R
        c = np.asarray(self.center)
        return tuple(c[i] + R[i, 0] * Y1 + R[i, 1] * Y2 + R[i, 2] * Y3 for i in range(3))

    def sample(self, func, N: int, L: float) -> GridField:
        """Evaluate a callable ``func(x1, x2, x3)`` of world coordinates on the frame grid."""
        X = self.world_coords(N, L)
        return GridField(np.broadcast_to(func(*X), (N, N, N)).astype(complex), L)

    def resample(self, f: GridField) -> GridField:
        """Trilinear resampling of a world-frame field onto the frame grid (periodic)."""
        X = self.world_coords(f.N, f.L)
        idx = np.stack([(np.broadcast_to(x, (f.N,) * 3) + f.L) / f.h for x in X])
        re = map_coordinates(f.values.real, idx, order=1, mode="grid-wrap")
        im = map_coordinates(f.values.imag, idx, order=1, mode="grid-wrap")
        return GridField(re + 1j * im, f.L)
