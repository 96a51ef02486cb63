"""Smooth cutoffs chi_0, psi_1, chi_1, chi_3 used to build concentrated amplitudes.

With n = 3 the transverse variable x'' is one dimensional, so chi_1 and chi_3 are
profiles in the plane-normal coordinate and chi_0 is radial in the in-plane pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad


def _bump_core(t):
    t = np.asarray(t, float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


@lru_cache(maxsize=None)
def psi1_constant() -> float:
    """c with ``int (c exp(-1/(1-t^2)))^2 dt = 1``."""
    val, _ = quad(lambda t: np.exp(-2.0 / (1.0 - t * t)), -1.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(1.0 / np.sqrt(val))


def make_psi1():
    """The normalized exponential bump supported in [-1, 1]."""
    c = psi1_constant()

    def psi1(t):
        return c * _bump_core(t)

    return psi1


def _transition(t):
    # C-infinity monotone step: 0 for t <= 0, 1 for t >= 1
    t = np.asarray(t, float)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def smoothstep(t):
    """C-infinity step, 0 for t <= 0 and 1 for t >= 1."""
    return _transition(t)


class SupportError(ValueError):
    pass


@dataclass(frozen=True)
class BumpSpec:
    kind: str
    core_radius: float
    width: float
    normalization: float = 1.0

    @property
    def support_radius(self) -> float:
        return self.core_radius + self.width


@dataclass(frozen=True)
class Chi1:
    """``delta^{-1/2} psi_1((t - x0pp)/delta)``; unit L2 norm for every delta."""

    delta: float
    x0pp: float = 0.0

    def __call__(self, t):
        return self.delta**-0.5 * make_psi1()((np.asarray(t) - self.x0pp) / self.delta)

    def second_derivative(self, t):
        # psi(u) = c exp(-1/(1-u^2)); closed form of psi''
        u = (np.asarray(t, float) - self.x0pp) / self.delta
        out = np.zeros_like(u)
        m = np.abs(u) < 1
        um = u[m]
        w = 1.0 - um * um
        g1 = -2.0 * um / w**2
        g2 = -(2.0 * w**2 + 8.0 * um * um * w) / w**4
        out[m] = psi1_constant() * np.exp(-1.0 / w) * (g1 * g1 + g2)
        return self.delta**-2.5 * out

    @property
    def spec(self) -> BumpSpec:
        return BumpSpec("exponential-bump", 0.0, self.delta, psi1_constant())


def make_chi1(delta: float, x0pp: float = 0.0, L: float | None = None) -> Chi1:
    if delta <= 0:
        raise ValueError("delta must be positive")
    if L is not None and (x0pp - delta < -L or x0pp + delta >= L):
        raise SupportError(f"chi_1 support [{x0pp - delta}, {x0pp + delta}] leaves the box [-{L}, {L})")
    return Chi1(float(delta), float(x0pp))


@dataclass(frozen=True)
class Chi3:
    """Plateau 1 on [x0pp - delta, x0pp + delta], vanishing beyond distance 2 delta."""

    delta: float
    x0pp: float = 0.0

    def __call__(self, t):
        r = np.abs(np.asarray(t, float) - self.x0pp) / self.delta
        return 1.0 - _transition(r - 1.0)


def make_chi3(delta: float, x0pp: float = 0.0, L: float | None = None) -> Chi3:
    if delta <= 0:
        raise ValueError("delta must be positive")
    if L is not None and (x0pp - 2 * delta < -L or x0pp + 2 * delta >= L):
        raise SupportError(f"chi_3 support [{x0pp - 2 * delta}, {x0pp + 2 * delta}] leaves the box [-{L}, {L})")
    return Chi3(float(delta), float(x0pp))


@dataclass(frozen=True)
class Chi0:
    """Radial planar cutoff: 1 on |x'| <= R_cut, 0 on |x'| >= R_cut + width.

    ``weight`` holds polynomial coefficients in z = x1 + i x2 (lowest degree
    first); the default (1,) gives the plain real cutoff.
    """

    R_cut: float
    width: float
    weight: tuple = (1.0,)
    C0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "C0", _chi0_norm(self.R_cut, self.width))

    def radial(self, r):
        return 1.0 - _transition((np.asarray(r, float) - self.R_cut) / self.width)

    def __call__(self, x1, x2):
        base = self.radial(np.hypot(x1, x2))
        if tuple(self.weight) == (1.0,):
            return base
        z = np.asarray(x1) + 1j * np.asarray(x2)
        return np.polynomial.polynomial.polyval(z, np.asarray(self.weight, complex)) * base

    @property
    def holomorphic(self) -> bool:
        return tuple(self.weight) != (1.0,)


@lru_cache(maxsize=64)
def _chi0_norm(R_cut: float, width: float) -> float:
    # C0^2 = 2 pi int_0^inf chi0(r)^2 r dr; the weight-free profile defines C0
    inner = np.pi * R_cut**2
    tail, _ = quad(lambda r: (1.0 - _transition((r - R_cut) / width)) ** 2 * 2 * np.pi * r,
                   R_cut, R_cut + width, epsabs=1e-13, epsrel=1e-12)
    return float(np.sqrt(inner + tail))


def _check_chi0(R_cut, width, R_omega, L):
    if width <= 0:
        raise ValueError("width must be positive")
    if R_omega is not None and not R_cut > R_omega:
        raise ValueError(f"R_cut={R_cut} must exceed the domain radius {R_omega}")
    if L is not None and not R_cut + width < L:
        raise SupportError(f"chi_0 support radius {R_cut + width} reaches the box half-width {L}")


def make_chi0(R_cut: float, width: float, R_omega: float | None = None, L: float | None = None) -> Chi0:
    _check_chi0(R_cut, width, R_omega, L)
    return Chi0(float(R_cut), float(width))


def make_chi0_holomorphic(weight, R_cut: float, width: float, R_omega: float | None = None,
                          L: float | None = None) -> Chi0:
    _check_chi0(R_cut, width, R_omega, L)
    w = tuple(complex(c) if np.iscomplexobj(c) else float(c) for c in np.atleast_1d(weight))
    return Chi0(float(R_cut), float(width), w)


def default_chi0(R_omega: float, L: float | None = None) -> Chi0:
    return make_chi0(1.1 * R_omega, 0.3 * R_omega, R_omega, L)
