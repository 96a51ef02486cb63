"""The conjugated Laplacian, its symbol, the tube around its zero set and the
truncated / regularized inverses.

All operators act on fields expressed in a plane-adapted frame, where the
complex frequency is ``rho = sign * s * (e1 + i e2)``.

Symbol frequencies: ``symbol_sigma`` is written for the frequency variable in
which ``sigma(xi) = -[(|xi - s e2|^2 - s^2) + 2 i s xi_1]`` is the multiplier of
``Delta + 2 rho . grad``.  For the lattice mode ``exp(+i k.x)`` of
:mod:`cgoplanes.fields` that variable is ``xi = SYMBOL_FREQ_SIGN * k``; the
convention test in the suite fails if the sign is flipped.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .fields import GridField, freq_mesh
from .geometry import Plane

log = logging.getLogger(__name__)

SYMBOL_FREQ_SIGN = -1


@dataclass(frozen=True)
class RhoParam:
    """``rho = sign * s * (omega_R + i omega_I)`` together with beta and eps0."""

    s: float
    sign: int = 1
    beta: float = 0.15
    eps0: float = 0.1
    plane: Optional[Plane] = None

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("s must be positive")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not 0 < self.beta < 0.25:
            raise ValueError(f"beta must lie in (0, 1/4), got {self.beta}")
        if not 0 < self.eps0 < 2 * (0.25 - self.beta):
            raise ValueError(f"eps0 must lie in (0, {2 * (0.25 - self.beta):.6g}) for beta={self.beta}, got {self.eps0}")

    @property
    def delta(self) -> float:
        return self.s ** (-self.beta)

    @property
    def eps(self) -> float:
        return 0.5 * (1.0 - 4.0 * self.beta)

    @property
    def tube_radius(self) -> float:
        return self.s ** (-0.5 - self.eps0)

    def flipped(self) -> "RhoParam":
        return RhoParam(self.s, -self.sign, self.beta, self.eps0, self.plane)

    def frame_vector(self) -> np.ndarray:
        return self.sign * self.s * np.array([1.0, 1.0j, 0.0])

    def vector(self) -> np.ndarray:
        if self.plane is None:
            return self.frame_vector()
        return self.sign * self.s * (self.plane.omega_R + 1j * self.plane.omega_I)


def symbol_sigma(xi, rho: RhoParam):
    """``-[(|xi - sign s e2|^2 - s^2) + 2 i sign s xi_1]``, broadcasting over the last axis."""
    xi = np.asarray(xi, float)
    s, g = rho.s, rho.sign
    x1, x2, x3 = xi[..., 0], xi[..., 1], xi[..., 2]
    return -(((x1**2 + (x2 - g * s) ** 2 + x3**2) - s * s) + 2j * g * s * x1)


def dist_sigma(xi, rho: RhoParam):
    """Distance from xi to the circle ``{xi_1 = 0, |xi - sign s e2| = s}``."""
    xi = np.asarray(xi, float)
    s, g = rho.s, rho.sign
    x1, x2, x3 = xi[..., 0], xi[..., 1], xi[..., 2]
    return np.sqrt(x1**2 + (np.hypot(x2 - g * s, x3) - s) ** 2)


def _sigma_parts(K1, K2, K3, s, g):
    x1, x2, x3 = (SYMBOL_FREQ_SIGN * K1, SYMBOL_FREQ_SIGN * K2, SYMBOL_FREQ_SIGN * K3)
    sig = -(((x1**2 + (x2 - g * s) ** 2 + x3**2) - s * s) + 2j * g * s * x1)
    dist = np.sqrt(x1**2 + (np.hypot(x2 - g * s, x3) - s) ** 2)
    return sig, dist


@lru_cache(maxsize=6)
def _lattice_tables(N: int, L: float, s: float, sign: int, eps0: float):
    K1, K2, K3 = freq_mesh(N, L)
    sig, dist = _sigma_parts(K1, K2, K3, s, sign)
    tube = dist < s ** (-0.5 - eps0)
    for a in (sig, dist, tube):
        a.setflags(write=False)
    return sig, dist, tube


def lattice_symbol(N: int, L: float, rho: RhoParam) -> np.ndarray:
    """sigma at every lattice mode of an ``N^3`` grid (FFT order)."""
    return _lattice_tables(N, L, float(rho.s), int(rho.sign), float(rho.eps0))[0]


def lattice_dist(N: int, L: float, rho: RhoParam) -> np.ndarray:
    return _lattice_tables(N, L, float(rho.s), int(rho.sign), float(rho.eps0))[1]


def lattice_tube(N: int, L: float, rho: RhoParam) -> np.ndarray:
    return _lattice_tables(N, L, float(rho.s), int(rho.sign), float(rho.eps0))[2]


def lattice_frequencies(N: int, L: float) -> np.ndarray:
    """Symbol frequencies of all lattice modes, shape (N, N, N, 3)."""
    K = freq_mesh(N, L)
    return SYMBOL_FREQ_SIGN * np.stack(np.broadcast_arrays(*K), axis=-1)


def _apply(f: GridField, m) -> GridField:
    return GridField(sfft.ifftn(m * sfft.fftn(f.values)), f.L)


def apply_Delta_rho(f: GridField, rho: RhoParam) -> GridField:
    return _apply(f, lattice_symbol(f.N, f.L, rho))


def apply_P(f: GridField, rho: RhoParam) -> GridField:
    return _apply(f, lattice_tube(f.N, f.L, rho))


def gtilde_multiplier(N: int, L: float, rho: RhoParam) -> np.ndarray:
    sig = lattice_symbol(N, L, rho)
    tube = lattice_tube(N, L, rho)
    out = np.zeros_like(sig)
    np.divide(1.0, sig, out=out, where=~tube)
    return out


def apply_Gtilde(f: GridField, rho: RhoParam) -> GridField:
    """Inverse symbol on the tube complement, zero on the tube: Delta_rho G = I - P."""
    return _apply(f, gtilde_multiplier(f.N, f.L, rho))


class NearSingularFrequency(ArithmeticError):
    pass


def apply_G_reg(f: GridField, rho: RhoParam, tau: Optional[float] = None) -> GridField:
    """``conj(sigma) / (|sigma|^2 + tau^2)`` at every lattice mode (default tau = 1e-3 s)."""
    if tau is None:
        tau = 1e-3 * rho.s
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    sig = lattice_symbol(f.N, f.L, rho)
    F = sfft.fftn(f.values)
    if tau == 0:
        bad = (np.abs(sig) < 1e-12) & (np.abs(F) > 1e-14 * max(np.abs(F).max(), 1e-300))
        if bad.any():
            i = tuple(int(v[0]) for v in np.nonzero(bad))
            xi = lattice_frequencies(f.N, f.L)[i]
            raise NearSingularFrequency(
                f"tau=0 but the field occupies xi={xi.tolist()} where |sigma|={abs(sig[i]):.3e}")
        m = np.zeros_like(sig)
        np.divide(1.0, sig, out=m, where=np.abs(sig) >= 1e-12)
    else:
        m = np.conj(sig) / (np.abs(sig) ** 2 + tau * tau)
    return GridField(sfft.ifftn(m * F), f.L)


def lower_bound_violations(N: int, L: float, rho: RhoParam, c: float = 0.1) -> dict:
    """Count lattice modes violating |sigma| >= c s dist (|xi| <= 3s) or
    |sigma| >= c |xi|^2 (|xi| >= 3s)."""
    sig = np.abs(lattice_symbol(N, L, rho))
    dist = lattice_dist(N, L, rho)
    K1, K2, K3 = freq_mesh(N, L)
    mag = np.sqrt(K1**2 + K2**2 + K3**2)
    near = mag <= 3 * rho.s
    v_near = near & (sig < c * rho.s * dist * (1 - 1e-12))
    v_far = ~near & (sig < c * mag**2 * (1 - 1e-12))
    ratio_near = np.where(near & (dist > 0), sig / np.where(dist > 0, rho.s * dist, 1.0), np.inf)
    ratio_far = np.where(~near, sig / np.where(mag > 0, mag**2, 1.0), np.inf)
    return {
        "near_violations": int(v_near.sum()),
        "far_violations": int(v_far.sum()),
        "min_ratio_near": float(ratio_near.min()),
        "min_ratio_far": float(ratio_far.min()),
        "checked": int(sig.size),
    }


def avoid_lattice_resonance(s: float, N: int, L: float, sign: int = 1, max_tries: int = 20) -> float:
    """Nudge s by one part in 1e6 until no nonzero lattice mode has |sigma| < 1e-9 s^2."""
    K1, K2, K3 = freq_mesh(N, L)
    origin = (K1 == 0) & (K2 == 0) & (K3 == 0)
    for _ in range(max_tries):
        sig, _ = _sigma_parts(K1, K2, K3, s, sign)
        if not np.any((np.abs(sig) < 1e-9 * s * s) & ~origin):
            return s
        log.warning("lattice mode on the characteristic circle at s=%r; perturbing", s)
        s = s * (1 + 1e-6)
    raise RuntimeError("could not move s off the lattice resonances")
