"""Complex scalar fields on a periodic cube and their discrete Fourier pairs.

Conventions used everywhere in the package:

* the box is ``[-L, L)^3`` sampled on ``N`` points per axis, spacing ``h = 2L/N``;
  arrays are indexed ``[i1, i2, i3]`` with ``x_j = -L + h * i_j``;
* the analysis kernel is ``exp(-i xi.x)`` and the synthesis kernel ``exp(+i xi.x)``;
* spectra are stored in numpy FFT order and scaled as a discretized unitary
  Fourier transform, ``F(xi) = (2 pi)^{-3/2} h^3 sum_x f(x) exp(-i xi.x)``, so
  that ``sum |f|^2 h^3 == sum |F|^2 (pi/L)^3`` holds exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft


@lru_cache(maxsize=16)
def axis_coords(N: int, L: float) -> np.ndarray:
    h = 2.0 * L / N
    x = -L + h * np.arange(N)
    x.setflags(write=False)
    return x


@lru_cache(maxsize=16)
def axis_freqs(N: int, L: float) -> np.ndarray:
    """Angular frequencies ``(pi/L) * m`` in FFT order."""
    k = 2.0 * np.pi * sfft.fftfreq(N, d=2.0 * L / N)
    k.setflags(write=False)
    return k


@lru_cache(maxsize=4)
def mesh(N: int, L: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = axis_coords(N, L)
    X = np.meshgrid(x, x, x, indexing="ij", sparse=True)
    return tuple(X)


@lru_cache(maxsize=4)
def freq_mesh(N: int, L: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = axis_freqs(N, L)
    return tuple(np.meshgrid(k, k, k, indexing="ij", sparse=True))


def _phase_shift(N: int, L: float) -> np.ndarray:
    # grid starts at -L rather than 0: exp(+i k L) per axis
    return np.exp(1j * axis_freqs(N, L) * L)


@lru_cache(maxsize=4)
def _shift3(N: int, L: float) -> np.ndarray:
    p = _phase_shift(N, L)
    return p[:, None, None] * p[None, :, None] * p[None, None, :]


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a complex function on the periodic ``N^3`` lattice over ``[-L, L)^3``."""

    values: np.ndarray
    L: float

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or len(set(v.shape)) != 1:
            raise ValueError(f"expected an N x N x N array, got shape {v.shape}")
        if v.shape[0] % 2:
            raise ValueError("N must be even")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains NaN or Inf")
        object.__setattr__(self, "values", v.astype(complex, copy=False))

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    def coords(self):
        return mesh(self.N, self.L)

    def same_grid(self, other: "GridField") -> bool:
        return self.N == other.N and self.L == other.L

    def _check(self, other: "GridField"):
        if not self.same_grid(other):
            raise GridMismatch(f"grids differ: (N={self.N}, L={self.L}) vs (N={other.N}, L={other.L})")

    def __add__(self, other):
        if isinstance(other, GridField):
            self._check(other)
            return GridField(self.values + other.values, self.L)
        return GridField(self.values + other, self.L)

    def __sub__(self, other):
        if isinstance(other, GridField):
            self._check(other)
            return GridField(self.values - other.values, self.L)
        return GridField(self.values - other, self.L)

    def __mul__(self, other):
        if isinstance(other, GridField):
            self._check(other)
            return GridField(self.values * other.values, self.L)
        return GridField(self.values * other, self.L)

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return GridField(-self.values, self.L)

    @classmethod
    def from_function(cls, func, N: int, L: float) -> "GridField":
        X, Y, Z = mesh(N, L)
        return cls(np.broadcast_to(func(X, Y, Z), (N, N, N)).astype(complex), L)

    @classmethod
    def zeros(cls, N: int, L: float) -> "GridField":
        return cls(np.zeros((N, N, N), complex), L)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Discrete Fourier coefficients of a :class:`GridField` (FFT order)."""

    coefficients: np.ndarray
    L: float

    @property
    def N(self) -> int:
        return self.coefficients.shape[0]

    def freqs(self):
        return freq_mesh(self.N, self.L)

    def index_of(self, xi) -> tuple[int, int, int]:
        """Array index of the lattice frequency closest to ``xi``."""
        dk = np.pi / self.L
        m = np.rint(np.asarray(xi, float) / dk).astype(int)
        return tuple(int(v) % self.N for v in m)


def _scale(N: int, L: float) -> float:
    h = 2.0 * L / N
    return h**3 / (2.0 * np.pi) ** 1.5


def fft3(values: np.ndarray, L: float) -> np.ndarray:
    """Raw-array forward transform with the module's scaling and phase."""
    N = values.shape[0]
    return sfft.fftn(values) * (_scale(N, L) * _shift3(N, L))


def ifft3(coeffs: np.ndarray, L: float) -> np.ndarray:
    N = coeffs.shape[0]
    return sfft.ifftn(coeffs / (_scale(N, L) * _shift3(N, L)))


def to_spectrum(f: GridField) -> Spectrum:
    return Spectrum(fft3(f.values, f.L), f.L)


def to_field(F: Spectrum) -> GridField:
    return GridField(ifft3(F.coefficients, F.L), F.L)


def apply_multiplier(f: GridField, m) -> GridField:
    """Fourier multiplier; phase and scale factors cancel so raw FFTs suffice."""
    return GridField(sfft.ifftn(m * sfft.fftn(f.values)), f.L)


def ball_mask(N: int, L: float, radius: float, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    X, Y, Z = mesh(N, L)
    c = np.asarray(center, float)
    return (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2 <= radius**2


def _mask_for(f: GridField, mask):
    if mask is None:
        return None
    if isinstance(mask, np.ndarray):
        return mask
    # anything with center/radius, e.g. geometry.BallDomain
    return ball_mask(f.N, f.L, mask.radius, mask.center)


def norm_l2(f: GridField, mask=None) -> float:
    """Riemann-sum L2 norm, optionally restricted to a ball or boolean mask."""
    m = _mask_for(f, mask)
    a = np.abs(f.values) ** 2
    total = a.sum() if m is None else a[m].sum()
    return float(np.sqrt(total * f.h**3))


def inner(f: GridField, g: GridField, mask=None) -> complex:
    """``sum f * conj(g) * h^3`` over the mask."""
    f._check(g)
    m = _mask_for(f, mask)
    p = f.values * np.conj(g.values)
    total = p.sum() if m is None else p[m].sum()
    return complex(total * f.h**3)


def integrate(f: GridField, mask=None) -> complex:
    m = _mask_for(f, mask)
    total = f.values.sum() if m is None else f.values[m].sum()
    return complex(total * f.h**3)


def spectral_derivative(f: GridField, multi_index) -> GridField:
    """Exact derivative of a band-limited field, ``d^a f`` with ``|a| <= 2``."""
    a = tuple(int(v) for v in multi_index)
    if len(a) != 3 or min(a) < 0 or sum(a) > 2:
        raise ValueError(f"multi-index must have three nonnegative entries summing to <= 2, got {multi_index}")
    K = freq_mesh(f.N, f.L)
    m = np.ones((1, 1, 1), complex)
    for kj, aj in zip(K, a):
        if aj:
            m = m * (1j * kj) ** aj
    return apply_multiplier(f, m)


def laplacian(f: GridField) -> GridField:
    K1, K2, K3 = freq_mesh(f.N, f.L)
    return apply_multiplier(f, -(K1**2 + K2**2 + K3**2))


def abs_derivative(f: GridField, axes=(2,)) -> GridField:
    """Multiplier ``|xi_A|`` over the listed axes (``|D''|`` for axes=(2,))."""
    K = freq_mesh(f.N, f.L)
    m = np.sqrt(sum(K[a] ** 2 for a in axes))
    return apply_multiplier(f, m)


# field dump format: JSON header line, then little-endian float64 (re, im) pairs,
# x1 varying fastest


def _header(obj_kind: str, N: int, L: float) -> bytes:
    return (json.dumps({"n": 3, "N": N, "L": L, "kind": obj_kind}, sort_keys=True) + "\n").encode("utf-8")


def dump(obj, path) -> None:
    if isinstance(obj, GridField):
        kind, arr = "grid", obj.values
    elif isinstance(obj, Spectrum):
        kind, arr = "spectrum", obj.coefficients
    else:
        raise TypeError(f"cannot dump {type(obj).__name__}")
    N = arr.shape[0]
    flat = np.asarray(arr, complex).transpose(2, 1, 0).reshape(-1)
    inter = np.empty(2 * flat.size, dtype="<f8")
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(_header(kind, N, float(obj.L)))
        fh.write(inter.tobytes())


def load(path):
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    head = json.loads(raw[:nl].decode("utf-8"))
    if head.get("n") != 3:
        raise ValueError("only n=3 dumps are supported")
    N, L = int(head["N"]), float(head["L"])
    data = np.frombuffer(raw[nl + 1:], dtype="<f8")
    if data.size != 2 * N**3:
        raise ValueError(f"payload has {data.size} reals, expected {2 * N**3}")
    arr = (data[0::2] + 1j * data[1::2]).reshape(N, N, N).transpose(2, 1, 0).copy()
    if head["kind"] == "grid":
        return GridField(arr, L)
    if head["kind"] == "spectrum":
        return Spectrum(arr, L)
    raise ValueError(f"unknown kind {head['kind']!r}")

