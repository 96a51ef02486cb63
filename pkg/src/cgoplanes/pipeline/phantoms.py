"""Named test potentials, written ``kind:amplitude:width:cx,cy,cz``.

``zero``
    q = 0.
``gaussian:A:sigma:c``
    ``A exp(-|x - c|^2 / (2 sigma^2))``.
``bump:A:a:c``
    ``A exp(1 - 1/(1 - |x - c|^2/a^2))`` on the ball of radius a, zero outside
    (peak value A, compact support).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Phantom:
    kind: str
    amplitude: float = 0.0
    width: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0

    @property
    def support_radius(self) -> float:
        """Radius of the support about the center (inf for the Gaussian)."""
        return self.width if self.kind == "bump" else (0.0 if self.is_zero else np.inf)

    def __call__(self, x, y, z):
        c = self.center
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        if self.kind == "zero":
            return np.zeros(np.broadcast(x, y, z).shape)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-r2 / (2 * self.width**2))
        t = np.asarray(r2 / self.width**2, float)
        out = np.zeros(t.shape)
        m = t < 1
        out[m] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - t[m]))
        return out

    def spec(self) -> str:
        if self.kind == "zero":
            return "zero"
        return f"{self.kind}:{self.amplitude!r}:{self.width!r}:" + ",".join(repr(float(v)) for v in self.center)


def parse_phantom(spec: str) -> Phantom:
    parts = spec.strip().split(":")
    kind = parts[0].strip().lower()
    if kind == "zero":
        if len(parts) != 1:
            raise ValueError("'zero' takes no parameters")
        return Phantom("zero")
    if kind not in ("gaussian", "bump"):
        raise ValueError(f"unknown phantom kind {kind!r}")
    if len(parts) != 4:
        raise ValueError(f"expected {kind}:amplitude:width:cx,cy,cz")
    amp, width = float(parts[1]), float(parts[2])
    c = tuple(float(v) for v in parts[3].split(","))
    if len(c) != 3:
        raise ValueError("center needs three coordinates")
    if width <= 0:
        raise ValueError("width must be positive")
    return Phantom(kind, amp, width, c)


def difference(q1: Phantom, q2: Phantom):
    """Callable q2 - q1."""
    return lambda x, y, z: q2(x, y, z) - q1(x, y, z)
