"""Experiment configuration: INI text with one section per concern.

Floats are written with ``repr`` so a config survives a write/read cycle
bit for bit, and the hash of the canonical text identifies a run.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
from dataclasses import dataclass, field, fields

import numpy as np

from ..geometry import BallDomain


class ConfigError(ValueError):
    pass


@dataclass
class DomainCfg:
    N: int = 128
    L: float = 2.5
    radius: float = 1.0


@dataclass
class CgoCfg:
    beta: float = 0.15
    eps0: float = 0.1
    s_list: tuple = (6.0, 8.0, 12.0, 16.0, 24.0)
    tau_factor: float = 1e-3
    solver_tol: float = 1e-6
    solver_iters: int = 50
    amplitude: str = "beam"
    estimates_amplitude: str = "product"


@dataclass
class CutoffCfg:
    R_cut: float = 1.1
    width: float = 0.3


@dataclass
class BoundaryCfg:
    n_theta: int = 64
    n_phi: int = 128
    interp_order: int = 5
    patch_margin: float = 0.3
    exp_form_max_s: float = 8.0


@dataclass
class EstimatesCfg:
    normals: tuple = ((0.3, 0.2, 1.0),)
    offsets: tuple = (0.0,)
    phantoms: tuple = ("zero", "gaussian:1.0:0.3:0,0,0", "gaussian:1.0:0.3:0.4,0,0")


@dataclass
class IdentityCfg:
    normal: tuple = (0.3, 0.2, 1.0)
    q1: str = "zero"
    q2: str = "gaussian:1.0:0.4:0,0,0"
    narrow: str = "gaussian:1.0:0.2:0,0,0"
    off_offset: float = 0.9


@dataclass
class ReconstructCfg:
    phantom: str = "gaussian:1.0:0.25:0,0,0"
    direct_dirs: int = 200
    direct_offsets: int = 41
    N: int = 64
    s: float = 16.0
    dirs: int = 30
    offsets: int = 15
    deblur: bool = False


@dataclass
class LocalizeCfg:
    phantom: str = "bump:1.0:0.3:0,0,0"
    touching: str = "bump:1.0:0.3:0.75,0,0"
    C_radius: float = 0.4
    r: float = 0.6
    N: int = 64
    s: float = 16.0
    dirs: int = 24
    offsets: int = 21
    cap_offsets: int = 4
    vanish_rel: float = 1e-3


@dataclass
class RunCfg:
    out: str = "runs/default"
    workers: int = 1
    seed: int = 0


@dataclass
class ExperimentConfig:
    domain: DomainCfg = field(default_factory=DomainCfg)
    cgo: CgoCfg = field(default_factory=CgoCfg)
    cutoffs: CutoffCfg = field(default_factory=CutoffCfg)
    boundary: BoundaryCfg = field(default_factory=BoundaryCfg)
    estimates: EstimatesCfg = field(default_factory=EstimatesCfg)
    identity: IdentityCfg = field(default_factory=IdentityCfg)
    reconstruct: ReconstructCfg = field(default_factory=ReconstructCfg)
    localize: LocalizeCfg = field(default_factory=LocalizeCfg)
    run: RunCfg = field(default_factory=RunCfg)

    # ------------------------------------------------------------ derived
    def domain_obj(self, N: int | None = None) -> BallDomain:
        d = self.domain
        return BallDomain(d.radius, d.L, N or d.N)

    # ------------------------------------------------------------ validation
    def validate(self) -> "ExperimentConfig":
        errs = []
        d, c = self.domain, self.cgo
        try:
            BallDomain(d.radius, d.L, d.N)
        except ValueError as e:
            errs.append(f"[domain] {e}")
        if not 0 < c.beta < 0.25:
            errs.append(f"[cgo] beta={c.beta} must lie in (0, 1/4)")
        elif not 0 < c.eps0 < 2 * (0.25 - c.beta):
            errs.append(f"[cgo] eps0={c.eps0} must lie in (0, {2 * (0.25 - c.beta):.6g})")
        if not c.s_list or min(c.s_list) <= 0:
            errs.append("[cgo] s_list must hold positive values")
        for a in (c.amplitude, c.estimates_amplitude):
            if a not in ("product", "beam"):
                errs.append(f"[cgo] amplitude {a!r} must be 'product' or 'beam'")
        if c.solver_tol <= 0 or c.solver_iters < 1:
            errs.append("[cgo] solver_tol must be > 0 and solver_iters >= 1")
        k = self.cutoffs
        if not k.R_cut > d.radius:
            errs.append(f"[cutoffs] R_cut={k.R_cut} must exceed the domain radius {d.radius}")
        if not k.R_cut + k.width < d.L:
            errs.append(f"[cutoffs] R_cut + width = {k.R_cut + k.width} must stay below L={d.L}")
        if self.boundary.patch_margin <= 0:
            errs.append("[boundary] patch_margin must be positive")
        for name, n in (("reconstruct", self.reconstruct.N), ("localize", self.localize.N)):
            if n < 32 or n % 2:
                errs.append(f"[{name}] N must be even and >= 32")
        for sec in (self.reconstruct, self.localize):
            if sec.offsets % 2 == 0:
                errs.append(f"offsets={sec.offsets} must be odd")
        if self.reconstruct.direct_offsets % 2 == 0:
            errs.append("[reconstruct] direct_offsets must be odd")
        if not 0 < self.localize.r <= d.radius:
            errs.append("[localize] r must lie in (0, radius]")
        for spec in (*self.estimates.phantoms, self.identity.q1, self.identity.q2, self.identity.narrow,
                     self.reconstruct.phantom, self.localize.phantom, self.localize.touching):
            try:
                from .phantoms import parse_phantom
                parse_phantom(spec)
            except ValueError as e:
                errs.append(f"phantom {spec!r}: {e}")
        if self.run.workers < 1:
            errs.append("[run] workers must be >= 1")
        if errs:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(errs))
        return self

    # ------------------------------------------------------------ serialization
    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for f in fields(self):
            sec = getattr(self, f.name)
            cp[f.name] = {g.name: _fmt(getattr(sec, g.name)) for g in fields(sec)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_string(text)
        cfg = cls()
        known = {f.name for f in fields(cls)}
        for name in cp.sections():
            if name not in known:
                raise ConfigError(f"unknown section [{name}]")
            sec = getattr(cfg, name)
            types = {g.name: g for g in fields(sec)}
            for key, raw in cp[name].items():
                if key not in types:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
                default = getattr(sec, key)
                try:
                    setattr(sec, key, _parse(raw, default))
                except ValueError as e:
                    raise ConfigError(f"[{name}] {key} = {raw!r}: {e}") from None
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with section fields overridden, e.g. ``replace(domain={"N": 64})``."""
        new = ExperimentConfig.from_text(self.to_text())
        for name, updates in sections.items():
            setattr(new, name, dataclasses.replace(getattr(new, name), **updates))
        return new


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(" ".join(_fmt(float(x)) for x in t) for t in v)
        if v and isinstance(v[0], str):
            return "; ".join(v)
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _parse(raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        if default and isinstance(default[0], tuple):
            return tuple(tuple(float(x) for x in part.split()) for part in raw.split(";") if part.strip())
        if default and isinstance(default[0], str):
            return tuple(p.strip() for p in raw.split(";") if p.strip())
        return tuple(float(x) for x in raw.split(",") if x.strip())
    return raw


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def resolution_problems(N: int, L: float, s_list, beta: float) -> list[str]:
    """Violations of 2 pi / s >= 3h and s^-beta >= 8h."""
    h = 2 * L / N
    out = []
    for s in s_list:
        if 2 * np.pi / s < 3 * h:
            out.append(f"s={s}: wavelength 2pi/s={2 * np.pi / s:.4g} < 3h={3 * h:.4g}")
        if s ** (-beta) < 8 * h:
            out.append(f"s={s}: delta={s ** (-beta):.4g} < 8h={8 * h:.4g}")
    return out
