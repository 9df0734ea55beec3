"""Stationary point processes on a periodic torus.

Samplers are pure functions of (process spec, torus, seed): the same
inputs always reproduce the same configuration, bit for bit, regardless
of worker count. All pairwise geometry uses the minimum-image torus
metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ConfigError, DomainError

# resource guard for the expected point count of a single sample
MAX_EXPECTED_POINTS = 1e8


@dataclass(frozen=True)
class TorusSpec:
    """Periodic box [0, L)^d."""

    d: int
    L: float

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigError(f"dimension must be 2 or 3, got {self.d}")
        if self.L < 8:
            raise ConfigError(f"side length must be >= 8, got {self.L}")

    @property
    def volume(self):
        return self.L ** self.d


@dataclass(frozen=True)
class ProcessSpec:
    """One of: poisson(intensity), matern2(parent_intensity, r_hard),
    jittered_lattice(spacing, jitter)."""

    kind: str
    intensity: float = 0.0
    parent_intensity: float = 0.0
    r_hard: float = 0.0
    spacing: float = 0.0
    jitter: float = 0.0

    def __post_init__(self):
        if self.kind == "poisson":
            if self.intensity <= 0:
                raise ConfigError(f"poisson intensity must be > 0, got {self.intensity}")
        elif self.kind == "matern2":
            if self.parent_intensity <= 0:
                raise ConfigError("matern2 parent_intensity must be > 0")
            if self.r_hard < 0:
                raise ConfigError("matern2 r_hard must be >= 0")
        elif self.kind == "jittered_lattice":
            if self.spacing <= 0:
                raise ConfigError("lattice spacing must be > 0")
            if not (0 <= self.jitter < self.spacing / 2):
                raise ConfigError(
                    f"jitter must lie in [0, spacing/2), got {self.jitter}")
        else:
            raise ConfigError(f"unknown process kind {self.kind!r}")

    def params(self):
        if self.kind == "poisson":
            return {"intensity": self.intensity}
        if self.kind == "matern2":
            return {"parent_intensity": self.parent_intensity, "r_hard": self.r_hard}
        return {"spacing": self.spacing, "jitter": self.jitter}


@dataclass(frozen=True)
class PointSample:
    """A finite point configuration with full provenance."""

    torus: TorusSpec
    centers: np.ndarray = field(repr=False)
    seed: int
    process: ProcessSpec

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64).reshape(-1, self.torus.d)
        if len(c) and (c.min() < 0 or c.max() >= self.torus.L):
            raise ConfigError("centers must lie in [0, L)^d")
        object.__setattr__(self, "centers", c)

    def __len__(self):
        return len(self.centers)

    def to_text(self):
        ps = " ".join(f"{k}={v:.17g}" for k, v in self.process.params().items())
        lines = [f"# {self.torus.d} {self.torus.L:.17g} {self.seed} {self.process.kind} {ps}"]
        for x in self.centers:
            lines.append(" ".join(f"{v:.17g}" for v in x))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ConfigError("missing point-sample header line")
        head = lines[0][1:].split()
        d, L, seed, kind = int(head[0]), float(head[1]), int(head[2]), head[3]
        params = {}
        for tok in head[4:]:
            k, v = tok.split("=")
            params[k] = float(v)
        torus = TorusSpec(d, L)
        proc = ProcessSpec(kind=kind, **params)
        centers = np.array([[float(v) for v in ln.split()] for ln in lines[1:]],
                           dtype=np.float64).reshape(-1, d)
        return cls(torus, centers, seed, proc)


def _rng(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *stream]))


def _guard(expected, what):
    if expected > MAX_EXPECTED_POINTS:
        raise ConfigError(
            f"{what}: expected point count {expected:.3g} exceeds resource guard")


def sample_poisson(lam, torus, seed):
    """Homogeneous Poisson process of intensity ``lam`` on the torus."""
    if lam <= 0:
        raise DomainError(f"intensity must be > 0, got {lam}")
    _guard(lam * torus.volume, "sample_poisson")
    rng = _rng(seed, 0)
    n = rng.poisson(lam * torus.volume)
    centers = rng.uniform(0.0, torus.L, size=(n, torus.d))
    proc = ProcessSpec("poisson", intensity=lam)
    return PointSample(torus, centers, seed, proc)


def sample_matern2(lam_parent, r_hard, torus, seed):
    """Matern II hardcore thinning: uniform marks, the older mark wins.

    All pairwise torus distances of the output are >= r_hard.
    """
    if r_hard <= 0:
        raise DomainError(f"r_hard must be > 0, got {r_hard}")
    if lam_parent <= 0:
        raise DomainError(f"parent intensity must be > 0, got {lam_parent}")
    _guard(lam_parent * torus.volume, "sample_matern2")
    rng = _rng(seed, 1)
    n = rng.poisson(lam_parent * torus.volume)
    parents = rng.uniform(0.0, torus.L, size=(n, torus.d))
    marks = rng.uniform(size=n)
    keep = backend.matern_keep(parents, marks, r_hard, torus.L)
    proc = ProcessSpec("matern2", parent_intensity=lam_parent, r_hard=r_hard)
    return PointSample(torus, parents[keep], seed, proc)


def matern2_retained_intensity(lam_parent, r_hard, d):
    """Closed-form retained intensity (1 - exp(-lam_p V_h)) / V_h."""
    vh = ball_volume(r_hard, d)
    return -math.expm1(-lam_parent * vh) / vh


def ball_volume(r, d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r ** d


def sample_jittered_lattice(a, eta, torus, seed):
    """One point per lattice cell, displaced by uniform jitter in [-eta, eta]^d."""
    m = torus.L / a
    if abs(m - round(m)) > 1e-12:
        raise ConfigError(f"L={torus.L} is not an integer multiple of spacing {a}")
    m = int(round(m))
    proc = ProcessSpec("jittered_lattice", spacing=a, jitter=eta)
    rng = _rng(seed, 2)
    grids = np.meshgrid(*[np.arange(m) * a for _ in range(torus.d)], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1).astype(np.float64)
    if eta > 0:
        pts = pts + rng.uniform(-eta, eta, size=pts.shape)
    pts %= torus.L
    return PointSample(torus, pts, seed, proc)


def intensity(process, d):
    """Mean number of points per unit volume."""
    if process.kind == "poisson":
        return process.intensity
    if process.kind == "matern2":
        return matern2_retained_intensity(process.parent_intensity, process.r_hard, d)
    return process.spacing ** (-d)


def analytic_lambda2(process, d=None):
    """Second-order intensity when it is known in closed form, else None.

    poisson: lam^2 (product structure of the 2-point density).
    jittered_lattice with jitter < spacing/4: displacement bins on the
    contact-scale grid that avoid the lattice neighbor set carry no pair
    mass, so the off-lattice bin value is exactly 0.
    matern2: no closed form; estimate empirically instead.
    """
    if process.kind == "poisson":
        return process.intensity ** 2
    if process.kind == "jittered_lattice" and process.jitter < process.spacing / 4:
        return 0.0
    return None
