"""Two-phase conductivity model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PhaseModel:
    """Matrix conductivities of background (A1) and inclusion (A2) phases.

    Both symmetric parts must be positive definite; the stored ellipticity
    constant c0 bounds their eigenvalues within [c0, 1/c0].
    """

    A1: np.ndarray = field(repr=False)
    A2: np.ndarray = field(repr=False)
    alpha: float | None = None  # set when A1 = alpha*Id
    beta: float | None = None   # set when A2 = beta*Id

    def __post_init__(self):
        a1 = np.atleast_2d(np.asarray(self.A1, dtype=np.float64))
        a2 = np.atleast_2d(np.asarray(self.A2, dtype=np.float64))
        if a1.shape != a2.shape or a1.shape[0] != a1.shape[1]:
            raise DomainError("A1 and A2 must be square matrices of equal size")
        for name, m in (("A1", a1), ("A2", a2)):
            ev = np.linalg.eigvalsh((m + m.T) / 2)
            if ev.min() <= 0:
                raise DomainError(f"symmetric part of {name} is not positive definite")
        object.__setattr__(self, "A1", a1)
        object.__setattr__(self, "A2", a2)

    @classmethod
    def isotropic(cls, alpha, beta, d):
        if alpha <= 0 or beta <= 0:
            raise DomainError(f"conductivities must be > 0, got {alpha}, {beta}")
        return cls(alpha * np.eye(d), beta * np.eye(d), alpha=alpha, beta=beta)

    @property
    def d(self):
        return self.A1.shape[0]

    @property
    def is_isotropic(self):
        return self.alpha is not None and self.beta is not None

    @property
    def is_symmetric(self):
        return (np.allclose(self.A1, self.A1.T, atol=1e-14)
                and np.allclose(self.A2, self.A2.T, atol=1e-14))

    def ellipticity(self):
        """Smallest eigenvalue over both symmetric parts."""
        e1 = np.linalg.eigvalsh((self.A1 + self.A1.T) / 2)
        e2 = np.linalg.eigvalsh((self.A2 + self.A2.T) / 2)
        return float(min(e1.min(), e2.min()))
