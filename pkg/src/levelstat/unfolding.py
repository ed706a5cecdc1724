"""Unfolding raw spectra to unit mean spacing via a quadratic counting law."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .billiard import CavityGeometry, WeylLaw, weyl_law_from_geometry
from .ensembles import LevelSequence

__all__ = [
    "UnfoldedSpectrum",
    "FitReport",
    "fit_weyl",
    "unfold",
    "spacings",
    "pool_spacings",
]

_MIN_FIT_LEVELS = 20


@dataclass(frozen=True)
class UnfoldedSpectrum:
    """Dimensionless levels with mean nearest-neighbor spacing exactly one.

    The unit-mean normalization pins the endpoint of the cumulative
    deviation statistic, which is the convention the power-spectrum theory
    curves assume.
    """

    epsilons: np.ndarray
    source: str = "unknown"

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        eps.setflags(write=False)
        object.__setattr__(self, "epsilons", eps)
        if eps.ndim != 1 or eps.size < 2:
            raise ValueError("an unfolded spectrum needs at least two levels")
        if np.any(np.diff(eps) <= 0):
            raise ValueError("unfolded levels must be strictly increasing")
        mean = (eps[-1] - eps[0]) / (eps.size - 1)
        if abs(mean - 1.0) > 1e-6:
            raise ValueError(f"mean spacing must be 1 (got {mean!r}); rescale first")

    @classmethod
    def from_levels(cls, levels, source: str = "unknown") -> "UnfoldedSpectrum":
        """Rescale a strictly increasing sequence to exact unit mean spacing."""
        levels = np.asarray(levels, dtype=float)
        if levels.ndim != 1 or levels.size < 2:
            raise ValueError("need at least two levels")
        mean = (levels[-1] - levels[0]) / (levels.size - 1)
        if mean <= 0:
            raise ValueError("levels must increase")
        return cls(epsilons=levels / mean, source=source)

    @classmethod
    def from_sequence(cls, seq: LevelSequence) -> "UnfoldedSpectrum":
        return cls.from_levels(seq.levels, source=seq.kind)

    def __len__(self) -> int:
        return int(self.epsilons.size)


@dataclass(frozen=True)
class FitReport:
    """Result of fitting the quadratic counting law to a staircase."""

    law: WeylLaw
    residual_rms: float
    used_geometry: bool

    def __post_init__(self):
        if self.residual_rms < 0:
            raise ValueError("residual_rms must be non-negative")


def fit_weyl(levels: LevelSequence, geometry: CavityGeometry | None = None) -> FitReport:
    """Least-squares fit of the staircase N(nu_i) = i - 1/2 to a quadratic.

    With a geometry the leading coefficient is pinned to its analytic value
    A*pi/c^2 and only the linear and constant terms are fitted.
    """
    nu = levels.levels
    n = nu.size
    if n < _MIN_FIT_LEVELS:
        raise ValueError(f"need at least {_MIN_FIT_LEVELS} levels to fit, got {n}")
    target = np.arange(1, n + 1) - 0.5
    if geometry is not None:
        a2 = weyl_law_from_geometry(geometry).a2
        design = np.column_stack([nu, np.ones(n)])
        coef, _, rank, _ = np.linalg.lstsq(design, target - a2 * nu**2, rcond=None)
        if rank < 2:
            raise ValueError("degenerate design: levels do not determine a line")
        law = WeylLaw(a2=a2, a1=float(coef[0]), a0=float(coef[1]))
    else:
        design = np.column_stack([nu**2, nu, np.ones(n)])
        coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
        if rank < 3:
            raise ValueError("degenerate design: levels do not determine a quadratic")
        law = WeylLaw(a2=float(coef[0]), a1=float(coef[1]), a0=float(coef[2]))
    residual = law(nu) - target
    return FitReport(law=law, residual_rms=float(np.sqrt(np.mean(residual**2))), used_geometry=geometry is not None)


def unfold(levels: LevelSequence, law: WeylLaw) -> UnfoldedSpectrum:
    """Map levels through the counting law and rescale to unit mean spacing."""
    nu = levels.levels
    if not law.is_increasing_on(float(nu[0]), float(nu[-1])):
        raise ValueError("counting law is not increasing over the level range")
    return UnfoldedSpectrum.from_levels(law(nu), source=levels.kind)


def spacings(spectrum: UnfoldedSpectrum, order: int = 1) -> np.ndarray:
    """Spacings eps_{i+q} - eps_i of the given order q (mean q by construction)."""
    q = int(order)
    if q < 1:
        raise ValueError("order must be a positive integer")
    eps = spectrum.epsilons
    if q >= eps.size:
        raise ValueError(f"order {q} too large for {eps.size} levels")
    return eps[q:] - eps[:-q]


def pool_spacings(spectra, order: int = 1) -> np.ndarray:
    """Concatenate per-realization spacings; never straddles realizations."""
    parts = [spacings(s, order) for s in spectra]
    if not parts:
        raise ValueError("no spectra to pool")
    return np.concatenate(parts)
