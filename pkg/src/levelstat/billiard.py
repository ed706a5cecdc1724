"""Rectangular cavity spectra, the Weyl counting law, and point scatterers.

Frequencies are in GHz throughout.  The closed-form Dirichlet spectrum
nu_mn = (c/2) sqrt((m/L1)^2 + (n/L2)^2) is valid below the TM_0 cut-off
c/(2 d); a zero-range scatterer perturbs it through a regularized
spectral-determinant secular equation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .ensembles import LevelSequence
from .errors import NumericalConvergenceError, UncoupledScattererWarning

__all__ = [
    "SPEED_OF_LIGHT",
    "CavityGeometry",
    "WeylLaw",
    "ScattererSet",
    "rectangle_eigenfrequencies",
    "weyl_law_from_geometry",
    "weyl_counting",
    "perturb_point_scatterers",
]

SPEED_OF_LIGHT = 2.99792458e8  # m/s


@dataclass(frozen=True)
class CavityGeometry:
    """Flat rectangular cavity: L1 x L2 footprint, height d."""

    length_l1: float
    width_l2: float
    height_d: float
    light_speed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("length_l1", "width_l2", "height_d", "light_speed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def area(self) -> float:
        return self.length_l1 * self.width_l2

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.length_l1 + self.width_l2)

    @property
    def c_ghz(self) -> float:
        """Speed of light in m*GHz, so frequencies come out in GHz."""
        return self.light_speed / 1e9

    @property
    def cutoff_ghz(self) -> float:
        """TM_0 cut-off c/(2 d); the 2D description fails above it."""
        return self.c_ghz / (2.0 * self.height_d)


@dataclass(frozen=True)
class WeylLaw:
    """Smooth counting function N(nu) = a2 nu^2 + a1 nu + a0, nu in GHz.

    Geometry-derived laws have a2 = area*pi/c^2 > 0; laws fitted to data of
    nearly linear density may carry a slightly negative curvature, so the
    binding requirement is monotonicity over the range being unfolded.
    """

    a2: float
    a1: float
    a0: float

    def __post_init__(self):
        if not np.isfinite([self.a2, self.a1, self.a0]).all():
            raise ValueError("Weyl coefficients must be finite")

    def __call__(self, nu):
        nu = np.asarray(nu, dtype=float)
        out = (self.a2 * nu + self.a1) * nu + self.a0
        return out if out.ndim else float(out)

    def derivative(self, nu):
        nu = np.asarray(nu, dtype=float)
        out = 2.0 * self.a2 * nu + self.a1
        return out if out.ndim else float(out)

    def is_increasing_on(self, lo: float, hi: float) -> bool:
        # the derivative is linear in nu, so the endpoints decide
        return self.derivative(lo) > 0 and self.derivative(hi) > 0


@dataclass(frozen=True)
class ScattererSet:
    """Point scatterers: interior positions (m) and one coupling per point."""

    positions: tuple
    strengths: tuple

    def __post_init__(self):
        positions = tuple((float(x), float(y)) for x, y in self.positions)
        object.__setattr__(self, "positions", positions)
        strengths = self.strengths
        if np.isscalar(strengths):
            strengths = (float(strengths),) * len(positions)
        object.__setattr__(self, "strengths", tuple(float(s) for s in strengths))
        if len(self.strengths) != len(positions):
            raise ValueError("need one strength per scatterer")
        if len(set(positions)) != len(positions):
            raise ValueError("duplicate scatterer positions")

    def validate_interior(self, geom: CavityGeometry):
        for x, y in self.positions:
            if not (0.0 < x < geom.length_l1 and 0.0 < y < geom.width_l2):
                raise ValueError(f"scatterer ({x}, {y}) is not strictly inside the cavity")


def _mode_table(geom: CavityGeometry, nu_max: float):
    """All (m, n, nu_mn) with nu_mn <= nu_max, unsorted."""
    c = geom.c_ghz
    m_max = int(np.floor(2.0 * nu_max * geom.length_l1 / c))
    n_max = int(np.floor(2.0 * nu_max * geom.width_l2 / c))
    if m_max < 1 or n_max < 1:
        return np.empty(0, int), np.empty(0, int), np.empty(0, float)
    m, n = np.meshgrid(np.arange(1, m_max + 1), np.arange(1, n_max + 1), indexing="ij")
    nu = 0.5 * c * np.hypot(m / geom.length_l1, n / geom.width_l2)
    keep = nu <= nu_max
    return m[keep], n[keep], nu[keep]


def rectangle_eigenfrequencies(geom: CavityGeometry, nu_max: float) -> LevelSequence:
    """Dirichlet rectangle spectrum up to nu_max (GHz), degeneracies retained."""
    if not 0.0 < nu_max <= geom.cutoff_ghz:
        raise ValueError(
            f"nu_max {nu_max} GHz outside the TM_0 regime (cut-off {geom.cutoff_ghz:.3f} GHz)"
        )
    _, _, nu = _mode_table(geom, nu_max)
    if nu.size < 2:
        raise ValueError("fewer than two modes below nu_max")
    return LevelSequence.from_levels(np.sort(nu), kind="billiard")


def weyl_law_from_geometry(geom: CavityGeometry) -> WeylLaw:
    """Area, perimeter and corner terms of the Dirichlet counting function."""
    c = geom.c_ghz
    a2 = geom.area * np.pi / c**2
    a1 = -geom.perimeter / (2.0 * c)
    return WeylLaw(a2=a2, a1=a1, a0=0.25)  # four right-angle corners


def weyl_counting(geom: CavityGeometry, nu) -> float:
    """Smooth mode count below nu (GHz) for this geometry."""
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(nu_arr < 0):
        raise ValueError("frequency must be non-negative")
    return weyl_law_from_geometry(geom)(nu)


# ---------------------------------------------------------------------------
# Zero-range (point) scatterer perturbation
# ---------------------------------------------------------------------------

# Modes are summed up to e_cut = _ECUT_FACTOR * band top (in e = (2 nu/c)^2
# units); beyond that the smooth tail of the regularized Green function is
# added in closed form.
_ECUT_FACTOR = 4.0
_POLE_MERGE_RTOL = 1e-12
_SAMPLES_PER_SPACING = 10


class _Secular:
    """Regularized spectral determinant for 1 or 2 point scatterers.

    Works in e = (2 nu / c_ghz)^2 (units 1/m^2), where the rectangle modes
    are e_mn = (m pi / L1)^2 / pi^2 ... i.e. e_mn = (m/L1)^2 + (n/L2)^2.
    The diagonal mode sum carries the subtraction 1/(e_k + e_ref), whose
    omitted high-e tail is restored with the mean-density integral.
    """

    def __init__(self, geom: CavityGeometry, scatterers: ScattererSet, e_lo: float, e_hi: float):
        self.strengths = np.array(scatterers.strengths)
        n_sc = len(scatterers.positions)
        self.n_sc = n_sc
        self.e_ref = e_hi
        self.e_cut = _ECUT_FACTOR * e_hi
        nu_cut = 0.5 * geom.c_ghz * np.sqrt(self.e_cut)
        m, n, nu = _mode_table(geom, nu_cut)
        order = np.argsort(nu)
        m, n, nu = m[order], n[order], nu[order]
        self.e_modes = (m / geom.length_l1) ** 2 + (n / geom.width_l2) ** 2
        amp = 2.0 / np.sqrt(geom.area)
        self.psi = np.empty((n_sc, self.e_modes.size))
        for j, (x, y) in enumerate(scatterers.positions):
            self.psi[j] = (
                amp
                * np.sin(m * np.pi * x / geom.length_l1)
                * np.sin(n * np.pi * y / geom.width_l2)
            )
        # collapse numerically degenerate eigenvalues; residues add up
        groups = [[0]]
        for i in range(1, self.e_modes.size):
            if self.e_modes[i] - self.e_modes[groups[-1][0]] <= _POLE_MERGE_RTOL * self.e_modes[i]:
                groups[-1].append(i)
            else:
                groups.append([i])
        self.poles = np.array([self.e_modes[g[0]] for g in groups])
        self.multiplicity = np.array([len(g) for g in groups])
        # rank of the coupling residue inside each degenerate group
        self.res = np.empty((n_sc, n_sc, len(groups)))
        rank = np.empty(len(groups), int)
        for gi, g in enumerate(groups):
            v = self.psi[:, g]  # (n_sc, mult)
            r = v @ v.T
            self.res[:, :, gi] = r
            rank[gi] = int(np.sum(np.linalg.eigvalsh(r) > 1e-12 * max(np.trace(r), 1e-30)))
        self.residue_rank = rank
        # uncoupled groups keep their levels; they are not poles of the determinant
        self.coupled = rank > 0
        self.mean_weight = 1.0 / geom.area
        self.density = geom.area * np.pi / 4.0  # dN/de for the Dirichlet rectangle

    def tail(self, e):
        # smooth continuation of the subtracted diagonal sum beyond e_cut;
        # density * mean_weight = pi/4 for any rectangle
        return (
            self.density
            * self.mean_weight
            * np.log((self.e_cut + self.e_ref) / (self.e_cut - e))
        )

    def green_matrix(self, e: float) -> np.ndarray:
        d = 1.0 / (self.e_modes - e)
        g = np.empty((self.n_sc, self.n_sc))
        sub = 1.0 / (self.e_modes + self.e_ref)
        for i in range(self.n_sc):
            g[i, i] = np.dot(self.psi[i] * self.psi[i], d - sub) + self.tail(e)
            for j in range(i + 1, self.n_sc):
                g[i, j] = g[j, i] = np.dot(self.psi[i] * self.psi[j], d)
        return g

    def __call__(self, e: float) -> float:
        g = self.green_matrix(e)
        lam = np.diag(1.0 / self.strengths)
        m = g - lam
        if self.n_sc == 1:
            return float(m[0, 0])
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def _find_roots_between(f, a: float, b: float, n_samples: int):
    """Roots of f on (a, b) by sign-change sampling and Brent refinement."""
    x = np.linspace(a, b, max(n_samples, 3))
    y = np.array([f(xi) for xi in x])
    roots = []
    for i in range(len(x) - 1):
        if y[i] == 0.0:
            roots.append(x[i])
        elif np.sign(y[i]) * np.sign(y[i + 1]) < 0:
            try:
                roots.append(brentq(f, x[i], x[i + 1], xtol=1e-300, rtol=1e-14, maxiter=200))
            except RuntimeError as exc:
                raise NumericalConvergenceError(
                    f"secular root refinement failed on bracket ({x[i]!r}, {x[i + 1]!r})"
                ) from exc
    return roots


def perturb_point_scatterers(
    geom: CavityGeometry, scatterers: ScattererSet, band: tuple
) -> LevelSequence:
    """Spectrum of the rectangle with 1-2 zero-range scatterers on `band` (GHz).

    Perturbed levels solve det(G_reg(e) - diag(1/strength)) = 0; for one
    scatterer exactly one root interlaces each pair of consecutive coupled
    unperturbed levels.  Uncoupled levels and the deflated copies of
    degenerate levels pass through unchanged.  Scatterers with zero
    strength are dropped (vanishing coupling).
    """
    lo, hi = float(band[0]), float(band[1])
    if not 0.0 < lo < hi <= geom.cutoff_ghz:
        raise ValueError(f"band {band} must lie inside (0, cut-off {geom.cutoff_ghz:.3f}) GHz")
    if not 1 <= len(scatterers.positions) <= 2:
        raise ValueError("only one or two scatterers are supported")
    scatterers.validate_interior(geom)

    keep = [i for i, s in enumerate(scatterers.strengths) if s != 0.0]
    if not keep:
        return _band_slice(rectangle_eigenfrequencies(geom, hi), lo, hi)
    if len(keep) < len(scatterers.positions):
        scatterers = ScattererSet(
            positions=tuple(scatterers.positions[i] for i in keep),
            strengths=tuple(scatterers.strengths[i] for i in keep),
        )

    c = geom.c_ghz
    e_lo, e_hi = (2.0 * lo / c) ** 2, (2.0 * hi / c) ** 2
    sec = _Secular(geom, scatterers, e_lo, e_hi)

    # nodal-line diagnostic over the requested band
    in_band = (sec.e_modes >= e_lo) & (sec.e_modes <= e_hi)
    dead = []
    for j in range(sec.n_sc):
        w = sec.psi[j, in_band] ** 2
        if in_band.any() and np.max(w) < 1e-14 * sec.mean_weight:
            dead.append(j)
    if dead and len(dead) == sec.n_sc:
        warnings.warn(
            "scatterer(s) lie on a nodal line of every mode in the band; "
            "returning the unperturbed spectrum",
            UncoupledScattererWarning,
        )
        return _band_slice(rectangle_eigenfrequencies(geom, hi), lo, hi)

    spacing_e = 1.0 / sec.density
    pad = 1.5 * spacing_e
    poles = sec.poles
    sel = (poles >= e_lo - pad) & (poles <= e_hi + pad)
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        raise ValueError("no modes in or near the requested band")

    roots: list[float] = []
    # levels that do not move: multiplicity above the residue rank, fully
    # uncoupled groups, and, for rank-deficient couplings, the orthogonal
    # combinations inside each degenerate group
    for gi in idx:
        stay = sec.multiplicity[gi] - sec.residue_rank[gi]
        roots.extend([float(sec.poles[gi])] * int(stay))

    coupled_idx = [gi for gi in idx if sec.coupled[gi]]
    # interval walls: coupled poles extended by one spacing beyond the band
    walls = [sec.poles[gi] for gi in coupled_idx]
    if not walls:
        return _band_slice(rectangle_eigenfrequencies(geom, hi), lo, hi)
    segments = []
    lo_wall = max(e_lo - pad, walls[0] - 2.0 * spacing_e)
    segments.append((lo_wall, walls[0], False))
    for a, b in zip(walls[:-1], walls[1:]):
        segments.append((a, b, True))
    segments.append((walls[-1], min(e_hi + pad, walls[-1] + 2.0 * spacing_e), False))

    for a, b, interior in segments:
        if b - a <= 0:
            continue
        offset = max((b - a) * 1e-12, 1e-14 * max(abs(a), abs(b)))
        aa, bb = a + offset, b - offset
        if bb <= aa:
            continue
        n_samples = int(np.ceil((b - a) / spacing_e * _SAMPLES_PER_SPACING)) + 3
        found = _find_roots_between(sec, aa, bb, n_samples)
        if not found and interior and sec.n_sc == 1:
            # exactly one root exists between coupled poles; if it hugs a
            # pole closer than fp resolution, the pole is the root
            if sec(bb) < 0:
                found = [b]
            elif sec(aa) > 0:
                found = [a]
        roots.extend(found)

    e_roots = np.array(sorted(roots))
    e_roots = e_roots[(e_roots >= e_lo) & (e_roots <= e_hi)]
    if e_roots.size < 2:
        raise ValueError("fewer than two perturbed levels in the band")
    nu_roots = 0.5 * c * np.sqrt(e_roots)
    return LevelSequence.from_levels(nu_roots, kind="billiard")


def _band_slice(seq: LevelSequence, lo: float, hi: float) -> LevelSequence:
    levels = seq.levels[(seq.levels >= lo) & (seq.levels <= hi)]
    return LevelSequence.from_levels(levels, kind=seq.kind)
