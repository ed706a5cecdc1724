"""Two-port scattering: simulation, enhancement-factor estimation, theory.

The elastic enhancement factor F = sqrt(var S_aa * var S_bb) / var S_ab is
estimated from sliding-window variances of simulated (or ingested) 2x2
scattering matrices and compared against its absorption-integral theory:
F = 3 - integral e^(-s) b2(s / gamma_tot) ds for orthogonal symmetry, with
the semi-Poisson case also available in closed form through the sine and
cosine integrals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import eig

from .ensembles import LevelSequence, RandomSeed, EnsembleSpec, sample_gamma_levels, daisy_thin
from .errors import NumericalConvergenceError
from .stats import spectral_form_factor

__all__ = [
    "sici",
    "b2_form_factor",
    "eef_theory_integral",
    "eef_theory_sp_closed",
    "eef_theory_goe",
    "WindowSpec",
    "SMatrixSeries",
    "AbsorptionBudget",
    "GoeHamiltonian",
    "DiagonalLevels",
    "HeidelbergModel",
    "TransmissionCurve",
    "EefCurve",
    "kappa_for_transmission",
    "transmission_for_kappa",
    "simulate_smatrix",
    "transmission_coefficients",
    "total_absorption",
    "eef_estimate",
    "goe_scattering_ensemble",
    "semi_poisson_scattering_ensemble",
]

_EULER_GAMMA = 0.5772156649015328606


# ---------------------------------------------------------------------------
# Sine and cosine integrals
# ---------------------------------------------------------------------------

_SICI_SWITCH = 4.0
_SICI_MAXIT = 300


def _sici_series(x: float):
    # power series for Si and Cin; converges rapidly for x <= 4
    x2 = x * x
    si_sum = x
    term = x
    n = 0
    while True:
        n += 1
        term *= -x2 / ((2 * n) * (2 * n + 1))
        contrib = term / (2 * n + 1)
        si_sum += contrib
        if abs(contrib) < 1e-18 * abs(si_sum):
            break
        if n > 60:  # pragma: no cover - series always converges well before
            raise NumericalConvergenceError("sine-integral series stalled")
    cin_sum = 0.0
    term = -1.0
    n = 0
    while True:
        n += 1
        term *= -x2 / ((2 * n - 1) * (2 * n))
        contrib = term / (2 * n)
        cin_sum += contrib
        if abs(contrib) < 1e-18 * max(abs(cin_sum), 1e-30):
            break
        if n > 60:  # pragma: no cover
            raise NumericalConvergenceError("cosine-integral series stalled")
    si = si_sum - 0.5 * np.pi
    ci = _EULER_GAMMA + math.log(x) - cin_sum
    return si, ci


def _sici_continued_fraction(x: float):
    # E1(i x) by the modified Lentz continued fraction; then
    # si(x) = Im E1(ix), ci(x) = -Re E1(ix).  This evaluates the auxiliary
    # functions f, g to machine accuracy for every x above the switch point.
    z = 1j * x
    tiny = 1e-290
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(2, _SICI_MAXIT):
        a = -((i - 1) ** 2)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        if c == 0:
            c = tiny
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:  # pragma: no cover - convergence is fast for x > 4
        raise NumericalConvergenceError(f"continued fraction for sici({x}) did not converge")
    e1 = (math.cos(x) - 1j * math.sin(x)) * h
    return e1.imag, -e1.real


def _sici_scalar(x: float):
    if not x > 0:
        raise ValueError("sici requires x > 0 (ci has a logarithmic singularity at 0)")
    if x <= _SICI_SWITCH:
        return _sici_series(float(x))
    return _sici_continued_fraction(float(x))


def sici(x):
    """Negative-tail sine and cosine integrals si(x), ci(x) for x > 0.

    si(x) = -int_x^inf sin(t)/t dt and ci(x) = -int_x^inf cos(t)/t dt,
    evaluated by power series below x = 4 and by the auxiliary-function
    continued fraction above; absolute accuracy is ~1e-15 on (0, 1e4].
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return _sici_scalar(float(arr))
    out_si = np.empty(arr.shape)
    out_ci = np.empty(arr.shape)
    for idx in np.ndindex(arr.shape):
        out_si[idx], out_ci[idx] = _sici_scalar(float(arr[idx]))
    return out_si, out_ci


# ---------------------------------------------------------------------------
# Enhancement-factor theory
# ---------------------------------------------------------------------------


def b2_form_factor(kind: str, tau):
    """Two-level form factor b2 = 1 - K; closed form for semi-Poisson."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise ValueError("tau must be non-negative")
    if kind == "semi_poisson":
        out = 2.0 / (4.0 + np.pi**2 * tau_arr**2)
    else:
        out = 1.0 - np.asarray(spectral_form_factor(kind, tau_arr))
    return out if out.ndim else float(out)


_EEF_S_MAX = 30.0  # e^(-30) ~ 9e-14 bounds the dropped tail of the integral


def eef_theory_integral(kind: str, gamma_tot: float) -> float:
    """Enhancement factor 3 - int_0^smax e^(-s) b2(s/gamma) ds (beta = 1)."""
    if gamma_tot <= 0:
        raise ValueError("gamma_tot must be positive")
    points = None
    if kind == "goe" and gamma_tot < _EEF_S_MAX:
        points = [gamma_tot]  # branch switch of the GOE form factor

    def integrand(s):
        return math.exp(-s) * b2_form_factor(kind, s / gamma_tot)

    value, abserr = quad(
        integrand, 0.0, _EEF_S_MAX, points=points, epsabs=1e-12, epsrel=1e-12, limit=500
    )
    tail = math.exp(-_EEF_S_MAX)  # |b2| <= 1
    if abserr + tail > 1e-10:
        raise NumericalConvergenceError(
            f"enhancement-factor quadrature reached only {abserr + tail:.2e} absolute error"
        )
    return 3.0 - value


def eef_theory_sp_closed(gamma_tot: float) -> float:
    """Closed-form semi-Poisson enhancement factor via si and ci.

    F(gamma) = 3 - (gamma/pi) [ci(2 gamma/pi) sin(2 gamma/pi)
                               - si(2 gamma/pi) cos(2 gamma/pi)];
    decreases monotonically from 3 (gamma -> 0) to 5/2 (gamma -> inf).
    """
    if gamma_tot < 0:
        raise ValueError("gamma_tot must be non-negative")
    if gamma_tot == 0:
        return 3.0
    x = 2.0 * gamma_tot / np.pi
    si, ci = _sici_scalar(x)
    return 3.0 - (gamma_tot / np.pi) * (ci * math.sin(x) - si * math.cos(x))


def eef_theory_goe(gamma_tot: float) -> float:
    """GOE enhancement factor; decreases from 3 toward 2 with absorption."""
    return eef_theory_integral("goe", gamma_tot)


# ---------------------------------------------------------------------------
# Heidelberg-type simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window sizes (GHz) for variance estimation and smoothing."""

    estimate_window: float = 0.025
    average_window: float = 0.5
    step: float = 0.025

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.estimate_window <= 0 or self.average_window <= 0:
            raise ValueError("window widths must be positive")
        if self.estimate_window > self.average_window:
            raise ValueError("estimate window cannot exceed the averaging window")


@dataclass(frozen=True)
class SMatrixSeries:
    """2x2 scattering matrices on a frequency grid for one realization."""

    grid: np.ndarray
    entries: np.ndarray  # (n_freq, 2, 2) complex
    realization_id: int = 0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        entries = np.asarray(self.entries, dtype=complex)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "entries", entries)
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if entries.shape != (grid.size, 2, 2):
            raise ValueError("entries must have shape (n_freq, 2, 2)")

    def max_unitarity_defect(self) -> float:
        prod = np.einsum("fij,fik->fjk", self.entries.conj(), self.entries)
        prod = prod - np.eye(2)
        return float(np.max(np.linalg.norm(prod, axis=(1, 2), ord=2)))

    def max_reciprocity_defect(self) -> float:
        return float(np.max(np.abs(self.entries[:, 0, 1] - self.entries[:, 1, 0])))


@dataclass(frozen=True)
class AbsorptionBudget:
    """Open-channel transmissions plus internal absorption; their sum is gamma_tot."""

    t_a: float
    t_b: float
    gamma_internal: float
    gamma_tot: float

    def __post_init__(self):
        for name in ("t_a", "t_b"):
            t = getattr(self, name)
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {t}")
        if self.gamma_internal < 0:
            raise ValueError("gamma_internal must be non-negative")
        if self.gamma_tot != self.t_a + self.t_b + self.gamma_internal:
            raise ValueError("gamma_tot must equal t_a + t_b + gamma_internal exactly")


def total_absorption(
    t_a: float | None = None,
    t_b: float | None = None,
    gamma_internal: float = 0.0,
    width: float | None = None,
    mean_spacing: float | None = None,
    rtol: float = 1e-3,
) -> AbsorptionBudget:
    """Build the absorption budget from transmissions and/or a width ratio.

    Accepts (t_a, t_b, gamma_internal), or (width, mean_spacing) through
    gamma_tot = 2 pi width / spacing, or both; with both, the two routes
    must agree within rtol.
    """
    have_t = t_a is not None and t_b is not None
    have_w = width is not None and mean_spacing is not None
    if not have_t and not have_w:
        raise ValueError("supply transmissions, a width/spacing pair, or both")
    if have_w:
        if width < 0 or mean_spacing <= 0:
            raise ValueError("width must be >= 0 and mean spacing > 0")
        gamma_w = 2.0 * np.pi * width / mean_spacing
    if have_t:
        gamma_t = t_a + t_b + gamma_internal
        if have_w and abs(gamma_w - gamma_t) > rtol * max(abs(gamma_t), 1e-30):
            raise ValueError(
                f"inconsistent absorption: transmissions give {gamma_t}, widths give {gamma_w}"
            )
        return AbsorptionBudget(t_a=t_a, t_b=t_b, gamma_internal=gamma_internal, gamma_tot=gamma_t)
    return AbsorptionBudget(t_a=0.0, t_b=0.0, gamma_internal=gamma_w, gamma_tot=gamma_w)


@dataclass(frozen=True)
class GoeHamiltonian:
    """GOE source: dim levels on a semicircle over center +- half_band (GHz)."""

    dim: int
    center_ghz: float
    half_band_ghz: float

    def __post_init__(self):
        if self.dim < 50:
            raise ValueError("need at least 50 levels")
        if self.half_band_ghz <= 0:
            raise ValueError("half band must be positive")

    @property
    def mean_spacing(self) -> float:
        # spacing at the band center of the semicircle
        return np.pi * self.half_band_ghz / (2.0 * self.dim)

    def band(self) -> tuple:
        # central region where the level density is nearly flat
        return (self.center_ghz - 0.75 * self.half_band_ghz,
                self.center_ghz + 0.75 * self.half_band_ghz)


@dataclass(frozen=True)
class DiagonalLevels:
    """Fixed-level source (e.g. a decimated-Poisson sequence in GHz)."""

    levels: LevelSequence

    def __post_init__(self):
        if len(self.levels) < 50:
            raise ValueError("need at least 50 levels")

    @property
    def mean_spacing(self) -> float:
        return self.levels.mean_spacing

    def band(self) -> tuple:
        return (float(self.levels.levels[0]), float(self.levels.levels[-1]))


@dataclass(frozen=True)
class HeidelbergModel:
    """Effective-Hamiltonian scattering model with two physical channels.

    Parasitic channels with a common coupling emulate uniform internal
    absorption; level_density_scale is the mean level spacing (GHz) used to
    normalize all channel couplings.
    """

    hamiltonian_source: object  # GoeHamiltonian | DiagonalLevels
    coupling_a: np.ndarray
    coupling_b: np.ndarray
    parasitic_count: int
    parasitic_coupling: float
    level_density_scale: float

    def __post_init__(self):
        ca = np.asarray(self.coupling_a, dtype=float)
        cb = np.asarray(self.coupling_b, dtype=float)
        object.__setattr__(self, "coupling_a", ca)
        object.__setattr__(self, "coupling_b", cb)
        if np.all(ca == 0) or np.all(cb == 0):
            raise ValueError("physical coupling vectors must be nonzero")
        if self.parasitic_count < 0:
            raise ValueError("parasitic channel count must be >= 0")
        if self.parasitic_count > 0 and self.parasitic_coupling <= 0:
            raise ValueError("parasitic coupling must be positive when channels are present")

    def dim(self) -> int:
        src = self.hamiltonian_source
        return src.dim if isinstance(src, GoeHamiltonian) else len(src.levels)

    def internal_absorption(self) -> float:
        """Design value of gamma (sum of parasitic transmissions)."""
        if self.parasitic_count == 0:
            return 0.0
        kappa = np.pi**2 * self.parasitic_coupling**2 / (self.dim() * self.level_density_scale)
        return self.parasitic_count * transmission_for_kappa(kappa)


def kappa_for_transmission(t: float) -> float:
    """Coupling parameter kappa <= 1 giving transmission T = 4k/(1+k)^2."""
    if not 0.0 < t <= 1.0:
        raise ValueError("transmission must lie in (0, 1]")
    return (2.0 / t) * (1.0 - np.sqrt(1.0 - t)) - 1.0


def transmission_for_kappa(kappa: float) -> float:
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return 4.0 * kappa / (1.0 + kappa) ** 2


def coupling_norm(kappa: float, dim: int, mean_spacing: float) -> float:
    """Vector 2-norm realizing coupling parameter kappa for dim levels."""
    return float(np.sqrt(kappa * dim * mean_spacing) / np.pi)


def _draw_hamiltonian(source, rng: np.random.Generator) -> np.ndarray:
    if isinstance(source, DiagonalLevels):
        return np.diag(source.levels.levels)
    a = rng.normal(size=(source.dim, source.dim))
    h = (a + a.T) / 2.0
    scale = source.half_band_ghz / np.sqrt(2.0 * source.dim)
    return source.center_ghz * np.eye(source.dim) + h * scale


def simulate_smatrix(
    model: HeidelbergModel, grid, seed: RandomSeed, realization_id: int = 0
) -> SMatrixSeries:
    """S(nu) from the resolvent of H - i pi W W^T on the frequency grid.

    Flux conserving (unitary) without parasitic channels, sub-unitary with
    them, and reciprocal for the real-symmetric sources used here.  The
    seed draws the GOE matrix (GOE source) and the parasitic coupling
    vectors; everything else is fixed by the model.
    """
    grid = np.asarray(grid, dtype=float)
    lo, hi = model.hamiltonian_source.band()
    if grid[0] < lo or grid[-1] > hi:
        raise ValueError(f"grid [{grid[0]}, {grid[-1]}] outside the model band [{lo}, {hi}]")
    rng = seed.rng()
    h = _draw_hamiltonian(model.hamiltonian_source, rng)
    dim = h.shape[0]
    w_cols = [model.coupling_a, model.coupling_b]
    if model.parasitic_count > 0:
        wp = rng.normal(size=(dim, model.parasitic_count))
        wp /= np.linalg.norm(wp, axis=0, keepdims=True)
        w_cols.append(wp * model.parasitic_coupling)
    w = np.column_stack(w_cols)
    h_eff = h - 1j * np.pi * (w @ w.T)

    vals, vecs = eig(h_eff)
    norm2 = np.sum(vecs * vecs, axis=0)  # complex-orthogonal normalization
    if np.any(np.abs(norm2) < 1e-12):
        # quasi-defective eigenbasis; nudge the spectrum and retry once
        warnings.warn("near-defective effective Hamiltonian; retrying with jitter")
        jitter = 1e-10 * model.level_density_scale * rng.normal(size=dim)
        vals, vecs = eig(h_eff + np.diag(jitter))
        norm2 = np.sum(vecs * vecs, axis=0)
        if np.any(np.abs(norm2) < 1e-12):
            raise NumericalConvergenceError("effective Hamiltonian eigenbasis is defective")
    vecs = vecs / np.sqrt(norm2)[None, :]

    amp_a = vecs.T @ model.coupling_a
    amp_b = vecs.T @ model.coupling_b
    # a grid point exactly on a real eigenvalue would make the resolvent
    # singular; shift such points by a harmless fraction of the spacing
    dist = np.min(np.abs(grid[:, None] - vals[None, :]), axis=1)
    bad = dist < 1e-12 * model.level_density_scale
    if np.any(bad):
        warnings.warn(f"{bad.sum()} grid points hit resonance poles; perturbed by 1e-9 spacings")
        grid = grid.copy()
        grid[bad] += 1e-9 * model.level_density_scale
    d = 1.0 / (grid[:, None] - vals[None, :])
    s = np.empty((grid.size, 2, 2), dtype=complex)
    s[:, 0, 0] = 1.0 - 2j * np.pi * (d @ (amp_a * amp_a))
    s_ab = -2j * np.pi * (d @ (amp_a * amp_b))
    s[:, 0, 1] = s_ab
    s[:, 1, 0] = s_ab
    s[:, 1, 1] = 1.0 - 2j * np.pi * (d @ (amp_b * amp_b))
    return SMatrixSeries(grid=grid, entries=s, realization_id=realization_id)


# ---------------------------------------------------------------------------
# Windowed estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransmissionCurve:
    centers: np.ndarray
    t_a: np.ndarray
    t_b: np.ndarray


@dataclass(frozen=True)
class EefCurve:
    """Windowed enhancement-factor estimates with per-window spreads."""

    frequency: np.ndarray
    gamma_tot: np.ndarray
    f_value: np.ndarray
    std_dev: np.ndarray

    def __post_init__(self):
        if not (len(self.frequency) == len(self.gamma_tot) == len(self.f_value) == len(self.std_dev)):
            raise ValueError("curve columns must have equal length")
        if np.any(np.asarray(self.f_value) <= 0):
            raise ValueError("enhancement factor must be positive where defined")
        if np.any(np.asarray(self.std_dev) < 0):
            raise ValueError("standard deviations must be non-negative")

    def points(self):
        return list(zip(self.frequency, self.gamma_tot, self.f_value, self.std_dev))

    def __len__(self) -> int:
        return int(len(self.frequency))


def _common_grid(series_list) -> np.ndarray:
    grid = series_list[0].grid
    for s in series_list[1:]:
        if s.grid.shape != grid.shape or np.any(np.abs(s.grid - grid) > 1e-9):
            raise ValueError("all realizations must share one frequency grid")
    return grid


def _window_stats(series_list, window: WindowSpec):
    """Per estimate-window variances, means and transmissions."""
    grid = _common_grid(series_list)
    stack = np.stack([s.entries for s in series_list])  # (n_real, n_freq, 2, 2)
    half = window.estimate_window / 2.0
    centers = np.arange(grid[0] + half, grid[-1] - half + 1e-12, window.step)
    recs = []
    for c in centers:
        mask = np.abs(grid - c) <= half + 1e-12
        n_freq = int(mask.sum())
        if n_freq < 2:
            raise ValueError(
                f"estimate window at {c:.4f} GHz holds {n_freq} grid points; need >= 2"
            )
        x = stack[:, mask, :, :]
        means = x.mean(axis=(0, 1))
        variances = (np.abs(x) ** 2).mean(axis=(0, 1)) - np.abs(means) ** 2
        recs.append((c, means, variances))
    return recs


def transmission_coefficients(series_list, window: WindowSpec) -> TransmissionCurve:
    """Windowed transmissions T_i = 1 - |<S_ii>|^2 of both physical ports."""
    series_list = list(series_list)
    if len(series_list) < 10:
        raise ValueError("need at least 10 realizations for windowed means")
    recs = _window_stats(series_list, window)
    centers = np.array([r[0] for r in recs])
    t_a = np.array([1.0 - abs(r[1][0, 0]) ** 2 for r in recs])
    t_b = np.array([1.0 - abs(r[1][1, 1]) ** 2 for r in recs])
    return TransmissionCurve(centers=centers, t_a=np.clip(t_a, 0.0, 1.0), t_b=np.clip(t_b, 0.0, 1.0))


def eef_estimate(series_list, window: WindowSpec, gamma_internal: float = 0.0) -> EefCurve:
    """Sliding-window enhancement factor with averaging-window smoothing.

    Raw estimates use variances over the combined frequency x realization
    sample of each estimate window (population normalization, window means
    subtracted); they are then averaged over the wider window, whose spread
    provides std_dev.  gamma_tot per point adds the windowed transmissions
    to the supplied internal absorption.
    """
    series_list = list(series_list)
    if not series_list:
        raise ValueError("no realizations supplied")
    recs = _window_stats(series_list, window)
    centers, f_raw, ta_raw, tb_raw = [], [], [], []
    skipped = 0
    for c, means, variances in recs:
        var_ab = variances[0, 1]
        if var_ab <= 0 or variances[0, 0] <= 0 or variances[1, 1] <= 0:
            skipped += 1
            continue
        centers.append(c)
        f_raw.append(np.sqrt(variances[0, 0] * variances[1, 1]) / var_ab)
        ta_raw.append(1.0 - abs(means[0, 0]) ** 2)
        tb_raw.append(1.0 - abs(means[1, 1]) ** 2)
    if skipped:
        warnings.warn(
            f"{skipped} window(s) had vanishing off-diagonal variance and were skipped"
        )
    if not centers:
        raise ValueError("no window produced a defined enhancement-factor estimate")
    centers = np.array(centers)
    f_raw = np.array(f_raw)
    ta_raw = np.clip(np.array(ta_raw), 0.0, 1.0)
    tb_raw = np.clip(np.array(tb_raw), 0.0, 1.0)

    half_avg = window.average_window / 2.0
    out_f, out_g, out_sd, out_c = [], [], [], []
    for c in centers:
        if c - half_avg < centers[0] - 1e-9 or c + half_avg > centers[-1] + 1e-9:
            continue  # keep only points whose averaging window is fully covered
        m = np.abs(centers - c) <= half_avg + 1e-12
        group = f_raw[m]
        out_c.append(c)
        out_f.append(group.mean())
        out_sd.append(group.std(ddof=1) if group.size > 1 else 0.0)
        out_g.append(ta_raw[m].mean() + tb_raw[m].mean() + gamma_internal)
    if not out_c:
        raise ValueError("averaging window wider than the available band")
    return EefCurve(
        frequency=np.array(out_c),
        gamma_tot=np.array(out_g),
        f_value=np.array(out_f),
        std_dev=np.array(out_sd),
    )


# ---------------------------------------------------------------------------
# Ensemble builders
# ---------------------------------------------------------------------------


def _orthogonal_couplings(dim: int, norm: float, rng: np.random.Generator):
    q, _ = np.linalg.qr(rng.normal(size=(dim, 2)))
    return q[:, 0] * norm, q[:, 1] * norm


def goe_scattering_ensemble(
    dim: int,
    n_realizations: int,
    grid,
    transmission: float,
    gamma_internal: float,
    parasitic_count: int,
    seed: RandomSeed,
    center_ghz: float = 10.0,
    half_band_ghz: float = 6.0,
):
    """GOE-source ensemble with matched ports and uniform internal absorption.

    Returns (series_list, model_gamma_internal): parasitic channels are
    weakly coupled so the per-channel transmission is gamma_internal /
    parasitic_count.
    """
    source = GoeHamiltonian(dim=dim, center_ghz=center_ghz, half_band_ghz=half_band_ghz)
    spacing = source.mean_spacing
    kappa = kappa_for_transmission(transmission)
    w_norm = coupling_norm(kappa, dim, spacing)
    if parasitic_count > 0:
        t_per = gamma_internal / parasitic_count
        wp_norm = coupling_norm(kappa_for_transmission(t_per), dim, spacing)
    else:
        wp_norm = 0.0
    series = []
    gamma_design = 0.0
    for r in range(n_realizations):
        rng = seed.stream(2 * r).rng()
        w_a, w_b = _orthogonal_couplings(dim, w_norm, rng)
        model = HeidelbergModel(
            hamiltonian_source=source,
            coupling_a=w_a,
            coupling_b=w_b,
            parasitic_count=parasitic_count,
            parasitic_coupling=wp_norm,
            level_density_scale=spacing,
        )
        gamma_design = model.internal_absorption()
        series.append(simulate_smatrix(model, grid, seed.stream(2 * r + 1), realization_id=r))
    return series, gamma_design


def semi_poisson_scattering_ensemble(
    n_realizations: int,
    grid,
    mean_spacing_ghz: float,
    transmission: float,
    gamma_internal: float,
    parasitic_count: int,
    seed: RandomSeed,
    margin_ghz: float = 0.35,
):
    """Decimated-Poisson diagonal ensemble whose spectral law is semi-Poisson.

    Each realization draws fresh levels spanning the grid plus a margin and
    fresh orthogonal coupling vectors.  Returns (series_list,
    model_gamma_internal).
    """
    grid = np.asarray(grid, dtype=float)
    lo = grid[0] - margin_ghz
    hi = grid[-1] + margin_ghz
    n_levels = int(np.ceil((hi - lo) / mean_spacing_ghz * 1.15)) + 60
    kappa = kappa_for_transmission(transmission)
    series = []
    gamma_design = 0.0
    for r in range(n_realizations):
        gen_seed = seed.stream(3 * r)
        poisson = sample_gamma_levels(
            EnsembleSpec(kind="poisson", count=2 * n_levels + 2), gen_seed
        )
        daisy = daisy_thin(poisson, 2)
        levels = daisy.levels * mean_spacing_ghz + lo
        levels = levels[levels <= hi]
        if levels[-1] < grid[-1]:
            raise ValueError("level run too short for the grid; increase the margin")
        source = DiagonalLevels(levels=LevelSequence.from_levels(levels, kind="semi_poisson", eta=2.0))
        dim = len(source.levels)
        w_norm = coupling_norm(kappa, dim, mean_spacing_ghz)
        if parasitic_count > 0:
            t_per = gamma_internal / parasitic_count
            wp_norm = coupling_norm(kappa_for_transmission(t_per), dim, mean_spacing_ghz)
        else:
            wp_norm = 0.0
        rng = seed.stream(3 * r + 1).rng()
        w_a, w_b = _orthogonal_couplings(dim, w_norm, rng)
        model = HeidelbergModel(
            hamiltonian_source=source,
            coupling_a=w_a,
            coupling_b=w_b,
            parasitic_count=parasitic_count,
            parasitic_coupling=wp_norm,
            level_density_scale=mean_spacing_ghz,
        )
        gamma_design = model.internal_absorption()
        series.append(simulate_smatrix(model, grid, seed.stream(3 * r + 2), realization_id=r))
    return series, gamma_design
