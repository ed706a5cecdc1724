"""Short- and long-range spectral observables and their analytic curves.

Covers the nearest-neighbor spacing distribution and its gamma-family
interpolation between Poisson (eta = 1) and semi-Poisson (eta = 2), the
second-neighbor distribution, the cumulative-deviation power spectrum with
its form-factor theory curves, and goodness-of-fit distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats as sps
from scipy.optimize import brentq, curve_fit, minimize_scalar

from .ensembles import EnsembleSpec, RandomSeed, sample_gamma_levels, daisy_thin
from .unfolding import UnfoldedSpectrum

__all__ = [
    "FORM_FACTOR_KINDS",
    "DELTA_POISSON",
    "DELTA_GOE",
    "DELTA_SP_CALIBRATED",
    "SpacingHistogram",
    "EtaFit",
    "DeltaSeries",
    "PowerSpectrumEstimate",
    "spacing_histogram",
    "theory_nnsd",
    "theory_integrated_nnsd",
    "theory_second_nnsd",
    "fit_eta",
    "delta_series",
    "power_spectrum",
    "mean_power_spectrum",
    "spectral_form_factor",
    "theory_power_spectrum",
    "default_delta_offset",
    "calibrate_delta_sp",
    "gof_distance",
]

FORM_FACTOR_KINDS = ("poisson", "semi_poisson", "goe")

DELTA_POISSON = 0.0
DELTA_GOE = -1.0 / 12.0
# Offset of the semi-Poisson power-spectrum curve.  No analytic value is
# published; this constant is Monte Carlo calibrated with
# calibrate_delta_sp(n_sequences=40000, length=513, seed=RandomSeed(202608)),
# minimizing the mean squared relative deviation from the form-factor
# formula over k <= N/4.  Independent seeds reproduce it to +-0.0005.
DELTA_SP_CALIBRATED = -0.06596


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpacingHistogram:
    """Density histogram of a spacing sample over a fixed range."""

    bin_edges: np.ndarray
    densities: np.ndarray
    count: int

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, float)
        dens = np.asarray(self.densities, float)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "densities", dens)
        if edges.size != dens.size + 1:
            raise ValueError("need one more bin edge than density value")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must increase")
        if np.any(dens < 0):
            raise ValueError("densities must be non-negative")
        integral = float(np.sum(dens * np.diff(edges)))
        if abs(integral - 1.0) > 1e-9:
            raise ValueError(f"densities must integrate to 1 over the range (got {integral})")

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


@dataclass(frozen=True)
class EtaFit:
    """Fitted gamma-family parameter with its uncertainty."""

    eta: float
    std_error: float
    method: str

    def __post_init__(self):
        if not np.isfinite(self.eta):
            raise ValueError("eta must be finite")
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")


@dataclass(frozen=True)
class DeltaSeries:
    """Cumulative deviations delta_q = eps_{q+1} - eps_1 - q, q = 0..n-1."""

    values: np.ndarray
    n: int

    def __post_init__(self):
        values = np.asarray(self.values, float)
        object.__setattr__(self, "values", values)
        if values.size != self.n:
            raise ValueError("length mismatch")
        if values[0] != 0.0:
            raise ValueError("delta_0 must vanish by construction")


@dataclass(frozen=True)
class PowerSpectrumEstimate:
    """|DFT|^2 of a delta series under the 1/sqrt(N) normalization."""

    k: np.ndarray
    s_of_k: np.ndarray
    n: int
    ensembles_averaged: int
    dc: float

    def __post_init__(self):
        if np.any(np.asarray(self.s_of_k) < 0):
            raise ValueError("power must be non-negative")
        if len(self.k) != len(self.s_of_k) or len(self.k) != self.n - 1:
            raise ValueError("wavenumbers must run over 1..n-1")


def spacing_histogram(sample, bins: int = 40, srange: tuple = (0.0, 4.0)) -> SpacingHistogram:
    sample = np.asarray(sample, float)
    if sample.size == 0:
        raise ValueError("empty sample")
    dens, edges = np.histogram(sample, bins=bins, range=srange, density=True)
    return SpacingHistogram(bin_edges=edges, densities=dens, count=int(sample.size))


# ---------------------------------------------------------------------------
# Analytic spacing distributions
# ---------------------------------------------------------------------------


def _gamma_family_pdf(s, eta):
    # density eta^eta s^(eta-1) exp(-eta s) / Gamma(eta), unit mean for all eta
    s = np.asarray(s, float)
    with np.errstate(divide="ignore"):
        logpdf = eta * np.log(eta) + special.xlogy(eta - 1.0, s) - eta * s - special.gammaln(eta)
    return np.exp(logpdf)


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("spacing argument must be non-negative")
    return s


def theory_nnsd(kind, s):
    """Nearest-neighbor spacing density for a named kind or a gamma-family eta.

    Accepts "poisson", "semi_poisson", "goe" (Wigner surmise) or a numeric
    eta >= 1; eta = 1 and 2 reproduce the Poisson and semi-Poisson forms
    exactly.
    """
    s = _check_s(s)
    if isinstance(kind, str):
        if kind == "poisson":
            out = np.exp(-s)
        elif kind == "semi_poisson":
            out = 4.0 * s * np.exp(-2.0 * s)
        elif kind == "goe":
            out = 0.5 * np.pi * s * np.exp(-0.25 * np.pi * s * s)
        else:
            raise ValueError(f"unknown NNSD kind {kind!r}")
    else:
        eta = float(kind)
        if eta < 1.0:
            raise ValueError("eta must be >= 1")
        out = _gamma_family_pdf(s, eta)
    return out if out.ndim else float(out)


def theory_integrated_nnsd(kind, s):
    """Cumulative of theory_nnsd; closed forms for the named kinds."""
    s = _check_s(s)
    if isinstance(kind, str):
        if kind == "poisson":
            out = 1.0 - np.exp(-s)
        elif kind == "semi_poisson":
            out = 1.0 - (1.0 + 2.0 * s) * np.exp(-2.0 * s)
        elif kind == "goe":
            out = 1.0 - np.exp(-0.25 * np.pi * s * s)
        else:
            raise ValueError(f"unknown NNSD kind {kind!r}")
    else:
        eta = float(kind)
        if eta < 1.0:
            raise ValueError("eta must be >= 1")
        out = special.gammainc(eta, eta * s)
    return out if out.ndim else float(out)


def theory_second_nnsd(s):
    """Second-neighbor spacing density (8/3) s^3 exp(-2 s) (mean 2)."""
    s = _check_s(s)
    out = (8.0 / 3.0) * s**3 * np.exp(-2.0 * s)
    return out if out.ndim else float(out)


def theory_second_nnsd_cdf(s):
    """Cumulative of theory_second_nnsd (gamma with shape 4, rate 2)."""
    s = _check_s(s)
    out = special.gammainc(4.0, 2.0 * s)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# eta estimation
# ---------------------------------------------------------------------------


def fit_eta(sample, method: str = "mle", bins: int = 40, bootstrap: int = 40, seed: int = 0) -> EtaFit:
    """Estimate the gamma-family eta of a spacing sample.

    The sample mean is renormalized to one first, so the family has the
    single parameter eta (shape = rate).  "mle" solves the likelihood
    equation log(eta) - psi(eta) = -<log s> and reports the observed-
    information error; "histogram" least-squares fits the binned density
    (the figure-fit style) and reports a bootstrap error.
    """
    x = np.asarray(sample, dtype=float)
    if x.size < 100:
        raise ValueError(f"need at least 100 spacings, got {x.size}")
    if np.any(x < 0):
        raise ValueError("spacings must be non-negative")
    if np.all(x == x[0]):
        raise ValueError("degenerate sample: all spacings equal")
    s = x / np.mean(x)

    if method == "mle":
        eta = _eta_mle(s)
        info = s.size * (special.polygamma(1, eta) - 1.0 / eta)
        if info <= 0:
            raise ValueError("observed information is not positive; fit failed")
        return EtaFit(eta=eta, std_error=float(1.0 / np.sqrt(info)), method="MLE")

    if method == "histogram":
        eta = _eta_hist(s, bins)
        rng = np.random.default_rng(seed)
        replicas = []
        for _ in range(bootstrap):
            res = s[rng.integers(0, s.size, s.size)]
            try:
                replicas.append(_eta_hist(res / res.mean(), bins))
            except RuntimeError:
                continue
        if len(replicas) < 2:
            raise ValueError("bootstrap failed to produce refits")
        return EtaFit(eta=eta, std_error=float(np.std(replicas, ddof=1)), method="histogram-LSQ")

    raise ValueError(f"unknown method {method!r}")


def _eta_mle(s: np.ndarray) -> float:
    # exact zero spacings (degenerate levels) are excluded from <log s>;
    # they carry zero likelihood weight for every eta > 1
    target = -float(np.mean(np.log(s[s > 0])))

    def g(eta):
        return np.log(eta) - special.digamma(eta) - target

    lo, hi = 1e-3, 4.0
    while g(hi) > 0 and hi < 1e6:
        hi *= 2.0
    if g(hi) > 0:
        raise ValueError("likelihood equation has no root; sample too rigid")
    return float(brentq(g, lo, hi, xtol=1e-12, rtol=1e-14))


def _eta_hist(s: np.ndarray, bins: int) -> float:
    dens, edges = np.histogram(s, bins=bins, range=(0.0, 4.0), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    popt, _ = curve_fit(_gamma_family_pdf, centers, dens, p0=(1.5,), maxfev=2000)
    return float(popt[0])


# ---------------------------------------------------------------------------
# Cumulative deviations and power spectrum
# ---------------------------------------------------------------------------


def delta_series(spectrum: UnfoldedSpectrum) -> DeltaSeries:
    """Deviations of each unfolded level from its mean position."""
    eps = spectrum.epsilons
    if eps.size < 3:
        raise ValueError("need at least three levels")
    n = eps.size - 1
    values = eps[:n] - eps[0] - np.arange(n)
    return DeltaSeries(values=values, n=n)


def power_spectrum(series: DeltaSeries) -> PowerSpectrumEstimate:
    """Discrete power spectrum |delta~_k|^2 with the 1/sqrt(N) normalization."""
    n = series.n
    if n < 8:
        raise ValueError(f"need at least 8 deltas, got {n}")
    ft = np.fft.fft(series.values) / np.sqrt(n)
    power = np.abs(ft) ** 2
    return PowerSpectrumEstimate(
        k=np.arange(1, n), s_of_k=power[1:], n=n, ensembles_averaged=1, dc=float(power[0])
    )


def mean_power_spectrum(estimates) -> PowerSpectrumEstimate:
    """Average power spectra of equal length over an ensemble."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("nothing to average")
    n = estimates[0].n
    if any(e.n != n for e in estimates):
        raise ValueError("all spectra must share one sequence length")
    stack = np.stack([e.s_of_k for e in estimates])
    return PowerSpectrumEstimate(
        k=np.arange(1, n),
        s_of_k=stack.mean(axis=0),
        n=n,
        ensembles_averaged=int(sum(e.ensembles_averaged for e in estimates)),
        dc=float(np.mean([e.dc for e in estimates])),
    )


def spectral_form_factor(kind: str, tau):
    """K(tau) for Poisson, semi-Poisson, or GOE statistics.

    The GOE branch for tau > 1 is the standard continuation
    2 - tau*log((2 tau + 1)/(2 tau - 1)); it is continuous at tau = 1 and
    is required for convergent absorption integrals.
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise ValueError("tau must be non-negative")
    if kind == "poisson":
        out = np.ones_like(tau_arr)
    elif kind == "semi_poisson":
        p2 = np.pi**2 * tau_arr**2
        out = (2.0 + p2) / (4.0 + p2)
    elif kind == "goe":
        small = tau_arr <= 1.0
        out = np.empty_like(tau_arr)
        ts = tau_arr[small]
        out[small] = 2.0 * ts - ts * np.log1p(2.0 * ts)
        tl = tau_arr[~small]
        out[~small] = 2.0 - tl * np.log((2.0 * tl + 1.0) / (2.0 * tl - 1.0))
    else:
        raise ValueError(f"unknown form-factor kind {kind!r}")
    return out if out.ndim else float(out)


def default_delta_offset(kind: str) -> float:
    if kind == "poisson":
        return DELTA_POISSON
    if kind == "goe":
        return DELTA_GOE
    if kind == "semi_poisson":
        return DELTA_SP_CALIBRATED
    raise ValueError(f"unknown form-factor kind {kind!r}")


def theory_power_spectrum(kind: str, k, n: int, delta_offset: float | None = None):
    """Ensemble-mean power spectrum from the form factor of the given kind.

    Evaluates the two form-factor terms plus the 1/(4 sin^2) kernel and the
    additive offset Delta (defaults per kind; the semi-Poisson value is the
    calibrated constant, not theory).  k = 0 and k = n are poles of the
    kernel and are rejected.
    """
    k_arr = np.asarray(k)
    if not np.issubdtype(k_arr.dtype, np.integer):
        if np.any(k_arr != np.floor(k_arr)):
            raise ValueError("wavenumbers must be integers")
        k_arr = k_arr.astype(int)
    if np.any((k_arr <= 0) | (k_arr >= n)):
        raise ValueError("k must satisfy 1 <= k <= n-1 (k = 0 and k = n are poles)")
    if delta_offset is None:
        delta_offset = default_delta_offset(kind)
    kt = k_arr / float(n)
    bracket = (spectral_form_factor(kind, kt) - 1.0) / kt**2
    bracket = bracket + (spectral_form_factor(kind, 1.0 - kt) - 1.0) / (1.0 - kt) ** 2
    out = bracket / (4.0 * np.pi**2) + 1.0 / (4.0 * np.sin(np.pi * kt) ** 2) + delta_offset
    return out if out.ndim else float(out)


def calibrate_delta_sp(
    n_sequences: int = 40000,
    length: int = 513,
    seed: RandomSeed | None = None,
    k_max_fraction: float = 0.25,
) -> float:
    """Monte Carlo calibration of the semi-Poisson power-spectrum offset.

    Averages the power spectrum of decimated-Poisson sequences and returns
    the offset minimizing the mean squared relative deviation from the
    form-factor curve over k <= k_max_fraction * N.
    """
    if seed is None:
        seed = RandomSeed(202608)
    spec = EnsembleSpec(kind="poisson", count=2 * length + 2)
    acc = None
    for i in range(n_sequences):
        seq = daisy_thin(sample_gamma_levels(spec, seed.stream(i)), 2)
        est = power_spectrum(delta_series(UnfoldedSpectrum.from_levels(seq.levels[:length])))
        acc = est.s_of_k if acc is None else acc + est.s_of_k
    mean = acc / n_sequences
    n = length - 1
    k = np.arange(1, n)
    sel = k <= int(k_max_fraction * n)
    base = theory_power_spectrum("semi_poisson", k[sel], n, delta_offset=0.0)
    emp = mean[sel]

    def objective(d):
        th = base + d
        return float(np.mean(((emp - th) / th) ** 2))

    res = minimize_scalar(objective, bounds=(-0.5, 0.5), method="bounded")
    return float(res.x)


# ---------------------------------------------------------------------------
# Goodness of fit
# ---------------------------------------------------------------------------


def gof_distance(sample, theory, metric: str = "ks", bins: int = 40) -> float:
    """Distance between a sample and a theory CDF or a second sample.

    `theory` is either a callable CDF (one-sample test) or an array
    (two-sample test).  "ks" returns the sup-norm statistic, "chi2" the
    chi-square statistic over `bins` equal-width bins (expected counts
    below 5 are merged into their neighbor).
    """
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    if metric == "ks":
        if callable(theory):
            return float(sps.ks_1samp(x, theory).statistic)
        y = np.asarray(theory, dtype=float)
        if y.size == 0:
            raise ValueError("empty reference sample")
        return float(sps.ks_2samp(x, y).statistic)
    if metric == "chi2":
        if callable(theory):
            lo, hi = float(np.min(x)), float(np.max(x))
            edges = np.linspace(lo, hi, bins + 1)
            observed, _ = np.histogram(x, bins=edges)
            cdf = np.asarray(theory(edges), dtype=float)
            expected = x.size * np.diff(cdf) / max(cdf[-1] - cdf[0], 1e-300)
        else:
            y = np.asarray(theory, dtype=float)
            if y.size == 0:
                raise ValueError("empty reference sample")
            pooled = np.concatenate([x, y])
            edges = np.linspace(pooled.min(), pooled.max(), bins + 1)
            observed, _ = np.histogram(x, bins=edges)
            ref, _ = np.histogram(y, bins=edges)
            expected = ref * (x.size / y.size)
        observed, expected = _merge_sparse_bins(observed.astype(float), expected)
        return float(np.sum((observed - expected) ** 2 / expected))
    raise ValueError(f"unknown metric {metric!r}")


def _merge_sparse_bins(observed: np.ndarray, expected: np.ndarray, min_expected: float = 5.0):
    obs_out, exp_out = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 and exp_out:
        obs_out[-1] += o_acc
        exp_out[-1] += e_acc
    if not exp_out:
        raise ValueError("too few samples for a chi-square comparison")
    return np.array(obs_out), np.array(exp_out)
