import numpy as np
import pytest
from scipy.integrate import quad

from levelstat import (
    DELTA_GOE,
    DELTA_POISSON,
    DELTA_SP_CALIBRATED,
    DeltaSeries,
    EnsembleSpec,
    RandomSeed,
    UnfoldedSpectrum,
    daisy_thin,
    delta_series,
    fit_eta,
    gof_distance,
    mean_power_spectrum,
    power_spectrum,
    sample_gamma_levels,
    spacing_histogram,
    spectral_form_factor,
    theory_integrated_nnsd,
    theory_nnsd,
    theory_power_spectrum,
    theory_second_nnsd,
)
from levelstat.stats import default_delta_offset


# ---------------------------------------------------------------------------
# Theory curves
# ---------------------------------------------------------------------------


def test_nnsd_point_values():
    assert theory_nnsd("poisson", 0.0) == 1.0
    assert theory_nnsd("semi_poisson", 0.5) == pytest.approx(2.0 / np.e, rel=1e-12)
    assert theory_nnsd("goe", 0.0) == 0.0


def test_gamma_family_reduces_to_named_forms():
    s = np.linspace(0.1, 5.0, 50)
    np.testing.assert_allclose(theory_nnsd(2.0, s), theory_nnsd("semi_poisson", s), rtol=1e-14)
    np.testing.assert_allclose(theory_nnsd(1.0, s), theory_nnsd("poisson", s), rtol=1e-14)


def test_nnsd_domain_errors():
    with pytest.raises(ValueError):
        theory_nnsd("poisson", -0.1)
    with pytest.raises(ValueError):
        theory_nnsd(0.5, 1.0)
    with pytest.raises(ValueError):
        theory_nnsd("brody", 1.0)


@pytest.mark.parametrize("kind", ["poisson", "semi_poisson", "goe", 3.7])
def test_densities_integrate_to_one(kind):
    total, err = quad(lambda s: theory_nnsd(kind, s), 0.0, 60.0, limit=200)
    assert abs(total - 1.0) < 1e-9


@pytest.mark.parametrize("eta", [1.0, 1.5, 2.0, 4.0])
def test_gamma_family_mean_is_one(eta):
    mean, _ = quad(lambda s: s * theory_nnsd(eta, s), 0.0, 80.0, limit=200)
    assert abs(mean - 1.0) < 1e-9


def test_integrated_nnsd_values():
    assert theory_integrated_nnsd("semi_poisson", 0.0) == 0.0
    assert theory_integrated_nnsd("semi_poisson", 40.0) == pytest.approx(1.0, abs=1e-12)
    assert theory_integrated_nnsd("semi_poisson", 1.0) == pytest.approx(
        1.0 - 3.0 * np.exp(-2.0), rel=1e-12
    )


@pytest.mark.parametrize("kind", ["poisson", "semi_poisson", "goe", 2.6])
def test_integrated_matches_quadrature(kind):
    # independent quadrature of the density against the closed cumulative
    for s in (0.3, 1.0, 2.7):
        numeric, _ = quad(lambda u: theory_nnsd(kind, u), 0.0, s, limit=200)
        assert abs(numeric - theory_integrated_nnsd(kind, s)) < 1e-10


def test_integrated_monotone():
    s = np.linspace(0.0, 8.0, 300)
    for kind in ("poisson", "semi_poisson", "goe"):
        assert np.all(np.diff(theory_integrated_nnsd(kind, s)) >= 0)


def test_second_nnsd_shape():
    assert theory_second_nnsd(0.0) == 0.0
    # analytic mode of (8/3) s^3 exp(-2s) at s = 3/2, value 9 e^-3
    assert theory_second_nnsd(1.5) == pytest.approx(9.0 * np.exp(-3.0), rel=1e-12)
    grid = np.linspace(1.3, 1.7, 200)
    assert abs(grid[np.argmax(theory_second_nnsd(grid))] - 1.5) < 0.005
    mean, _ = quad(lambda s: s * theory_second_nnsd(s), 0.0, 80.0, limit=200)
    assert abs(mean - 2.0) < 1e-9


def test_second_nnsd_is_self_convolution():
    # P(2, s) = int p(u) p(s-u) du with p the nearest-neighbor density
    for s in (0.5, 1.5, 3.0, 5.0):
        conv, _ = quad(
            lambda u: theory_nnsd("semi_poisson", u) * theory_nnsd("semi_poisson", s - u),
            0.0,
            s,
            limit=200,
        )
        assert abs(conv - theory_second_nnsd(s)) < 1e-8


# ---------------------------------------------------------------------------
# eta fitting
# ---------------------------------------------------------------------------


def test_fit_eta_semi_poisson():
    seq = sample_gamma_levels(EnsembleSpec(kind="semi_poisson", count=10**5), RandomSeed(21))
    fit = fit_eta(seq.nn_spacings())
    assert fit.method == "MLE"
    assert abs(fit.eta - 2.0) < 0.03
    assert 0.0 < fit.std_error < 0.02


def test_fit_eta_poisson():
    seq = sample_gamma_levels(EnsembleSpec(kind="poisson", count=10**5), RandomSeed(22))
    fit = fit_eta(seq.nn_spacings())
    assert abs(fit.eta - 1.0) < 0.03


def test_fit_eta_std_error_at_paper_sample_size():
    seq = sample_gamma_levels(EnsembleSpec(kind="semi_poisson", count=9225), RandomSeed(23))
    fit = fit_eta(seq.nn_spacings())
    assert fit.std_error <= 0.05


def test_fit_eta_scale_consistency():
    seq = sample_gamma_levels(EnsembleSpec(kind="semi_poisson", count=5000), RandomSeed(24))
    s = seq.nn_spacings()
    base = fit_eta(s)
    # power-of-two rescaling commutes exactly with the internal mean
    # normalization, so the estimate is bit-identical
    assert fit_eta(4.0 * s).eta == base.eta
    assert fit_eta(3.7 * s).eta == pytest.approx(base.eta, rel=1e-9)


def test_fit_eta_histogram_method():
    seq = sample_gamma_levels(EnsembleSpec(kind="semi_poisson", count=4 * 10**4), RandomSeed(25))
    fit = fit_eta(seq.nn_spacings(), method="histogram", bootstrap=20, seed=1)
    assert fit.method == "histogram-LSQ"
    assert abs(fit.eta - 2.0) < 0.1
    assert fit.std_error > 0


def test_fit_eta_errors():
    with pytest.raises(ValueError, match="at least 100"):
        fit_eta(np.ones(50))
    with pytest.raises(ValueError, match="non-negative"):
        fit_eta(np.concatenate([np.ones(200), [-0.1]]))
    with pytest.raises(ValueError, match="degenerate"):
        fit_eta(np.ones(200))
    with pytest.raises(ValueError, match="method"):
        fit_eta(np.random.default_rng(0).exponential(size=200), method="bogus")


# ---------------------------------------------------------------------------
# Delta statistic and power spectrum
# ---------------------------------------------------------------------------


def test_delta_series_rigid_spectrum():
    spectrum = UnfoldedSpectrum.from_levels(np.arange(100, dtype=float))
    series = delta_series(spectrum)
    assert series.n == 99
    np.testing.assert_array_equal(series.values, 0.0)


def test_delta_zero_is_always_zero():
    seq = sample_gamma_levels(EnsembleSpec(kind="poisson", count=500), RandomSeed(26))
    series = delta_series(UnfoldedSpectrum.from_sequence(seq))
    assert series.values[0] == 0.0


def test_delta_variance_grows_linearly_for_poisson():
    seed = RandomSeed(27)
    count = 2001
    deltas = []
    for i in range(2000):
        seq = sample_gamma_levels(EnsembleSpec(kind="poisson", count=count), seed.stream(i))
        deltas.append(delta_series(UnfoldedSpectrum.from_sequence(seq)).values)
    deltas = np.array(deltas)
    v20 = deltas[:, 20].var()
    v80 = deltas[:, 80].var()
    assert 3.4 < v80 / v20 < 4.6  # random-walk scaling, bridge correction is tiny


def test_power_spectrum_zero_input():
    series = DeltaSeries(values=np.zeros(64), n=64)
    est = power_spectrum(series)
    np.testing.assert_array_equal(est.s_of_k, 0.0)
    assert est.dc == 0.0


def test_power_spectrum_parseval():
    seq = sample_gamma_levels(EnsembleSpec(kind="semi_poisson", count=513), RandomSeed(28))
    series = delta_series(UnfoldedSpectrum.from_sequence(seq))
    est = power_spectrum(series)
    total = est.dc + est.s_of_k.sum()
    assert total == pytest.approx(np.sum(series.values**2), rel=1e-9)


def test_power_spectrum_shift_invariance():
    seq = sample_gamma_levels(EnsembleSpec(kind="semi_poisson", count=257), RandomSeed(29))
    spectrum = UnfoldedSpectrum.from_sequence(seq)
    shifted = UnfoldedSpectrum(epsilons=spectrum.epsilons + 7.25, source=spectrum.source)
    a = power_spectrum(delta_series(spectrum))
    b = power_spectrum(delta_series(shifted))
    np.testing.assert_allclose(a.s_of_k, b.s_of_k, rtol=1e-9, atol=1e-12)


def test_power_spectrum_symmetry():
    seq = sample_gamma_levels(EnsembleSpec(kind="poisson", count=129), RandomSeed(30))
    est = power_spectrum(delta_series(UnfoldedSpectrum.from_sequence(seq)))
    n = est.n
    for k in (1, 5, 20):
        assert est.s_of_k[k - 1] == pytest.approx(est.s_of_k[n - k - 1], rel=1e-9)


def test_power_spectrum_size_guard():
    with pytest.raises(ValueError):
        power_spectrum(DeltaSeries(values=np.zeros(5), n=5))


def test_theory_power_spectrum_poles_and_small_k():
    n = 512
    with pytest.raises(ValueError):
        theory_power_spectrum("poisson", 0, n)
    with pytest.raises(ValueError):
        theory_power_spectrum("poisson", n, n)
    # Poisson with Delta = 0 at small k approaches N^2 / (4 pi^2 k^2)
    for k in (1, 2, 4):
        expected = n**2 / (4.0 * np.pi**2 * k**2)
        assert theory_power_spectrum("poisson", k, n, 0.0) == pytest.approx(expected, rel=2e-3)


def test_theory_power_spectrum_semi_poisson_ratio():
    n = 4096
    ratio = theory_power_spectrum("semi_poisson", 1, n, 0.0) / theory_power_spectrum(
        "poisson", 1, n, 0.0
    )
    assert ratio == pytest.approx(0.5, abs=0.01)


def test_theory_power_spectrum_goe_small_k_slope():
    # K(0) = 0 cancels the 1/k^2 terms, leaving a 1/k law
    n = 1 << 14
    s1 = theory_power_spectrum("goe", 1, n, 0.0)
    s2 = theory_power_spectrum("goe", 2, n, 0.0)
    assert s1 / s2 == pytest.approx(2.0, rel=0.05)


def test_poisson_power_spectrum_monte_carlo():
    # 1e3 sequences of n = 512 against the closed curve with Delta = 0
    seed = RandomSeed(32)
    count = 513
    estimates = []
    for i in range(1000):
        seq = sample_gamma_levels(EnsembleSpec(kind="poisson", count=count), seed.stream(i))
        estimates.append(power_spectrum(delta_series(UnfoldedSpectrum.from_sequence(seq))))
    mean = mean_power_spectrum(estimates)
    n = mean.n
    k = mean.k[mean.k <= n // 4]
    theory = theory_power_spectrum("poisson", k, n, DELTA_POISSON)
    rel = (mean.s_of_k[: k.size] - theory) / theory
    assert np.sqrt(np.mean(rel**2)) < 0.05


def test_mean_power_spectrum_bookkeeping():
    seq = sample_gamma_levels(EnsembleSpec(kind="poisson", count=65), RandomSeed(33))
    est = power_spectrum(delta_series(UnfoldedSpectrum.from_sequence(seq)))
    mean = mean_power_spectrum([est, est, est])
    assert mean.ensembles_averaged == 3
    np.testing.assert_allclose(mean.s_of_k, est.s_of_k)
    with pytest.raises(ValueError):
        mean_power_spectrum([])


# ---------------------------------------------------------------------------
# Form factors
# ---------------------------------------------------------------------------


def test_form_factor_values():
    assert spectral_form_factor("poisson", 3.3) == 1.0
    assert spectral_form_factor("semi_poisson", 0.0) == 0.5
    assert spectral_form_factor("semi_poisson", 1e9) == pytest.approx(1.0, abs=1e-9)
    assert spectral_form_factor("goe", 1.0) == pytest.approx(2.0 - np.log(3.0), rel=1e-14)


def test_goe_form_factor_branches_agree_at_one():
    below = 2.0 * 1.0 - 1.0 * np.log1p(2.0)
    above = 2.0 - 1.0 * np.log((2.0 + 1.0) / (2.0 - 1.0))
    assert abs(below - above) < 1e-12
    assert spectral_form_factor("goe", 1.0) == pytest.approx(below, abs=1e-12)


def test_form_factor_domain():
    with pytest.raises(ValueError):
        spectral_form_factor("goe", -0.5)
    with pytest.raises(ValueError):
        spectral_form_factor("gue", 0.5)


def test_delta_offsets():
    assert default_delta_offset("poisson") == DELTA_POISSON == 0.0
    assert default_delta_offset("goe") == DELTA_GOE == pytest.approx(-1.0 / 12.0)
    assert default_delta_offset("semi_poisson") == DELTA_SP_CALIBRATED
    assert -0.08 < DELTA_SP_CALIBRATED < -0.05


# ---------------------------------------------------------------------------
# Goodness of fit and histograms
# ---------------------------------------------------------------------------


def test_gof_ks_consistency():
    seq = sample_gamma_levels(EnsembleSpec(kind="poisson", count=10**4), RandomSeed(34))
    d = gof_distance(seq.nn_spacings(), lambda s: theory_integrated_nnsd("poisson", s))
    assert d < 1.63 / np.sqrt(10**4)  # 99% KS critical value


def test_gof_discriminates_poisson_from_semi_poisson():
    seq = sample_gamma_levels(EnsembleSpec(kind="poisson", count=10**5), RandomSeed(35))
    d = gof_distance(seq.nn_spacings(), lambda s: theory_integrated_nnsd("semi_poisson", s))
    assert d > 0.1  # analytic sup-norm between the two CDFs is ~0.139


def test_gof_identical_samples():
    x = np.linspace(0.1, 3.0, 500)
    assert gof_distance(x, x, metric="ks") == 0.0


def test_gof_chi2_and_errors():
    rng = np.random.default_rng(0)
    x = rng.exponential(size=5000)
    chi2_same = gof_distance(x, lambda s: 1.0 - np.exp(-s), metric="chi2")
    chi2_off = gof_distance(x, lambda s: theory_integrated_nnsd("semi_poisson", s), metric="chi2")
    assert chi2_off > 10 * chi2_same
    with pytest.raises(ValueError):
        gof_distance(np.array([]), lambda s: s)
    with pytest.raises(ValueError):
        gof_distance(x, lambda s: s, metric="manhattan")


def test_spacing_histogram_normalization():
    seq = sample_gamma_levels(EnsembleSpec(kind="semi_poisson", count=20000), RandomSeed(36))
    hist = spacing_histogram(seq.nn_spacings(), bins=40, srange=(0.0, 4.0))
    integral = np.sum(hist.densities * np.diff(hist.bin_edges))
    assert integral == pytest.approx(1.0, abs=1e-9)
    assert hist.centers.size == 40
