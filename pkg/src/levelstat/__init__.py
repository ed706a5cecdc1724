"""Spectral statistics of the Poisson / semi-Poisson / GOE transition.

Generators for synthetic level sequences, rectangular-cavity spectra with
point scatterers, Weyl-law unfolding, spacing and power-spectrum
statistics, and a two-port scattering stack culminating in the elastic
enhancement factor and its closed-form semi-Poisson theory curve.
"""

from .ensembles import (
    EnsembleSpec,
    LevelSequence,
    RandomSeed,
    daisy_thin,
    sample_gamma_levels,
    sample_goe_levels,
)
from .billiard import (
    CavityGeometry,
    ScattererSet,
    WeylLaw,
    perturb_point_scatterers,
    rectangle_eigenfrequencies,
    weyl_counting,
    weyl_law_from_geometry,
)
from .unfolding import FitReport, UnfoldedSpectrum, fit_weyl, pool_spacings, spacings, unfold
from .stats import (
    DELTA_GOE,
    DELTA_POISSON,
    DELTA_SP_CALIBRATED,
    DeltaSeries,
    EtaFit,
    PowerSpectrumEstimate,
    SpacingHistogram,
    delta_series,
    fit_eta,
    gof_distance,
    mean_power_spectrum,
    power_spectrum,
    spacing_histogram,
    spectral_form_factor,
    theory_integrated_nnsd,
    theory_nnsd,
    theory_power_spectrum,
    theory_second_nnsd,
)
from .scattering import (
    AbsorptionBudget,
    DiagonalLevels,
    EefCurve,
    GoeHamiltonian,
    HeidelbergModel,
    SMatrixSeries,
    WindowSpec,
    b2_form_factor,
    eef_estimate,
    eef_theory_goe,
    eef_theory_integral,
    eef_theory_sp_closed,
    sici,
    simulate_smatrix,
    total_absorption,
    transmission_coefficients,
)
from .errors import NumericalConvergenceError, UncoupledScattererWarning

__version__ = "0.1.0"
