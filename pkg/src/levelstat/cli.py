"""Command-line pipeline: `levelstat <subcommand> --config <path> [...]`.

Subcommands generate synthetic ensembles, billiard spectra (with the
two-scatterer length sweep), unfold spectra, build spacing histograms and
power spectra with their theory curves, run the scattering simulation, and
tabulate the enhancement-factor theory.  Every emitted number is traceable
through the manifest to an operation, its parameters, and a seed.

Exit codes: 0 success, 2 validation error, 3 numerical-convergence failure.
The only environment knob is LEVELSTAT_THREADS (worker threads for
embarrassingly parallel sweeps; default 1).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from . import billiard as bl
from . import dataio
from . import scattering as sc
from . import stats as st
from . import unfolding as uf
from .ensembles import EnsembleSpec, RandomSeed, daisy_thin, sample_gamma_levels, sample_goe_levels
from .errors import NumericalConvergenceError

__all__ = ["AnalysisConfig", "parse_config", "run_pipeline", "main"]

SUBCOMMANDS = (
    "generate",
    "billiard",
    "unfold",
    "nnsd",
    "p2s",
    "powerspec",
    "eef-sim",
    "eef-theory",
    "full-report",
)

# disjoint seed-stream blocks per pipeline stage
_STREAM_POISSON = 0
_STREAM_SEMI_POISSON = 1_000_000
_STREAM_GOE = 2_000_000
_STREAM_POWER = 3_000_000
_STREAM_NNSD = 4_000_000
_STREAM_EEF = 5_000_000
_STREAM_P2S = 6_000_000


@dataclass
class AnalysisConfig:
    band_low_ghz: float = 8.0
    band_high_ghz: float = 13.5
    estimate_window_ghz: float = 0.025
    average_window_ghz: float = 0.5
    window_step_ghz: float = 0.025
    histogram_bins: int = 40
    seed_master: int = 20260810
    output_dir: str = "levelstat-out"
    spacing_sample_size: int = 100_000
    sequence_length: int = 513
    power_sequences: int = 1000
    n_realizations: int = 40
    goe_matrix_dim: int = 200
    cavity_length_m: float = 0.365
    cavity_width_m: float = 0.202
    cavity_height_m: float = 0.008
    sweep_steps: int = 25
    sweep_step_m: float = 0.002
    scatterer_strength: float = 1.0
    scatterer1_x_m: float = 0.1037
    scatterer1_y_m: float = 0.0567
    scatterer2_x_m: float = 0.2381
    scatterer2_y_m: float = 0.1493
    mean_spacing_ghz: float = 0.018
    transmission_target: float = 0.25
    gamma_internal: float = 2.0
    parasitic_count: int = 40
    grid_step_ghz: float = 0.005
    gamma_grid_low: float = 0.01
    gamma_grid_high: float = 100.0
    gamma_grid_points: int = 61

    def validate(self):
        problems = []
        if not self.band_low_ghz < self.band_high_ghz:
            problems.append("band_low_ghz must be below band_high_ghz")
        for name in (
            "estimate_window_ghz",
            "average_window_ghz",
            "window_step_ghz",
            "grid_step_ghz",
            "mean_spacing_ghz",
            "sweep_step_m",
            "cavity_length_m",
            "cavity_width_m",
            "cavity_height_m",
            "gamma_grid_low",
            "gamma_grid_high",
        ):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.estimate_window_ghz > self.average_window_ghz:
            problems.append("estimate_window_ghz cannot exceed average_window_ghz")
        for name in (
            "histogram_bins",
            "spacing_sample_size",
            "sequence_length",
            "power_sequences",
            "n_realizations",
            "goe_matrix_dim",
            "sweep_steps",
            "gamma_grid_points",
        ):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be a positive integer")
        if not 0.0 < self.transmission_target <= 1.0:
            problems.append("transmission_target must lie in (0, 1]")
        if self.gamma_internal < 0:
            problems.append("gamma_internal must be non-negative")
        if self.parasitic_count < 0:
            problems.append("parasitic_count must be non-negative")
        if self.gamma_grid_low >= self.gamma_grid_high:
            problems.append("gamma_grid_low must be below gamma_grid_high")
        if problems:
            raise ValueError("invalid configuration:\n  " + "\n  ".join(problems))

    def window_spec(self) -> sc.WindowSpec:
        return sc.WindowSpec(
            estimate_window=self.estimate_window_ghz,
            average_window=self.average_window_ghz,
            step=self.window_step_ghz,
        )

    def geometry(self) -> bl.CavityGeometry:
        return bl.CavityGeometry(
            length_l1=self.cavity_length_m,
            width_l2=self.cavity_width_m,
            height_d=self.cavity_height_m,
        )

    def seed(self) -> RandomSeed:
        return RandomSeed(self.seed_master)


_FIELD_TYPES = {f.name: f.type for f in dc_fields(AnalysisConfig)}


def parse_config(path: str) -> AnalysisConfig:
    """Read a flat `key = value` file; every violation is reported at once."""
    values = {}
    problems = []
    with open(path, "r") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems.append(f"line {lineno}: expected 'key = value'")
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _FIELD_TYPES:
                problems.append(f"line {lineno}: unknown key {key!r}")
                continue
            kind = _FIELD_TYPES[key]
            try:
                if kind in ("int", int):
                    values[key] = int(value)
                elif kind in ("float", float):
                    values[key] = float(value)
                else:
                    values[key] = value
            except ValueError:
                problems.append(f"line {lineno}: cannot parse {key} = {value!r} as {kind}")
    if problems:
        raise ValueError(f"invalid configuration file {path}:\n  " + "\n  ".join(problems))
    config = AnalysisConfig(**values)
    config.validate()
    return config


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get("LEVELSTAT_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    threads = _n_threads()
    items = list(items)
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------


def _stage_generate(config: AnalysisConfig, bundle: dataio.PlotBundle, prefix: str = ""):
    seed = config.seed()
    count = config.sequence_length
    specs = {
        "poisson": (EnsembleSpec(kind="poisson", count=count), _STREAM_POISSON),
        "semi_poisson": (EnsembleSpec(kind="semi_poisson", count=count), _STREAM_SEMI_POISSON),
        "goe": (
            EnsembleSpec(kind="goe", count=count, matrix_dim=max(2 * count, 64)),
            _STREAM_GOE,
        ),
    }
    for name, (spec, stream) in specs.items():
        sequences = []
        for r in range(config.n_realizations):
            s = seed.stream(stream + r)
            seq = sample_goe_levels(spec, s) if name == "goe" else sample_gamma_levels(spec, s)
            sequences.append(seq)
        table = dataio.ResonanceTable.from_sequences(sequences)
        bundle.add_table(
            prefix + "levels_" + name,
            {"realization_id": table.realization_ids, "level": table.frequencies},
            provenance=f"synthetic {name} ensemble",
            params={"count": count, "realizations": config.n_realizations,
                    "seed": config.seed_master, "stream_base": stream},
        )


def _sweep_geometries(config: AnalysisConfig):
    for step in range(config.sweep_steps):
        yield step, bl.CavityGeometry(
            length_l1=config.cavity_length_m + step * config.sweep_step_m,
            width_l2=config.cavity_width_m,
            height_d=config.cavity_height_m,
        )


def _sweep_sequences(config: AnalysisConfig):
    scatterers = bl.ScattererSet(
        positions=((config.scatterer1_x_m, config.scatterer1_y_m),
                   (config.scatterer2_x_m, config.scatterer2_y_m)),
        strengths=config.scatterer_strength,
    )
    band = (config.band_low_ghz, config.band_high_ghz)

    def solve(item):
        _, geom = item
        return bl.perturb_point_scatterers(geom, scatterers, band)

    return _parallel_map(solve, _sweep_geometries(config))


def _stage_billiard(config: AnalysisConfig, bundle: dataio.PlotBundle, prefix: str = ""):
    geom = config.geometry()
    spectrum = bl.rectangle_eigenfrequencies(geom, config.band_high_ghz)
    law = bl.weyl_law_from_geometry(geom)
    nu = np.linspace(spectrum.levels[0], config.band_high_ghz, 200)
    bundle.add_table(
        prefix + "billiard_spectrum",
        {"frequency_ghz": spectrum.levels},
        provenance="Dirichlet rectangle eigenfrequencies",
        params={"l1_m": geom.length_l1, "l2_m": geom.width_l2, "numax_ghz": config.band_high_ghz},
    )
    bundle.add_table(
        prefix + "weyl_counting",
        {"frequency_ghz": nu, "smooth_count": law(nu)},
        provenance="geometry-derived quadratic counting law",
        params={"a2": law.a2, "a1": law.a1, "a0": law.a0},
    )
    perturbed = _sweep_sequences(config)
    table = dataio.ResonanceTable.from_sequences(perturbed)
    bundle.add_table(
        prefix + "billiard_sweep",
        {"realization_id": table.realization_ids, "frequency_ghz": table.frequencies},
        provenance="two-scatterer spectra over the cavity-length sweep",
        params={
            "steps": config.sweep_steps,
            "step_m": config.sweep_step_m,
            "strength": config.scatterer_strength,
            "band_ghz": [config.band_low_ghz, config.band_high_ghz],
        },
    )
    return perturbed


def _stage_unfold(config: AnalysisConfig, bundle: dataio.PlotBundle, prefix: str = "",
                  sequences=None):
    if sequences is None:
        sequences = _sweep_sequences(config)
    spectra = []
    laws = []
    for seq in sequences:
        report = uf.fit_weyl(seq)
        laws.append((report.law.a2, report.law.a1, report.law.a0, report.residual_rms))
        spectra.append(uf.unfold(seq, report.law))
    rid = np.concatenate([np.full(len(s), i) for i, s in enumerate(spectra)])
    eps = np.concatenate([s.epsilons for s in spectra])
    bundle.add_table(
        prefix + "unfolded_levels",
        {"realization_id": rid.astype(int), "epsilon": eps},
        provenance="per-realization quadratic unfolding of the sweep spectra",
        params={"fit": "free quadratic to the midpoint staircase",
                "mean_residual_rms": float(np.mean([l[3] for l in laws]))},
    )
    pooled = uf.pool_spacings(spectra, order=1)
    fit = st.fit_eta(pooled, method="mle")
    bundle.add_table(
        prefix + "unfolded_spacings",
        {"spacing": pooled},
        provenance="pooled nearest-neighbor spacings of the unfolded sweep",
        params={"eta_mle": fit.eta, "eta_std_error": fit.std_error},
    )
    return spectra


def _theory_curve_table(bundle, name, s_grid, curves, provenance, params):
    columns = {"s": s_grid}
    columns.update(curves)
    bundle.add_table(name, columns, provenance=provenance, params=params)


def _stage_nnsd(config: AnalysisConfig, bundle: dataio.PlotBundle, prefix: str = ""):
    seed = config.seed()
    spec = EnsembleSpec(kind="semi_poisson", count=config.spacing_sample_size + 1)
    seq = sample_gamma_levels(spec, seed.stream(_STREAM_NNSD))
    sample = seq.nn_spacings()
    hist = st.spacing_histogram(sample, bins=config.histogram_bins, srange=(0.0, 4.0))
    fit = st.fit_eta(sample, method="mle")
    bundle.add_table(
        prefix + "nnsd_histogram",
        {"s": hist.centers, "density": hist.densities},
        provenance="synthetic semi-Poisson nearest-neighbor spacing histogram",
        params={"count": int(hist.count), "eta_mle": fit.eta, "eta_std_error": fit.std_error,
                "seed": config.seed_master, "stream": _STREAM_NNSD},
    )
    s_grid = np.linspace(0.0, 4.0, 241)
    _theory_curve_table(
        bundle,
        prefix + "nnsd_theory",
        s_grid,
        {
            "poisson": st.theory_nnsd("poisson", s_grid),
            "semi_poisson": st.theory_nnsd("semi_poisson", s_grid),
            "goe": st.theory_nnsd("goe", s_grid),
            "eta_fit": st.theory_nnsd(fit.eta, s_grid),
            "integrated_semi_poisson": st.theory_integrated_nnsd("semi_poisson", s_grid),
        },
        provenance="analytic spacing densities and the fitted gamma-family curve",
        params={"eta_fit": fit.eta},
    )


def _stage_p2s(config: AnalysisConfig, bundle: dataio.PlotBundle, prefix: str = ""):
    seed = config.seed()
    spec = EnsembleSpec(kind="poisson", count=2 * config.spacing_sample_size + 4)
    daisy = daisy_thin(sample_gamma_levels(spec, seed.stream(_STREAM_P2S)), 2)
    spectrum = uf.UnfoldedSpectrum.from_sequence(daisy)
    second = uf.spacings(spectrum, order=2)
    hist = st.spacing_histogram(second, bins=config.histogram_bins, srange=(0.0, 6.0))
    bundle.add_table(
        prefix + "p2s_histogram",
        {"s": hist.centers, "density": hist.densities},
        provenance="synthetic semi-Poisson second-neighbor spacing histogram",
        params={"count": int(hist.count), "seed": config.seed_master, "stream": _STREAM_P2S},
    )
    s_grid = np.linspace(0.0, 6.0, 241)
    _theory_curve_table(
        bundle,
        prefix + "p2s_theory",
        s_grid,
        {
            "second_semi_poisson": st.theory_second_nnsd(s_grid),
            "poisson": st.theory_nnsd("poisson", s_grid),
            "semi_poisson": st.theory_nnsd("semi_poisson", s_grid),
            "goe": st.theory_nnsd("goe", s_grid),
        },
        provenance="second-neighbor theory next to the nearest-neighbor curves",
        params={},
    )


def _stage_powerspec(config: AnalysisConfig, bundle: dataio.PlotBundle, prefix: str = ""):
    seed = config.seed()
    count = config.sequence_length
    spec = EnsembleSpec(kind="poisson", count=2 * count + 2)
    estimates = []
    for i in range(config.power_sequences):
        daisy = daisy_thin(sample_gamma_levels(spec, seed.stream(_STREAM_POWER + i)), 2)
        spectrum = uf.UnfoldedSpectrum.from_levels(daisy.levels[:count], source="semi_poisson")
        estimates.append(st.power_spectrum(st.delta_series(spectrum)))
    mean = st.mean_power_spectrum(estimates)
    n = mean.n
    k = mean.k
    half = k <= n // 2
    bundle.add_table(
        prefix + "power_spectrum",
        {
            "k": k[half].astype(int),
            "mean_s_of_k": mean.s_of_k[half],
            "theory_semi_poisson": st.theory_power_spectrum("semi_poisson", k[half], n),
            "theory_poisson": st.theory_power_spectrum("poisson", k[half], n),
            "theory_goe": st.theory_power_spectrum("goe", k[half], n),
        },
        provenance="ensemble-mean power spectrum of decimated-Poisson sequences",
        params={
            "sequences": mean.ensembles_averaged,
            "n": n,
            "delta_sp": st.DELTA_SP_CALIBRATED,
            "seed": config.seed_master,
            "stream_base": _STREAM_POWER,
        },
    )


def _stage_eef_sim(config: AnalysisConfig, bundle: dataio.PlotBundle, prefix: str = "",
                   series=None, gamma_internal=None):
    if series is None:
        grid = np.arange(
            config.band_low_ghz, config.band_high_ghz + 1e-12, config.grid_step_ghz
        )
        blocks = _parallel_map(
            lambda b: sc.semi_poisson_scattering_ensemble(
                n_realizations=b[1],
                grid=grid,
                mean_spacing_ghz=config.mean_spacing_ghz,
                transmission=config.transmission_target,
                gamma_internal=config.gamma_internal,
                parasitic_count=config.parasitic_count,
                seed=config.seed().stream(_STREAM_EEF + 10 * b[0]),
            ),
            _split_blocks(config.n_realizations),
        )
        series = [s for block, _ in blocks for s in block]
        gamma_internal = blocks[0][1]
    curve = sc.eef_estimate(series, config.window_spec(), gamma_internal=gamma_internal)
    theory = np.array([sc.eef_theory_sp_closed(g) for g in curve.gamma_tot])
    bundle.add_table(
        prefix + "eef_curve",
        {
            "frequency_ghz": curve.frequency,
            "gamma_tot": curve.gamma_tot,
            "eef": curve.f_value,
            "std_dev": curve.std_dev,
            "theory_semi_poisson": theory,
        },
        provenance="windowed enhancement factor of the semi-Poisson scattering ensemble",
        params={
            "realizations": config.n_realizations,
            "transmission_target": config.transmission_target,
            "gamma_internal_design": float(gamma_internal),
            "seed": config.seed_master,
            "stream_base": _STREAM_EEF,
        },
    )
    return series


def _split_blocks(n_total: int, block: int = 8):
    out = []
    start = 0
    index = 0
    while start < n_total:
        out.append((index, min(block, n_total - start)))
        start += block
        index += 1
    return out


def _stage_eef_theory(config: AnalysisConfig, bundle: dataio.PlotBundle, prefix: str = ""):
    gammas = np.geomspace(config.gamma_grid_low, config.gamma_grid_high, config.gamma_grid_points)
    closed = np.array([sc.eef_theory_sp_closed(g) for g in gammas])
    quadrature = np.array([sc.eef_theory_integral("semi_poisson", g) for g in gammas])
    goe = np.array([sc.eef_theory_goe(g) for g in gammas])
    bundle.add_table(
        prefix + "eef_theory",
        {
            "gamma_tot": gammas,
            "semi_poisson_closed": closed,
            "semi_poisson_quadrature": quadrature,
            "goe": goe,
        },
        provenance="enhancement-factor theory curves (closed form, quadrature, GOE)",
        params={"grid": [config.gamma_grid_low, config.gamma_grid_high, config.gamma_grid_points]},
    )


def run_pipeline(config: AnalysisConfig, subcommand: str,
                 sparams_path: str | None = None) -> dataio.PlotBundle:
    """Run one subcommand into a PlotBundle (deterministic given seeds)."""
    config.validate()
    bundle = dataio.PlotBundle()
    if subcommand == "generate":
        _stage_generate(config, bundle)
    elif subcommand == "billiard":
        _stage_billiard(config, bundle)
    elif subcommand == "unfold":
        _stage_unfold(config, bundle)
    elif subcommand == "nnsd":
        _stage_nnsd(config, bundle)
    elif subcommand == "p2s":
        _stage_p2s(config, bundle)
    elif subcommand == "powerspec":
        _stage_powerspec(config, bundle)
    elif subcommand == "eef-sim":
        series = gamma = None
        if sparams_path is not None:
            series = dataio.ingest_sparams(sparams_path).series()
            gamma = config.gamma_internal
        _stage_eef_sim(config, bundle, series=series, gamma_internal=gamma)
    elif subcommand == "eef-theory":
        _stage_eef_theory(config, bundle)
    elif subcommand == "full-report":
        _stage_generate(config, bundle)
        sweep = _stage_billiard(config, bundle)
        _stage_unfold(config, bundle, sequences=sweep)
        _stage_nnsd(config, bundle)
        _stage_p2s(config, bundle)
        _stage_powerspec(config, bundle)
        _stage_eef_sim(config, bundle)
        _stage_eef_theory(config, bundle)
    else:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    bundle.validate()
    return bundle


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="levelstat",
        description="Spectral statistics and enhancement-factor pipeline",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--sparams", help="ingest an S-parameter table for eef-sim")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config) if args.config else AnalysisConfig()
        if args.seed is not None:
            config.seed_master = args.seed
        if args.out is not None:
            config.output_dir = args.out
        config.validate()
        bundle = run_pipeline(config, args.subcommand, sparams_path=args.sparams)
        dataio.write_bundle(bundle, config.output_dir)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(bundle.tables)} table(s) to {config.output_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
