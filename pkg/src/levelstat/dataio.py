"""File formats: resonance lists, S-parameter tables, and plot bundles.

All files are comma-separated with one '#' header line, '.' decimals, and
17-significant-digit floats so that emit/ingest round-trips are lossless.
Complex values travel as separate re/im columns.  Writes are atomic
(temp file + rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .ensembles import LevelSequence
from .scattering import SMatrixSeries

__all__ = [
    "ResonanceTable",
    "SParamTable",
    "PlotBundle",
    "ingest_resonances",
    "emit_resonances",
    "ingest_sparams",
    "emit_sparams",
    "write_bundle",
]

_FMT = "%.17g"

_RES_HEADER = "# realization_id,frequency_ghz,width_ghz"
_SPARAM_HEADER = (
    "# realization_id,frequency_ghz,re_s_aa,im_s_aa,re_s_ab,im_s_ab,"
    "re_s_ba,im_s_ba,re_s_bb,im_s_bb"
)

_FREQ_TOL_GHZ = 1e-9
_MAG_TOL = 1e-6


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class ResonanceTable:
    """Identified resonance frequencies, grouped by realization."""

    realization_ids: np.ndarray
    frequencies: np.ndarray
    widths: np.ndarray | None = None

    def __post_init__(self):
        ids = np.asarray(self.realization_ids, dtype=int)
        freqs = np.asarray(self.frequencies, dtype=float)
        object.__setattr__(self, "realization_ids", ids)
        object.__setattr__(self, "frequencies", freqs)
        if self.widths is not None:
            object.__setattr__(self, "widths", np.asarray(self.widths, dtype=float))
        if ids.shape != freqs.shape:
            raise ValueError("id and frequency columns must have equal length")
        for rid in np.unique(ids):
            f = freqs[ids == rid]
            if np.any(np.diff(f) <= _FREQ_TOL_GHZ):
                bad = int(np.flatnonzero(np.diff(f) <= _FREQ_TOL_GHZ)[0]) + 1
                raise ValueError(
                    f"realization {rid}: frequencies not strictly increasing at row {bad}"
                )

    def __len__(self) -> int:
        return int(self.realization_ids.size)

    @classmethod
    def from_sequences(cls, sequences, ids=None) -> "ResonanceTable":
        sequences = list(sequences)
        if ids is None:
            ids = range(len(sequences))
        rid = np.concatenate(
            [np.full(len(s), i, dtype=int) for i, s in zip(ids, sequences)]
        )
        freqs = np.concatenate([s.levels for s in sequences])
        return cls(realization_ids=rid, frequencies=freqs)

    def sequences(self, kind: str = "ingested"):
        """Per-realization LevelSequence list, ordered by realization id."""
        out = []
        for rid in np.unique(self.realization_ids):
            levels = self.frequencies[self.realization_ids == rid]
            out.append(LevelSequence.from_levels(levels, kind=kind))
        return out


def emit_resonances(table: ResonanceTable, path: str):
    lines = [_RES_HEADER]
    widths = table.widths
    for i in range(len(table)):
        w = "" if widths is None else "," + _FMT % widths[i]
        lines.append("%d,%s%s" % (table.realization_ids[i], _FMT % table.frequencies[i], w))
    _atomic_write(path, "\n".join(lines) + "\n")


def _parse_rows(path: str, expected_cols) -> list:
    rows = []
    with open(path, "r") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) not in expected_cols:
                raise ValueError(
                    f"{path}:{lineno}: expected {expected_cols} comma-separated fields, "
                    f"got {len(parts)}"
                )
            try:
                rows.append((lineno, int(parts[0]), [float(p) for p in parts[1:]]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: unparsable numeric field ({exc})") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def ingest_resonances(path: str) -> ResonanceTable:
    """Read and validate a resonance list; errors carry line numbers."""
    rows = _parse_rows(path, expected_cols=(2, 3))
    ids = np.array([r[1] for r in rows], dtype=int)
    freqs = np.array([r[2][0] for r in rows], dtype=float)
    widths = None
    if all(len(r[2]) == 2 for r in rows):
        widths = np.array([r[2][1] for r in rows], dtype=float)
    for rid in np.unique(ids):
        sel = np.flatnonzero(ids == rid)
        f = freqs[sel]
        bad = np.flatnonzero(np.diff(f) <= _FREQ_TOL_GHZ)
        if bad.size:
            lineno = rows[sel[bad[0] + 1]][0]
            raise ValueError(
                f"{path}:{lineno}: frequency not increasing (tolerance {_FREQ_TOL_GHZ} GHz) "
                f"within realization {rid}"
            )
    return ResonanceTable(realization_ids=ids, frequencies=freqs, widths=widths)


@dataclass(frozen=True)
class SParamTable:
    """Two-port S-parameters on a uniform grid, one block per realization."""

    realization_ids: np.ndarray
    frequencies: np.ndarray
    entries: np.ndarray  # (n_rows, 2, 2) complex

    def __post_init__(self):
        ids = np.asarray(self.realization_ids, dtype=int)
        freqs = np.asarray(self.frequencies, dtype=float)
        entries = np.asarray(self.entries, dtype=complex)
        object.__setattr__(self, "realization_ids", ids)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "entries", entries)
        if ids.shape != freqs.shape or entries.shape != (ids.size, 2, 2):
            raise ValueError("column lengths disagree")
        if np.any(np.abs(entries) > 1.0 + _MAG_TOL):
            raise ValueError("scattering amplitudes must have magnitude <= 1")
        for rid in np.unique(ids):
            f = freqs[ids == rid]
            steps = np.diff(f)
            if np.any(steps <= 0):
                raise ValueError(f"realization {rid}: frequencies must increase")
            if steps.size and np.any(np.abs(steps - steps[0]) > _FREQ_TOL_GHZ):
                raise ValueError(f"realization {rid}: frequency grid is not uniform")

    def __len__(self) -> int:
        return int(self.realization_ids.size)

    @classmethod
    def from_series(cls, series_list) -> "SParamTable":
        ids, freqs, entries = [], [], []
        for s in series_list:
            ids.append(np.full(s.grid.size, s.realization_id, dtype=int))
            freqs.append(s.grid)
            entries.append(s.entries)
        return cls(
            realization_ids=np.concatenate(ids),
            frequencies=np.concatenate(freqs),
            entries=np.concatenate(entries),
        )

    def series(self):
        """Per-realization SMatrixSeries, ordered by realization id."""
        out = []
        for rid in np.unique(self.realization_ids):
            sel = self.realization_ids == rid
            out.append(
                SMatrixSeries(
                    grid=self.frequencies[sel], entries=self.entries[sel], realization_id=int(rid)
                )
            )
        return out


def emit_sparams(table: SParamTable, path: str):
    lines = [_SPARAM_HEADER]
    ent = table.entries
    for i in range(len(table)):
        fields = [str(int(table.realization_ids[i])), _FMT % table.frequencies[i]]
        for a, b in ((0, 0), (0, 1), (1, 0), (1, 1)):
            fields.append(_FMT % ent[i, a, b].real)
            fields.append(_FMT % ent[i, a, b].imag)
        lines.append(",".join(fields))
    _atomic_write(path, "\n".join(lines) + "\n")


def ingest_sparams(path: str) -> SParamTable:
    """Read and validate an S-parameter table; errors carry line numbers."""
    rows = _parse_rows(path, expected_cols=(10,))
    ids = np.array([r[1] for r in rows], dtype=int)
    freqs = np.array([r[2][0] for r in rows], dtype=float)
    entries = np.empty((len(rows), 2, 2), dtype=complex)
    for i, (lineno, _, vals) in enumerate(rows):
        s = np.array(vals[1::2]) + 1j * np.array(vals[2::2])
        if np.any(np.abs(s) > 1.0 + _MAG_TOL):
            raise ValueError(f"{path}:{lineno}: |S| exceeds 1 beyond tolerance {_MAG_TOL}")
        entries[i] = s.reshape(2, 2)
    for rid in np.unique(ids):
        sel = np.flatnonzero(ids == rid)
        f = freqs[sel]
        steps = np.diff(f)
        bad = np.flatnonzero(steps <= _FREQ_TOL_GHZ)
        if bad.size:
            raise ValueError(
                f"{path}:{rows[sel[bad[0] + 1]][0]}: duplicate or decreasing frequency "
                f"within realization {rid}"
            )
        if steps.size and np.any(np.abs(steps - steps[0]) > _FREQ_TOL_GHZ):
            off = int(np.flatnonzero(np.abs(steps - steps[0]) > _FREQ_TOL_GHZ)[0]) + 1
            raise ValueError(f"{path}:{rows[sel[off]][0]}: non-uniform frequency grid")
    return SParamTable(realization_ids=ids, frequencies=freqs, entries=entries)


# ---------------------------------------------------------------------------
# Plot bundles
# ---------------------------------------------------------------------------


@dataclass
class PlotBundle:
    """Named numeric tables plus a manifest tying each to its provenance."""

    tables: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def add_table(self, name: str, columns: dict, provenance: str, params: dict | None = None):
        lengths = {len(np.asarray(v)) for v in columns.values()}
        if len(lengths) != 1:
            raise ValueError(f"table {name!r}: columns of unequal length")
        self.tables[name] = {k: np.asarray(v) for k, v in columns.items()}
        self.manifest[name] = {
            "columns": list(columns.keys()),
            "provenance": provenance,
            "params": params or {},
        }

    def validate(self):
        if set(self.tables) != set(self.manifest):
            raise ValueError("manifest entries and emitted tables do not match one-to-one")


def write_bundle(bundle: PlotBundle, outdir: str):
    """Write every table as CSV plus manifest.json; deterministic bytes."""
    bundle.validate()
    os.makedirs(outdir, exist_ok=True)
    for name in sorted(bundle.tables):
        columns = bundle.tables[name]
        keys = list(columns.keys())
        lines = ["# " + ",".join(keys)]
        n = len(next(iter(columns.values())))
        for i in range(n):
            fields = []
            for key in keys:
                v = columns[key][i]
                fields.append(str(int(v)) if np.issubdtype(type(v), np.integer) else _FMT % v)
            lines.append(",".join(fields))
        _atomic_write(os.path.join(outdir, name + ".csv"), "\n".join(lines) + "\n")
    manifest_text = json.dumps(bundle.manifest, indent=2, sort_keys=True)
    _atomic_write(os.path.join(outdir, "manifest.json"), manifest_text + "\n")
