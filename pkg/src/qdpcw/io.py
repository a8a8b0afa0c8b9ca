"""CSV and JSON persistence of histograms, spectra and result documents.

Histograms are stored as ``t_ns,counts`` (left bin edges) and spectra as
``wavelength_nm,counts``. Metadata such as the repetition period rides in
``# key=value`` comment lines ahead of the header. Floats are written with
17 significant digits so that a write-read cycle is exact.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .types import CoincidenceHistogram, DecayHistogram, Spectrum

HISTOGRAM_HEADER = "t_ns,counts"
SPECTRUM_HEADER = "wavelength_nm,counts"


class DataFormatError(ValueError):
    """A data file could not be parsed; the message names file and line."""


def fmt(x) -> str:
    """Decimal text of ``x`` that parses back to the same double."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_table(path, header, meta, columns):
    lines = [f"# {k}={v}" for k, v in meta.items()]
    lines.append(header)
    lines.extend(",".join(row) for row in zip(*columns))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_table(path, header):
    path = Path(path)
    meta, rows = {}, []
    seen_header = False
    try:
        text = path.read_text()
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path}: not a text file ({exc})") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        if not seen_header:
            if line.replace(" ", "") != header:
                raise DataFormatError(f"{path}:{lineno}: expected header {header!r}, got {line!r}")
            seen_header = True
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
        try:
            rows.append((float(fields[0]), fields[1].strip()))
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: bad number {fields[0]!r}") from None
    if not seen_header:
        raise DataFormatError(f"{path}: missing header {header!r}")
    return meta, rows


def _meta_float(meta, key, path):
    try:
        value = float(meta[key])
    except KeyError:
        raise DataFormatError(f"{path}: missing '# {key}=' metadata line") from None
    except ValueError:
        raise DataFormatError(f"{path}: metadata {key}={meta[key]!r} is not a number") from None
    return value


def _int_counts(rows, path):
    out = np.empty(len(rows), dtype=np.int64)
    for i, (_, c) in enumerate(rows):
        try:
            value = float(c)
        except ValueError:
            raise DataFormatError(f"{path}: bad count {c!r} in data row {i + 1}") from None
        if value < 0 or value != math.floor(value):
            raise DataFormatError(f"{path}: count {c!r} in data row {i + 1} is not a "
                                  f"non-negative integer")
        out[i] = int(value)
    return out


def write_histogram_csv(hist, path) -> None:
    """Write a decay or coincidence histogram."""
    edges = hist.bin_edges
    if isinstance(hist, DecayHistogram):
        meta = {"kind": "decay", "rep_period_ns": fmt(hist.rep_period),
                "total_pulses": hist.total_pulses}
    elif isinstance(hist, CoincidenceHistogram):
        meta = {"kind": "coincidence", "rep_period_ns": fmt(hist.rep_period)}
    else:
        raise TypeError(f"cannot write {type(hist).__name__} as a histogram")
    meta["t_end_ns"] = fmt(edges[-1])
    _write_table(path, HISTOGRAM_HEADER, meta,
                 [[fmt(t) for t in edges[:-1]], [fmt(c) for c in hist.counts]])


def read_histogram_csv(path, rep_period: float | None = None):
    """Read a histogram written by :func:`write_histogram_csv` or by hand.

    Without a ``t_end_ns`` line the last bin is assumed as wide as the
    others. ``rep_period`` overrides the file's metadata.
    """
    meta, rows = _read_table(path, HISTOGRAM_HEADER)
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need at least two histogram rows")
    t = np.array([r[0] for r in rows])
    counts = _int_counts(rows, path)
    if "t_end_ns" in meta:
        end = _meta_float(meta, "t_end_ns", path)
    else:
        end = t[-1] + (t[-1] - t[-2])
    edges = np.append(t, end)
    period = rep_period if rep_period is not None else _meta_float(meta, "rep_period_ns", path)
    kind = meta.get("kind", "decay")
    try:
        if kind == "coincidence":
            return CoincidenceHistogram(edges, counts, period)
        if kind == "decay":
            return DecayHistogram(edges, counts, period, int(meta.get("total_pulses", 0)))
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    raise DataFormatError(f"{path}: unknown histogram kind {kind!r}")


def write_spectrum_csv(spectrum: Spectrum, path) -> None:
    _write_table(path, SPECTRUM_HEADER, {"kind": "spectrum"},
                 [[fmt(x) for x in spectrum.wavelength], [fmt(c) for c in spectrum.counts]])


def read_spectrum_csv(path) -> Spectrum:
    _, rows = _read_table(path, SPECTRUM_HEADER)
    wl = np.array([r[0] for r in rows])
    try:
        counts = np.array([float(r[1]) for r in rows])
        return Spectrum(wl, counts)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        # JSON has no NaN; null marks a quantity that could not be estimated
        return value if math.isfinite(value) else None
    return obj


def dumps(doc) -> str:
    """Canonical JSON text (sorted keys, NaN as null)."""
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(doc, path) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
