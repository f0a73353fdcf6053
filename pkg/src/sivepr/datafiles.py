"""CSV reading/writing for datasets, curves and spectra.

Dialect: comma-separated, '.' decimal point, '#' comment lines, UTF-8.
Floats are written with repr (shortest round-trip), so identical inputs give
byte-identical files. Writes go through a temporary file plus rename.
"""
from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ParseError, PreconditionError
from .relaxation import SOURCE_DIRECT, SOURCE_LINEWIDTH, T1Dataset, T1Point
from .sequences import KIND_ECHO_DECAY, KIND_INVERSION_RECOVERY, DecayCurve
from .spectra import Spectrum


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path, columns: Sequence[tuple[str, Sequence]], comments=None) -> str:
    """Write a CSV table atomically; returns the sha256 digest of the bytes.

    ``columns`` is a list of (header, values); ``comments`` an ordered mapping
    emitted as '# key: value' lines before the header.
    """
    names = [name for name, _ in columns]
    series = [list(values) for _, values in columns]
    lengths = {len(s) for s in series}
    if len(lengths) > 1:
        raise PreconditionError(f"column lengths differ: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    lines = []
    for key, value in (comments or {}).items():
        lines.append(f"# {key}: {format_value(value)}")
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join(format_value(col[i]) for col in series))
    payload = ("\n".join(lines) + "\n").encode("utf-8")

    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(payload).hexdigest()


def write_bytes_atomic(path, payload: bytes) -> str:
    """Write raw bytes through a temp file plus rename; returns sha256 digest."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".out")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(payload).hexdigest()


def sha256_of_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _read_rows(path):
    """Yield (lineno, comments_dict_updates, fields) for a CSV file."""
    comments: dict[str, str] = {}
    header: Optional[list[str]] = None
    rows: list[tuple[int, list[str]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    comments[key.strip()] = value.strip()
                continue
            fields = [f.strip() for f in line.split(",")]
            if header is None:
                header = fields
            else:
                rows.append((lineno, fields))
    if header is None:
        raise ParseError("file contains no header row", None, str(path))
    return comments, header, rows


def _parse_float(text: str, what: str, lineno: int, path) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"bad {what}: {text!r}", lineno, str(path)) from None


def _column_indices(header, required, path):
    indices = {}
    for name in required:
        if name not in header:
            raise ParseError(f"missing column {name!r} (header: {header})", None, str(path))
        indices[name] = header.index(name)
    return indices


def read_t1_csv(path) -> T1Dataset:
    """T1 dataset: header temperature_K,t1_s,sigma_s,source (sigma may be empty)."""
    _, header, rows = _read_rows(path)
    idx = _column_indices(header, ("temperature_K", "t1_s", "sigma_s", "source"), path)
    points = []
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}", lineno, str(path))
        sigma_text = fields[idx["sigma_s"]]
        source = fields[idx["source"]]
        if source not in (SOURCE_DIRECT, SOURCE_LINEWIDTH):
            raise ParseError(f"unknown source tag {source!r}", lineno, str(path))
        try:
            point = T1Point(
                temperature_k=_parse_float(fields[idx["temperature_K"]], "temperature", lineno, path),
                t1_s=_parse_float(fields[idx["t1_s"]], "t1", lineno, path),
                sigma_s=None if sigma_text == "" else _parse_float(sigma_text, "sigma", lineno, path),
                source=source,
            )
        except PreconditionError as exc:
            raise ParseError(str(exc), lineno, str(path)) from exc
        points.append(point)
    return T1Dataset(points=tuple(points))


def write_t1_csv(path, dataset: T1Dataset, comments=None) -> str:
    return write_table(
        path,
        [
            ("temperature_K", [p.temperature_k for p in dataset.points]),
            ("t1_s", [p.t1_s for p in dataset.points]),
            ("sigma_s", ["" if p.sigma_s is None else p.sigma_s for p in dataset.points]),
            ("source", [p.source for p in dataset.points]),
        ],
        comments,
    )


def read_decay_csv(path) -> DecayCurve:
    """Decay curve: '# kind:' comment plus header delay_s,amplitude,sigma."""
    comments, header, rows = _read_rows(path)
    kind = comments.get("kind")
    if kind not in (KIND_INVERSION_RECOVERY, KIND_ECHO_DECAY):
        raise ParseError(
            f"missing or unknown '# kind:' header (got {kind!r}); expected "
            f"{KIND_INVERSION_RECOVERY!r} or {KIND_ECHO_DECAY!r}",
            None,
            str(path),
        )
    idx = _column_indices(header, ("delay_s", "amplitude"), path)
    sigma_idx = header.index("sigma") if "sigma" in header else None
    delays, amps, sigmas = [], [], []
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}", lineno, str(path))
        delays.append(_parse_float(fields[idx["delay_s"]], "delay", lineno, path))
        amps.append(_parse_float(fields[idx["amplitude"]], "amplitude", lineno, path))
        if sigma_idx is not None and fields[sigma_idx] != "":
            sigmas.append(_parse_float(fields[sigma_idx], "sigma", lineno, path))
    if sigmas and len(sigmas) != len(delays):
        raise ParseError("sigma column must be fully populated or fully empty", None, str(path))
    meta = {k: v for k, v in comments.items() if k != "kind"}
    try:
        return DecayCurve(
            kind=kind,
            delays_s=np.array(delays),
            amplitudes=np.array(amps),
            sigmas=np.array(sigmas) if sigmas else None,
            meta=meta,
        )
    except PreconditionError as exc:
        raise ParseError(str(exc), None, str(path)) from exc


def write_decay_csv(path, curve: DecayCurve, comments=None) -> str:
    merged = {"kind": curve.kind}
    for key, value in curve.meta.items():
        merged.setdefault(key, value)
    for key, value in (comments or {}).items():
        merged[key] = value
    sigmas = curve.sigmas if curve.sigmas is not None else [""] * curve.delays_s.size
    return write_table(
        path,
        [
            ("delay_s", curve.delays_s),
            ("amplitude", curve.amplitudes),
            ("sigma", sigmas),
        ],
        merged,
    )


def read_spectrum_csv(path) -> Spectrum:
    """Spectrum: header field_mT,signal with metadata in '#' comments."""
    comments, header, rows = _read_rows(path)
    idx = _column_indices(header, ("field_mT", "signal"), path)
    fields_mt, signal = [], []
    for lineno, fields in rows:
        fields_mt.append(_parse_float(fields[idx["field_mT"]], "field", lineno, path))
        signal.append(_parse_float(fields[idx["signal"]], "signal", lineno, path))
    try:
        return Spectrum(field_mt=np.array(fields_mt), signal=np.array(signal), metadata=comments)
    except PreconditionError as exc:
        raise ParseError(str(exc), None, str(path)) from exc


def write_spectrum_csv(path, spectrum: Spectrum, comments=None) -> str:
    merged = dict(spectrum.metadata)
    for key, value in (comments or {}).items():
        merged[key] = value
    if spectrum.warnings:
        merged["warnings"] = "; ".join(spectrum.warnings)
    return write_table(
        path,
        [("field_mT", spectrum.field_mt), ("signal", spectrum.signal)],
        merged,
    )


@dataclass(frozen=True)
class IntensityRow:
    """One measured intensity pair; exactly one dark row serves as reference."""

    label: str
    condition: str
    temperature_k: float
    i_low: float
    i_high: float


def read_intensity_csv(path) -> list[IntensityRow]:
    """Intensity table: header label,condition,temperature_K,i_low_au,i_high_au."""
    _, header, rows = _read_rows(path)
    idx = _column_indices(
        header, ("label", "condition", "temperature_K", "i_low_au", "i_high_au"), path
    )
    out = []
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}", lineno, str(path))
        condition = fields[idx["condition"]]
        if condition not in ("dark", "light"):
            raise ParseError(f"condition must be dark or light, got {condition!r}", lineno, str(path))
        out.append(
            IntensityRow(
                label=fields[idx["label"]],
                condition=condition,
                temperature_k=_parse_float(fields[idx["temperature_K"]], "temperature", lineno, path),
                i_low=_parse_float(fields[idx["i_low_au"]], "i_low", lineno, path),
                i_high=_parse_float(fields[idx["i_high_au"]], "i_high", lineno, path),
            )
        )
    return out


def read_linewidth_csv(path) -> list[tuple[float, float]]:
    """Linewidth table: header temperature_K,linewidth_pp_mT."""
    _, header, rows = _read_rows(path)
    idx = _column_indices(header, ("temperature_K", "linewidth_pp_mT"), path)
    out = []
    for lineno, fields in rows:
        out.append(
            (
                _parse_float(fields[idx["temperature_K"]], "temperature", lineno, path),
                _parse_float(fields[idx["linewidth_pp_mT"]], "linewidth", lineno, path),
            )
        )
    return out
