"""File formats: dense matrices, delimited metric rows, spectral model
descriptions, and summary-coefficient panels.

Float cells are written with repr, which round-trips exactly, so rewriting
unchanged data is byte-stable.
"""

from __future__ import annotations

import struct
from dataclasses import fields, is_dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .estimators import SummaryPanel
from .spectral import SpectralModel

MATRIX_MAGIC = b"RLXMAT01"


def write_matrix(path, arr) -> None:
    """Dense float64 matrix: 8-byte magic, uint64 row and column counts
    (little-endian), then the row-major payload."""
    arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    if arr.ndim != 2:
        raise ConfigError("matrix files hold 2-D arrays")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(MATRIX_MAGIC))
        if magic != MATRIX_MAGIC:
            raise ConfigError(f"{path}: not a matrix file (bad magic {magic!r})")
        header = fh.read(16)
        if len(header) != 16:
            raise ConfigError(f"{path}: truncated header")
        rows, cols = struct.unpack("<QQ", header)
        payload = fh.read()
    expected = rows * cols * 8
    if len(payload) != expected:
        raise ConfigError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_rows(path, rows, columns=None) -> None:
    """Tab-separated rows with a header line.

    rows may be dataclass instances or mappings; columns defaults to the
    dataclass field order (or the first mapping's key order).
    """
    rows = list(rows)
    if columns is None:
        if not rows:
            raise ConfigError("cannot infer columns from an empty row list")
        first = rows[0]
        if is_dataclass(first):
            columns = [f.name for f in fields(first)]
        else:
            columns = list(first.keys())
    lines = ["\t".join(columns)]
    for row in rows:
        get = (lambda r, c: getattr(r, c)) if is_dataclass(row) else (lambda r, c: r.get(c))
        lines.append("\t".join(_format_cell(get(row, c)) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def read_rows(path) -> list:
    """Rows written by write_rows, as dicts. Numeric-looking cells come
    back as int or float; empty cells as None."""
    text = Path(path).read_text()
    lines = [ln for ln in text.split("\n") if ln != ""]
    if not lines:
        raise ConfigError(f"{path}: empty table")
    columns = lines[0].split("\t")
    out = []
    for ln in lines[1:]:
        cells = ln.split("\t")
        if len(cells) != len(columns):
            raise ConfigError(f"{path}: row has {len(cells)} cells, header {len(columns)}")
        row = {}
        for key, cell in zip(columns, cells):
            row[key] = _parse_cell(cell)
        out.append(row)
    return out


def _parse_cell(cell: str):
    if cell == "":
        return None
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


_MODEL_KEYS = {"kind", "eigenvalues", "weights", "eigenvalue_file"}


def parse_spectral_model(text: str, base_dir=None) -> SpectralModel:
    """key=value description of a spectral model.

    kind=identity needs nothing else. kind=point_masses needs eigenvalues=
    and weights= (comma-separated). kind=explicit needs eigenvalue_file=,
    one value per line, resolved against base_dir when relative.
    """
    entries: dict = {}
    for raw in text.split("\n"):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _MODEL_KEYS:
            raise ConfigError(f"unknown spectral model key {key!r}")
        if key in entries:
            raise ConfigError(f"duplicate key {key!r}")
        entries[key] = value
    kind = entries.pop("kind", None)
    if kind is None:
        raise ConfigError("spectral model needs kind=")
    if kind == "identity":
        if entries:
            raise ConfigError(f"identity takes no other keys, got {sorted(entries)}")
        return SpectralModel.identity()
    if kind == "point_masses":
        missing = {"eigenvalues", "weights"} - entries.keys()
        if missing:
            raise ConfigError(f"point_masses needs {sorted(missing)}")
        eigs = _parse_floats(entries.pop("eigenvalues"))
        weights = _parse_floats(entries.pop("weights"))
        if entries:
            raise ConfigError(f"unexpected keys {sorted(entries)}")
        return SpectralModel.from_point_masses(eigs, weights)
    if kind == "explicit":
        file_key = entries.pop("eigenvalue_file", None)
        if file_key is None:
            raise ConfigError("explicit needs eigenvalue_file=")
        if entries:
            raise ConfigError(f"unexpected keys {sorted(entries)}")
        fpath = Path(file_key)
        if not fpath.is_absolute() and base_dir is not None:
            fpath = Path(base_dir) / fpath
        values = [
            float(ln.strip())
            for ln in fpath.read_text().split("\n")
            if ln.strip() and not ln.lstrip().startswith("#")
        ]
        return SpectralModel.from_eigenvalues(values)
    raise ConfigError(f"unknown spectral model kind {kind!r}")


def _parse_floats(csv: str) -> tuple:
    try:
        return tuple(float(part) for part in csv.split(",") if part.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {csv!r}: {exc}") from None


def load_spectral_model(path) -> SpectralModel:
    path = Path(path)
    return parse_spectral_model(path.read_text(), base_dir=path.parent)


def write_summary_panel(path, panel: SummaryPanel) -> None:
    """First line: per-study sample sizes; then one line per feature with
    one coefficient per study."""
    lines = ["\t".join(str(int(s)) for s in panel.study_sizes)]
    for row in np.asarray(panel.coefficients):
        lines.append("\t".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_summary_panel(path) -> SummaryPanel:
    lines = [
        ln
        for ln in Path(path).read_text().split("\n")
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if len(lines) < 2:
        raise ConfigError(f"{path}: need a size line and at least one row")
    try:
        sizes = tuple(int(tok) for tok in lines[0].split("\t"))
    except ValueError as exc:
        raise ConfigError(f"{path}: bad size line: {exc}") from None
    rows = []
    for ln in lines[1:]:
        cells = ln.split("\t")
        if len(cells) != len(sizes):
            raise ConfigError(
                f"{path}: row has {len(cells)} coefficients for {len(sizes)} studies"
            )
        rows.append([float(c) for c in cells])
    return SummaryPanel(np.asarray(rows, dtype=float), sizes)


def load_config_file(path) -> dict:
    """YAML config as a plain mapping; the caller validates keys."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data
