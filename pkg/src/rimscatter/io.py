"""Config files, columnar result tables and run manifests.

Configs are INI files with a ``[dish]`` section (geometry) and a
``[scenario]`` section (experiment inputs).  Angles in configs are degrees.
Tables are whitespace-separated text with one header line of column names;
``-inf`` marks an exact null.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .core import DishConfig
from .weights import PhaseAlphabet, WeightVector


class ConfigError(ValueError):
    """Missing or malformed configuration values (all problems at once)."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InputFileError(ValueError):
    """Malformed data file; carries the offending line number."""

    def __init__(self, path, line, message):
        self.path, self.line = str(path), line
        super().__init__(f"{path}:{line}: {message}")


# --- configs ---------------------------------------------------------------

DISH_KEYS = {
    "diameter_m": float,
    "rim_width_m": float,
    "frequency_hz": float,
    "feed_taper_q": float,
    "edge_illumination_db": float,
    "fixed_mesh_density": float,
    "element_side_wavelengths": float,
    "feed_amplitude": float,
    "subtended_half_angle_deg": float,
}


def read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file {path} not found"])
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    return cp


def _convert(value: str, kind):
    if kind is bool:
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if kind is list:
        return [float(x) for x in value.replace(",", " ").split()]
    if kind is int:
        return int(float(value)) if float(value).is_integer() else int(value)
    return kind(value)


def typed_section(cp: configparser.ConfigParser | None, section: str, schema: dict, defaults: dict) -> dict:
    """Values of one section converted per ``schema``; unknown keys and bad values all reported."""
    out = dict(defaults)
    problems = []
    if cp is not None and cp.has_section(section):
        for key, raw in cp.items(section):
            if key not in schema:
                problems.append(f"[{section}] unknown key {key!r}")
                continue
            try:
                out[key] = _convert(raw, schema[key])
            except ValueError as exc:
                problems.append(f"[{section}] {key}: {exc}")
    missing = [k for k in schema if k not in out]
    problems += [f"[{section}] missing required key {k!r}" for k in missing]
    if problems:
        raise ConfigError(problems)
    return out


def dish_from_config(cp: configparser.ConfigParser | None) -> DishConfig:
    base = DishConfig()
    defaults = {k: getattr(base, k) for k in DISH_KEYS if hasattr(base, k)}
    defaults["subtended_half_angle_deg"] = None  # None -> calibrated from the edge taper
    values = typed_section(cp, "dish", DISH_KEYS, defaults)
    theta = values.pop("subtended_half_angle_deg")
    try:
        return DishConfig(**values, subtended_half_angle_rad=None if theta is None else math.radians(theta))
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc


def config_digest(resolved: dict) -> str:
    """SHA-256 of the canonical JSON of the fully resolved inputs."""
    blob = json.dumps(resolved, sort_keys=True, default=_jsonable, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return repr(x)


# --- tables ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v == -math.inf:
        return "-inf"
    return repr(v)


def write_table(path, columns: dict) -> Path:
    """Write equal-length columns under a single header line."""
    names = list(columns)
    if not names:
        raise ValueError("no columns to write")
    data = [np.atleast_1d(np.asarray(columns[n])) for n in names]
    length = {d.size for d in data}
    if len(length) != 1:
        raise ValueError("columns differ in length")
    if any(" " in n for n in names):
        raise ValueError("column names may not contain spaces")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(" ".join(names) + "\n")
        for row in zip(*data):
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
    return path


def read_table(path) -> dict:
    """Columns of a file written by :func:`write_table`, as float arrays."""
    path = Path(path)
    if not path.is_file():
        raise InputFileError(path, 0, "file not found")
    lines = path.read_text().splitlines()
    if not lines:
        raise InputFileError(path, 1, "empty file, expected a header line")
    names = lines[0].split()
    rows = []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != len(names):
            raise InputFileError(path, no, f"expected {len(names)} columns, found {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise InputFileError(path, no, str(exc)) from exc
    arr = np.array(rows, dtype=float).reshape(-1, len(names))
    return {n: arr[:, i] for i, n in enumerate(names)}


def write_weights(path, w: WeightVector) -> Path:
    cols = {"index": np.arange(len(w)), "re": w.values.real, "im": w.values.imag}
    if w.regime == "quantized":
        cols[f"level_M{w.alphabet.m_levels}"] = w.indices
    return write_table(path, cols)


def read_weights(path, n_elements: int | None = None) -> WeightVector:
    path = Path(path)
    cols = read_table(path)
    header = path.read_text().splitlines()[0].split()
    for need in ("index", "re", "im"):
        if need not in cols:
            raise InputFileError(path, 1, f"missing column {need!r}")
    idx = cols["index"]
    if not np.array_equal(idx, np.arange(idx.size)):
        bad = int(np.flatnonzero(idx != np.arange(idx.size))[0])
        raise InputFileError(path, bad + 2, "element indices must run 0..N-1 in order")
    if n_elements is not None and idx.size != n_elements:
        raise InputFileError(path, idx.size + 1, f"{idx.size} weights for {n_elements} elements")
    values = cols["re"] + 1j * cols["im"]
    level = [h for h in header if h.startswith("level_M")]
    if level:
        alphabet = PhaseAlphabet(int(level[0][len("level_M"):]))
        return WeightVector.from_indices(cols[level[0]].astype(np.int64), alphabet)
    regime = "unit-modulus" if np.allclose(np.abs(values), 1.0, atol=1e-12) else "unconstrained"
    return WeightVector(values, regime)


def write_geometry(path, geometry) -> Path:
    """Rim elements as index, x, y, z, Re/Im of the three current components, area."""
    j = geometry.currents
    cols = {"index": np.arange(geometry.n_elements), "ring": geometry.rings}
    for i, name in enumerate("xyz"):
        cols[name] = geometry.positions[:, i]
    for i, name in enumerate("xyz"):
        cols[f"J{name}_re"] = j[:, i].real
        cols[f"J{name}_im"] = j[:, i].imag
    cols["area_m2"] = geometry.areas
    return write_table(path, cols)


def write_bundle(path, bundle) -> Path:
    """Field bundle: element index, Re/Im of e_psi; the fixed field sits in row -1."""
    e = np.concatenate([[bundle.fixed_field], bundle.element_vector])
    return write_table(path, {"index": np.arange(-1, e.size - 1), "re": e.real, "im": e.imag})


def write_manifest(path, scenario: str, resolved: dict, seeds, outputs, wall_clock_s: float) -> Path:
    import platform

    import scipy

    from . import __version__

    doc = {
        "scenario": scenario,
        "config_digest": config_digest(resolved),
        "config": json.loads(json.dumps(resolved, default=_jsonable)),
        "seeds": list(seeds),
        "versions": {
            "rimscatter": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "outputs": [str(Path(p).name) for p in outputs],
        "wall_clock_s": round(float(wall_clock_s), 3),
    }
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
