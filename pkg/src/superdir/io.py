"""Readers and writers for the file formats used by the command line.

Complex numbers are stored in JSON as ``[re, im]`` pairs. Floats are
written with ``repr`` precision, so a write/read round trip is exact.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .beamforming import BeamformResult
from .coupling import ETA0, CouplingMatrix, NetworkData
from .errors import InvalidArgumentError, ParseError, SuperdirError
from .patterns import SampledPattern
from .robust import RobustSolution, SweepPoint
from .sensitivity import MonteCarloReport

EEP_HEADER = ["theta_deg", "phi_deg", "re_etheta", "im_etheta", "re_ephi", "im_ephi"]


# --- complex <-> JSON ----------------------------------------------------------


def complex_to_json(value):
    """Nested lists of ``[re, im]`` pairs for a complex scalar or array."""
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [complex_to_json(x) for x in arr]


def complex_from_json(value, path=None, name="value") -> np.ndarray:
    """Inverse of :func:`complex_to_json`."""
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{name} must hold numeric [re, im] pairs", path) from exc
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise ParseError(f"{name} must hold [re, im] pairs", path)
    return arr[..., 0] + 1j * arr[..., 1]


def _dump(obj, path):
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if path is None or str(path) == "-":
        return text
    Path(path).write_text(text)
    return text


def _load(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", str(path)) from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno) from exc
    if not isinstance(obj, dict):
        raise ParseError("top level must be a JSON object", str(path))
    return obj


def _field(obj, key, path, required=True):
    if key not in obj:
        if required:
            raise ParseError(f"missing key {key!r}", str(path))
        return None
    return obj[key]


def _check_m(path, arr, name, shape):
    if arr.shape != shape:
        raise ParseError(f"{name} has shape {arr.shape}, expected {shape}", str(path))


# --- coupling ------------------------------------------------------------------


def coupling_to_json(c: CouplingMatrix) -> dict:
    return {
        "m": c.size,
        "route": c.route,
        "b": complex_to_json(c.b),
        "v0": complex_to_json(c.v0),
        "d_f0": [float(x) for x in c.d_f0],
        "cross_polar": c.cross_polar,
    }


def write_coupling(c: CouplingMatrix, path=None) -> str:
    return _dump(coupling_to_json(c), path)


def read_coupling(path) -> CouplingMatrix:
    obj = _load(path)
    m = int(_field(obj, "m", path))
    b = complex_from_json(_field(obj, "b", path), path, "b")
    v0 = complex_from_json(_field(obj, "v0", path), path, "v0")
    _check_m(path, b, "b", (m, m))
    _check_m(path, v0, "v0", (m,))
    d_f0 = _field(obj, "d_f0", path, required=False)
    try:
        return CouplingMatrix(b, v0, d_f0, obj.get("cross_polar", 0.0), obj.get("route", "file"))
    except SuperdirError as exc:
        raise ParseError(str(exc), str(path)) from exc


# --- network data ----------------------------------------------------------------


def read_network_json(path) -> NetworkData:
    """Network file with keys ``m``, ``z0``, ``s``, ``z`` and optional ``eta``, ``s_ref``."""
    obj = _load(path)
    m = int(_field(obj, "m", path))
    z0 = complex_from_json(_field(obj, "z0", path), path, "z0")
    _check_m(path, z0, "z0", (m,))
    mats = {}
    for key in ("s", "z"):
        raw = obj.get(key)
        if raw is not None:
            mats[key] = complex_from_json(raw, path, key)
            _check_m(path, mats[key], key, (m, m))
    try:
        return NetworkData(z0, mats.get("s"), mats.get("z"),
                           float(obj.get("eta") or ETA0), obj.get("s_ref"))
    except SuperdirError as exc:
        raise ParseError(str(exc), str(path)) from exc


def write_network_json(net: NetworkData, path=None) -> str:
    obj = {
        "m": net.size,
        "z0": complex_to_json(net.z0),
        "s": None if net.s is None else complex_to_json(net.s),
        "z": None if net.z is None else complex_to_json(net.z),
        "eta": net.eta,
    }
    if net.s_ref is not None:
        obj["s_ref"] = net.s_ref
    return _dump(obj, path)


_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


def read_touchstone(path, freq_hz: float | None = None) -> NetworkData:
    """S-parameters at one frequency from a version-1 Touchstone ``.sNp`` file.

    The port count comes from the file extension. The frequency point
    nearest ``freq_hz`` is returned; ``freq_hz`` may be omitted only when
    the file holds a single point. All ports are referenced to the ``R``
    value of the option line.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if not (suffix.startswith(".s") and suffix.endswith("p") and suffix[2:-1].isdigit()):
        raise ParseError("Touchstone file name must end in .sNp", str(path))
    m = int(suffix[2:-1])
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", str(path)) from exc

    unit, fmt, ref = 1e9, "ma", 50.0
    seen_option = False
    numbers = []  # (value, line number)
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if seen_option:
                continue  # later option lines are ignored by convention
            seen_option = True
            tokens = line[1:].lower().split()
            i = 0
            while i < len(tokens):
                tok = tokens[i]
                if tok in _FREQ_UNITS:
                    unit = _FREQ_UNITS[tok]
                elif tok in ("ri", "ma", "db"):
                    fmt = tok
                elif tok == "s":
                    pass
                elif tok in ("y", "z", "h", "g"):
                    raise ParseError(f"only S-parameters are supported, got {tok.upper()}",
                                     str(path), lineno)
                elif tok == "r" and i + 1 < len(tokens):
                    try:
                        ref = float(tokens[i + 1])
                    except ValueError as exc:
                        raise ParseError(f"bad reference impedance {tokens[i + 1]!r}",
                                         str(path), lineno) from exc
                    i += 1
                else:
                    raise ParseError(f"unknown option {tok!r}", str(path), lineno)
                i += 1
            continue
        for tok in line.split():
            try:
                numbers.append((float(tok), lineno))
            except ValueError as exc:
                raise ParseError(f"not a number: {tok!r}", str(path), lineno) from exc

    per_point = 1 + 2 * m * m
    if not numbers:
        raise ParseError("no data", str(path))
    if len(numbers) % per_point:
        raise ParseError(f"data count {len(numbers)} is not a multiple of {per_point}",
                         str(path), numbers[-1][1])
    values = np.array([v for v, _ in numbers]).reshape(-1, per_point)
    freqs = values[:, 0] * unit
    if freq_hz is None:
        if len(freqs) > 1:
            raise InvalidArgumentError(f"{path} holds {len(freqs)} frequencies; choose one")
        row = values[0]
    else:
        row = values[np.argmin(np.abs(freqs - freq_hz))]
    pairs = row[1:].reshape(-1, 2)
    if fmt == "ri":
        s = pairs[:, 0] + 1j * pairs[:, 1]
    else:
        mag = pairs[:, 0] if fmt == "ma" else 10 ** (pairs[:, 0] / 20)
        s = mag * np.exp(1j * np.deg2rad(pairs[:, 1]))
    s = s.reshape(m, m)
    if m == 2:
        s = s.T  # two-port files list S11 S21 S12 S22
    try:
        return NetworkData(np.full(m, ref, dtype=complex), s=s, s_ref=ref)
    except SuperdirError as exc:
        raise ParseError(str(exc), str(path)) from exc


# --- sampled patterns ------------------------------------------------------------


def read_eep_csv(path) -> SampledPattern:
    """Element pattern tabulated on a regular lattice, rows in (theta, phi) order."""
    path = str(path)
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path) from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != EEP_HEADER:
            raise ParseError(f"header must be {','.join(EEP_HEADER)}", path, 1)
        rows = []
        for row in reader:
            if not row or all(not x.strip() for x in row):
                continue
            if len(row) != 6:
                raise ParseError(f"expected 6 columns, got {len(row)}", path, reader.line_num)
            try:
                vals = [float(x) for x in row]
            except ValueError as exc:
                raise ParseError(str(exc), path, reader.line_num) from exc
            if not all(math.isfinite(v) for v in vals):
                raise ParseError("non-finite value", path, reader.line_num)
            rows.append((vals, reader.line_num))
    if not rows:
        raise ParseError("no data rows", path)
    data = np.array([r for r, _ in rows])
    theta = np.unique(data[:, 0])
    phi = np.unique(data[:, 1])
    if data.shape[0] != theta.size * phi.size:
        raise ParseError("rows do not form a regular theta-phi lattice", path)
    expect_t = np.repeat(theta, phi.size)
    expect_p = np.tile(phi, theta.size)
    bad = np.nonzero((data[:, 0] != expect_t) | (data[:, 1] != expect_p))[0]
    if bad.size:
        raise ParseError("rows are not in lexicographic (theta, phi) order", path,
                         rows[bad[0]][1])
    shape = (theta.size, phi.size)
    e_theta = (data[:, 2] + 1j * data[:, 3]).reshape(shape)
    e_phi = (data[:, 4] + 1j * data[:, 5]).reshape(shape)
    try:
        return SampledPattern(np.deg2rad(theta), np.deg2rad(phi), e_theta, e_phi)
    except SuperdirError as exc:
        raise ParseError(str(exc), path) from exc


def write_eep_csv(path, theta_deg, phi_deg, e_theta, e_phi) -> None:
    """Write a lattice pattern; ``e_theta`` and ``e_phi`` have shape (n_theta, n_phi)."""
    e_theta = np.asarray(e_theta, dtype=complex)
    e_phi = np.asarray(e_phi, dtype=complex)
    with open(path, "w", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(EEP_HEADER)
        for i, t in enumerate(theta_deg):
            for j, p in enumerate(phi_deg):
                et, ep = e_theta[i, j], e_phi[i, j]
                w.writerow([repr(float(x)) for x in (t, p, et.real, et.imag, ep.real, ep.imag)])


# --- results ---------------------------------------------------------------------


def excitation_to_json(result: BeamformResult) -> dict:
    obj = {
        "m": int(result.excitation.size),
        "a": complex_to_json(result.excitation),
        "method": result.method,
        "directivity": float(result.directivity),
    }
    if result.warnings:
        obj["warnings"] = list(result.warnings)
    return obj


def write_excitation(result: BeamformResult, path=None, extra: dict | None = None) -> str:
    obj = excitation_to_json(result)
    if extra:
        obj.update(extra)
    return _dump(obj, path)


def read_excitation(path) -> BeamformResult:
    """Excitation file; solution files from the constrained solver are accepted too."""
    obj = _load(path)
    a = complex_from_json(_field(obj, "a", path), path, "a")
    if a.ndim != 1:
        raise ParseError("a must be a list of [re, im] pairs", str(path))
    m = obj.get("m", a.size)
    if int(m) != a.size:
        raise ParseError(f"m = {m} but a has {a.size} entries", str(path))
    d = obj.get("directivity", obj.get("d"))
    return BeamformResult(a, float("nan") if d is None else float(d),
                          obj.get("method", "ocrb" if "xi" in obj else "file"),
                          tuple(obj.get("warnings", ())))


def solution_to_json(sol: RobustSolution) -> dict:
    return {
        "m": int(sol.excitation.size),
        "method": "ocrb",
        "xi": sol.xi,
        "p_roots": complex_to_json(sol.roots),
        "p": complex_to_json(sol.chosen_p),
        "a": complex_to_json(sol.excitation),
        "d": float(sol.directivity),
        "xi_achieved": float(sol.xi_achieved),
        "residual": float(sol.residual),
    }


def write_solution(sol: RobustSolution, path=None) -> str:
    return _dump(solution_to_json(sol), path)


def report_to_json(report: MonteCarloReport, bins: int = 50,
                   samples_path: str | None = None) -> dict:
    edges, counts = report.histogram(bins)
    obj = {
        "d0": report.d0,
        "h": report.h,
        "mean_d": report.mean_d,
        "n": report.n,
        "seed": report.seed,
        "histogram": {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]},
    }
    if samples_path is not None:
        obj["samples_path"] = str(samples_path)
    return obj


def write_report(report: MonteCarloReport, path=None, bins: int = 50,
                 samples_path: str | None = None) -> str:
    if samples_path is not None:
        Path(samples_path).write_text("".join(f"{x!r}\n" for x in map(float, report.samples)))
    return _dump(report_to_json(report, bins, samples_path), path)


def write_sweep_csv(points: list[SweepPoint], path=None) -> str:
    lines = ["xi,d,p_re,p_im,residual,error"]
    for pt in points:
        fields = [repr(pt.xi)]
        if pt.error is None:
            fields += [repr(pt.directivity), repr(float(pt.p)), "0.0", repr(pt.residual), ""]
        else:
            fields += ["", "", "", "", '"' + pt.error.replace('"', "'") + '"']
        lines.append(",".join(fields))
    text = "\n".join(lines) + "\n"
    if path is not None and str(path) != "-":
        Path(path).write_text(text)
    return text
