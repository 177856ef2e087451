"""File formats: point clouds, spectra, curves, ciphertext, geometry tokens, radar cubes.

Every text format writes floats with ``%.17g`` so that a write/read cycle
reproduces the values bit-exactly and identical inputs give identical bytes.
"""
from __future__ import annotations

import json
import os
import re
from pathlib import Path

import numpy as np

from .clutter import RadarCube
from .crypto import FORMAT_VERSION, EncryptedCloud
from .errors import DimensionMismatch, IoError, ParseError, UnsupportedFormat, ValidationError
from .geometry import PointCloud
from .transform import ManifoldTransform, fused_energy

__all__ = [
    "read_cloud",
    "write_cloud",
    "write_spectrum",
    "read_spectrum",
    "write_curve",
    "read_curve",
    "write_ciphertext",
    "read_ciphertext",
    "write_geometry_token",
    "read_geometry_token",
    "read_radar",
    "write_radar",
]

FLOAT_FMT = "%.17g"
_CHANNEL_NAMES = ("x", "y", "z")
_PLY_FLOAT_TYPES = {"float", "float32", "double", "float64"}
_ENC_HEADER = re.compile(r"^PMFHT-ENC v(\d+) N=(\d+)$")
_GEOM_MAGIC = "PMFHT-GEOM"
GEOMETRY_VERSION = 1


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def _read_text(path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _require_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite values")


# --- point clouds --------------------------------------------------------


def _guess_format(path) -> str:
    ext = Path(path).suffix.lower()
    if ext in (".xyz", ".txt", ".pts"):
        return "xyz"
    if ext == ".ply":
        return "ply-ascii"
    raise UnsupportedFormat(f"cannot infer point-cloud format from extension {ext!r}")


def _parse_floats(tokens, lineno, path):
    try:
        return [float(tok) for tok in tokens]
    except ValueError:
        bad = next(tok for tok in tokens if not _is_float(tok))
        raise ParseError(f"malformed number {bad!r}", line=lineno, path=path) from None


def _is_float(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _read_xyz(lines, path):
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        vals = _parse_floats(body.split(), lineno, path)
        if len(vals) < 3:
            raise ParseError(f"expected 3 coordinates, found {len(vals)}", line=lineno, path=path)
        rows.append(vals[:3])
    return np.array(rows, dtype=float).reshape(-1, 3)


def _read_ply(lines, path):
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", line=1, path=path)
    elements = []  # (name, count, [property names])
    fmt = None
    body_start = None
    for lineno, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        key = parts[0]
        if key == "format":
            fmt = parts[1] if len(parts) > 1 else ""
            if fmt != "ascii":
                raise UnsupportedFormat(f"only ascii PLY is supported, got format {fmt!r}")
        elif key == "element":
            if len(parts) != 3 or not parts[2].isdigit():
                raise ParseError("malformed element line", line=lineno, path=path)
            elements.append((parts[1], int(parts[2]), []))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno, path=path)
            name, count, props = elements[-1]
            if parts[1:2] == ["list"]:
                props.append(("list", parts[-1]))
            elif len(parts) == 3:
                props.append((parts[1], parts[2]))
            else:
                raise ParseError("malformed property line", line=lineno, path=path)
        elif key == "end_header":
            body_start = lineno
            break
        else:
            raise ParseError(f"unexpected header keyword {key!r}", line=lineno, path=path)
    if fmt is None:
        raise ParseError("missing format line", path=path)
    if body_start is None:
        raise ParseError("missing end_header", path=path)

    cursor = body_start  # 0-based index of the first body line
    for name, count, props in elements:
        if name != "vertex":
            cursor += count
            continue
        names = [p[1] for p in props]
        try:
            cols = [names.index(axis) for axis in _CHANNEL_NAMES]
        except ValueError:
            raise UnsupportedFormat("vertex element lacks x, y and z properties") from None
        for c in cols:
            if props[c][0] not in _PLY_FLOAT_TYPES:
                raise UnsupportedFormat(f"vertex property {names[c]!r} has non-float type {props[c][0]!r}")
        if any(p[0] == "list" for p in props):
            raise UnsupportedFormat("list properties on vertices are not supported")
        pts = np.empty((count, 3))
        for k in range(count):
            lineno = cursor + k + 1
            if cursor + k >= len(lines):
                raise ParseError(f"expected {count} vertices, file ends after {k}", line=lineno - 1, path=path)
            tokens = lines[cursor + k].split()
            if len(tokens) != len(props):
                raise ParseError(f"expected {len(props)} values, found {len(tokens)}", line=lineno, path=path)
            vals = _parse_floats(tokens, lineno, path)
            pts[k] = [vals[c] for c in cols]
        return pts
    raise UnsupportedFormat("PLY file has no vertex element")


def read_cloud(path, format: str | None = None) -> PointCloud:
    """Read an XYZ or ASCII PLY file; ``format`` is inferred from the extension if omitted."""
    fmt = format or _guess_format(path)
    if fmt not in ("xyz", "ply-ascii"):
        raise UnsupportedFormat(f"unknown point-cloud format {fmt!r}")
    lines = _read_text(path)
    pts = _read_xyz(lines, str(path)) if fmt == "xyz" else _read_ply(lines, str(path))
    if not np.all(np.isfinite(pts)):
        raise ParseError("non-finite coordinate", path=str(path))
    return PointCloud(pts)


def write_cloud(path, cloud, format: str | None = None) -> None:
    """Write ASCII PLY (double properties) for ``.ply`` paths and XYZ text otherwise."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DimensionMismatch(f"points must be (N, 3), got {pts.shape}")
    _require_finite(pts, "point cloud")
    fmt = format or ("ply-ascii" if Path(path).suffix.lower() == ".ply" else "xyz")
    if fmt not in ("xyz", "ply-ascii"):
        raise UnsupportedFormat(f"unknown point-cloud format {fmt!r}")
    body = "".join(" ".join(_fmt(v) for v in row) + "\n" for row in pts)
    if fmt == "ply-ascii":
        header = ["ply", "format ascii 1.0", f"element vertex {len(pts)}"]
        header += [f"property double {c}" for c in "xyz"] + ["end_header"]
        body = "\n".join(header) + "\n" + body
    _write_text(path, body)


# --- spectra and curves ----------------------------------------------------


def _spectrum_header(channels: int) -> list[str]:
    names = _CHANNEL_NAMES if channels == 3 else [f"c{k}" for k in range(channels)]
    cols = ["index"]
    for nm in names:
        cols += [f"re_{nm}", f"im_{nm}", f"mag_{nm}"]
    return cols + ["fused"]


def write_spectrum(path, coeffs) -> None:
    """CSV with index, re/im/magnitude per channel and the fused energy column."""
    c = np.asarray(getattr(coeffs, "coeffs", coeffs))
    if c.ndim == 1:
        c = c[:, None]
    _require_finite(c, "spectrum")
    fused = fused_energy(c)
    lines = [",".join(_spectrum_header(c.shape[1]))]
    for i in range(c.shape[0]):
        fields = [str(i)]
        for v in c[i]:
            fields += [_fmt(v.real), _fmt(v.imag), _fmt(abs(v))]
        fields.append(_fmt(fused[i]))
        lines.append(",".join(fields))
    _write_text(path, "\n".join(lines) + "\n")


def _read_csv(path, expect_header=None):
    lines = [ln for ln in _read_text(path) if ln.strip()]
    if not lines:
        raise ParseError("empty file, header missing", path=str(path))
    header = lines[0].split(",")
    if expect_header is not None and header != expect_header:
        raise ParseError(f"unexpected header {lines[0]!r}", line=1, path=str(path))
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        tokens = ln.split(",")
        if len(tokens) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(tokens)}", line=lineno, path=str(path))
        rows.append(_parse_floats(tokens, lineno, str(path)))
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def read_spectrum(path) -> np.ndarray:
    """Complex (N, C) coefficients from a file written by :func:`write_spectrum`."""
    header, data = _read_csv(path)
    if header[0] != "index" or header[-1] != "fused" or (len(header) - 2) % 3:
        raise ParseError("not a spectrum file", line=1, path=str(path))
    channels = (len(header) - 2) // 3
    if header != _spectrum_header(channels):
        raise ParseError("not a spectrum file", line=1, path=str(path))
    re_cols = 1 + 3 * np.arange(channels)
    return data[:, re_cols] + 1j * data[:, re_cols + 1]


def write_curve(path, points, names=("x", "y")) -> None:
    """Two-column CSV; an empty curve produces a header-only file."""
    arr = np.asarray(points, dtype=float).reshape(-1, 2)
    _require_finite(arr, "curve")
    lines = [",".join(names)] + [f"{_fmt(x)},{_fmt(y)}" for x, y in arr]
    _write_text(path, "\n".join(lines) + "\n")


def read_curve(path) -> np.ndarray:
    header, data = _read_csv(path)
    if len(header) != 2:
        raise ParseError("curve files have exactly two columns", line=1, path=str(path))
    return data


# --- ciphertext ----------------------------------------------------------------


def write_ciphertext(path, enc: EncryptedCloud) -> None:
    c = np.asarray(enc.coords)
    if c.ndim != 2 or c.shape[1] != 3:
        raise DimensionMismatch(f"ciphertext must be (N, 3), got {c.shape}")
    _require_finite(c, "ciphertext")
    lines = [f"PMFHT-ENC v{enc.version} N={c.shape[0]}"]
    for row in c:
        lines.append(" ".join(f"{_fmt(v.real)} {_fmt(v.imag)}" for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def read_ciphertext(path) -> EncryptedCloud:
    lines = _read_text(path)
    m = _ENC_HEADER.match(lines[0].strip()) if lines else None
    if m is None:
        raise ParseError("missing 'PMFHT-ENC v<k> N=<n>' header", line=1, path=str(path))
    version, n = int(m.group(1)), int(m.group(2))
    if version != FORMAT_VERSION:
        raise UnsupportedFormat(f"ciphertext version {version} is not supported")
    body = [(k, ln) for k, ln in enumerate(lines[1:], start=2) if ln.strip()]
    if len(body) != n:
        raise ParseError(f"header announces {n} rows, found {len(body)}", path=str(path))
    out = np.empty((n, 3), dtype=complex)
    for r, (lineno, ln) in enumerate(body):
        tokens = ln.split()
        if len(tokens) != 6:
            raise ParseError(f"expected 6 values, found {len(tokens)}", line=lineno, path=str(path))
        v = _parse_floats(tokens, lineno, str(path))
        out[r] = [complex(v[0], v[1]), complex(v[2], v[3]), complex(v[4], v[5])]
    _require_finite(out, "ciphertext")
    out.setflags(write=False)
    return EncryptedCloud(coords=out, version=version, meta={"n": n})


# --- geometry token ------------------------------------------------------------


def write_geometry_token(path, t: ManifoldTransform) -> None:
    """Binary dump of the decomposition: an ASCII header line, then little-endian float64 arrays.

    Array order: b_half (N), theta (N), omega real/imag (2N), V real (N*N),
    V imag (N*N), both row-major.
    """
    n = t.n
    header = f"{_GEOM_MAGIC} v{GEOMETRY_VERSION} N={n} dtype=<f8\n".encode("ascii")
    parts = [t.b_half, t.theta, t.omega.real, t.omega.imag, t.V.real, t.V.imag]
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in parts)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_geometry_token(path) -> ManifoldTransform:
    try:
        with open(path, "rb") as fh:
            header = fh.readline()
            payload = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    m = re.match(rb"^PMFHT-GEOM v(\d+) N=(\d+) dtype=<f8\n$", header)
    if m is None:
        raise ParseError("not a geometry token", line=1, path=str(path))
    if int(m.group(1)) != GEOMETRY_VERSION:
        raise UnsupportedFormat(f"geometry token version {int(m.group(1))} is not supported")
    n = int(m.group(2))
    expected = 8 * (4 * n + 2 * n * n)
    if len(payload) != expected:
        raise ParseError(f"payload has {len(payload)} bytes, expected {expected}", path=str(path))
    flat = np.frombuffer(payload, dtype="<f8").astype(float)
    b_half, theta = flat[:n].copy(), flat[n : 2 * n].copy()
    omega = flat[2 * n : 3 * n] + 1j * flat[3 * n : 4 * n]
    nn = n * n
    V = (flat[4 * n : 4 * n + nn] + 1j * flat[4 * n + nn :]).reshape(n, n)
    for arr in (b_half, theta, omega, V):
        arr.setflags(write=False)
    return ManifoldTransform(b_half=b_half, V=V, omega=omega, theta=theta)


# --- radar cubes ------------------------------------------------------------------


def _sidecar(path) -> Path:
    return Path(str(path) + ".json")


def read_radar(path, sidecar=None) -> RadarCube:
    """R x M complex echoes from CSV (``re,im`` pairs per row) or flat float64 binary.

    The sidecar JSON (default ``<path>.json``) carries ``R``, ``M``,
    ``prf_hz`` and ``wavelength_m``.
    """
    meta_path = Path(sidecar) if sidecar else _sidecar(path)
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read radar sidecar {meta_path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=str(meta_path)) from exc
    missing = [k for k in ("R", "M", "prf_hz", "wavelength_m") if k not in meta]
    if missing:
        raise ParseError(f"sidecar lacks {', '.join(missing)}", path=str(meta_path))
    R, M = int(meta["R"]), int(meta["M"])
    if Path(path).suffix.lower() == ".csv":
        rows = []
        for lineno, ln in enumerate(_read_text(path), start=1):
            if not ln.strip():
                continue
            vals = _parse_floats(ln.split(","), lineno, str(path))
            if len(vals) != 2 * M:
                raise ParseError(f"expected {2 * M} values, found {len(vals)}", line=lineno, path=str(path))
            rows.append(vals)
        flat = np.array(rows, dtype=float).ravel()
    else:
        try:
            flat = np.fromfile(path, dtype="<f8")
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if flat.size != 2 * R * M:
        raise DimensionMismatch(f"radar file holds {flat.size // 2} complex values, sidecar says {R}x{M}")
    echoes = (flat[0::2] + 1j * flat[1::2]).reshape(R, M)
    return RadarCube(echoes, prf_hz=float(meta["prf_hz"]), wavelength_m=float(meta["wavelength_m"]))


def write_radar(path, cube: RadarCube) -> None:
    """Inverse of :func:`read_radar`; the format follows the extension (``.csv`` or binary)."""
    R, M = cube.shape
    inter = np.empty((R, 2 * M))
    inter[:, 0::2] = cube.echoes.real
    inter[:, 1::2] = cube.echoes.imag
    if Path(path).suffix.lower() == ".csv":
        _write_text(path, "".join(",".join(_fmt(v) for v in row) + "\n" for row in inter))
    else:
        try:
            inter.astype("<f8").tofile(path)
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc
    meta = {"R": R, "M": M, "prf_hz": cube.prf_hz, "wavelength_m": cube.wavelength_m}
    _write_text(_sidecar(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")


def ensure_parent(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
