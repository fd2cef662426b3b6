"""Surface and coefficient file formats.

Surface files are a single ASCII header line followed by ``n*n`` row-major
little-endian float64 values::

    WALSHDM-SURFACE 1 n=64 units=nm config=<hash>\\n<bytes>

Coefficient files are CSV with columns ``p,q,value`` in stacked order.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

MAGIC = "WALSHDM-SURFACE"
VERSION = 1


class FormatError(ValueError):
    pass


def write_surface(path, surface: np.ndarray, config_hash: str = "-", units: str = "nm") -> None:
    w = np.asarray(surface, dtype="<f8")
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"surface must be square, got shape {w.shape}")
    header = f"{MAGIC} {VERSION} n={w.shape[0]} units={units} config={config_hash}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(w).tobytes())


def read_surface_header(path) -> dict:
    with open(path, "rb") as fh:
        line = fh.readline(256)
    return _parse_header(line, path)


def _parse_header(line: bytes, path) -> dict:
    try:
        parts = line.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a surface file") from exc
    if len(parts) < 3 or parts[0] != MAGIC:
        raise FormatError(f"{path}: bad magic")
    if int(parts[1]) != VERSION:
        raise FormatError(f"{path}: unsupported version {parts[1]}")
    meta = dict(p.split("=", 1) for p in parts[2:] if "=" in p)
    if "n" not in meta:
        raise FormatError(f"{path}: header lacks n")
    meta["n"] = int(meta["n"])
    return meta


def read_surface(path) -> np.ndarray:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header")
    meta = _parse_header(data[:nl + 1], path)
    n = meta["n"]
    body = data[nl + 1:]
    if len(body) != n * n * 8:
        raise FormatError(f"{path}: expected {n * n * 8} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(n, n).astype(np.float64)


def write_surface_csv(path, surface: np.ndarray) -> None:
    np.savetxt(path, np.asarray(surface), delimiter=",", fmt="%.17g")


def write_coeffs(path, coeffs: np.ndarray, mode_count: int) -> None:
    a = np.asarray(coeffs, dtype=np.float64)
    if a.shape != (mode_count * mode_count,):
        raise ValueError("coefficient count does not match mode_count")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["p", "q", "value"])
        for k, v in enumerate(a):
            q, p = divmod(k, mode_count)
            out.writerow([p + 1, q + 1, repr(float(v))])


def read_coeffs(path) -> tuple[np.ndarray, int]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"p", "q", "value"}:
        raise FormatError(f"{path}: expected columns p,q,value")
    m = int(round(len(rows) ** 0.5))
    if m * m != len(rows):
        raise FormatError(f"{path}: {len(rows)} rows is not a square count")
    a = np.empty(m * m)
    for row in rows:
        p, q = int(row["p"]), int(row["q"])
        if not (1 <= p <= m and 1 <= q <= m):
            raise FormatError(f"{path}: index ({p},{q}) out of range")
        a[(q - 1) * m + (p - 1)] = float(row["value"])
    return a, m
