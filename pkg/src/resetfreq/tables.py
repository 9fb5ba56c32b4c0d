"""CSV schemas shared by the library and the command line.

Every file is comma separated with one header row.  Floating-point values are
written in full double precision scientific notation (``%.17e``).
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .closedloop import SPECTRUM_QUANTITIES

__all__ = [
    "fmt",
    "write_csv",
    "read_csv",
    "complex_columns",
    "OPENLOOP_HEADER",
    "SPECTRUM_HEADER",
    "HIFREQ_HEADER",
    "PSEUDO_HEADER",
    "SIMULATE_HEADER",
    "openloop_rows",
    "spectrum_rows",
    "pseudo_rows",
    "simulate_rows",
]


def fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, int, np.bool_, np.integer)):
        return str(int(v))
    return f"{float(v) + 0.0:.17e}"


def db(z):
    m = abs(z)
    return 20.0 * math.log10(m) if m > 0 else -math.inf


def deg(z):
    return math.degrees(math.atan2(z.imag, z.real)) if z != 0 else 0.0


def complex_columns(prefix):
    return [f"{prefix}_re", f"{prefix}_im", f"{prefix}_db", f"{prefix}_deg"]


def _complex_values(z):
    z = complex(z)
    return [z.real, z.imag, db(z), deg(z)]


OPENLOOP_HEADER = ["omega", "n"] + complex_columns("H")
SPECTRUM_HEADER = ["omega", "n"] + [c for q in SPECTRUM_QUANTITIES for c in complex_columns(q)]
HIFREQ_HEADER = SPECTRUM_HEADER + ["approx"]
PSEUDO_HEADER = ["omega", "kind", "magnitude", "magnitude_db", "phase_deg", "t_max"]
SIMULATE_HEADER = ["omega", "n"] + complex_columns("T") + complex_columns("S") + ["periodicity"]


def openloop_rows(spec):
    return [[spec.omega, n, *_complex_values(spec.H[n - 1])] for n in range(1, spec.H.size + 1)]


def spectrum_rows(spec, approx=None):
    rows = []
    for n in range(1, spec.n_max + 1):
        row = [spec.omega, n]
        for q in SPECTRUM_QUANTITIES:
            row += _complex_values(spec.quantity(q)[n - 1])
        if approx is not None:
            row.append(int(bool(approx)))
        rows.append(row)
    return rows


def pseudo_rows(points):
    return [[p.omega, p.kind, p.magnitude, p.db, math.degrees(p.phase), p.t_max] for p in points]


def simulate_rows(omega, T, S, residual):
    return [[omega, n, *_complex_values(T[n - 1]), *_complex_values(S[n - 1]), residual]
            for n in range(1, len(T) + 1)]


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return Path(path)


def read_csv(path):
    """Header and rows of a CSV written by :func:`write_csv` (values kept as strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], rows[1:]
