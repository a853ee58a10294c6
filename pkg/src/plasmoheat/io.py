"""Deterministic CSV output and input helpers.

Numbers are written with 17 significant digits (``%.17g``), which is
locale-independent and round-trips every double exactly.  Files are staged
in memory and committed with a temp-file-then-rename, so a failed run leaves
no partial output.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


class OutputSet:
    """CSV files collected during a run and written together on success."""

    def __init__(self) -> None:
        self.files: dict[str, str] = {}

    def add(self, name: str, header: list[str], rows) -> None:
        self.files[name] = csv_text(header, rows)

    def commit(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files.items():
            target = out / name
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
            try:
                with os.fdopen(fd, "w", newline="") as fh:
                    fh.write(text)
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            written.append(target)
        return written


def read_points_csv(path: str | Path) -> np.ndarray:
    """Read ``x,y,z`` rows (header row required)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns x,y,z")
    return data


def dipole_rows(centers: np.ndarray, Q: np.ndarray):
    for i, (z, q) in enumerate(zip(centers, Q)):
        yield (i, *z, q[0].real, q[0].imag, q[1].real, q[1].imag, q[2].real, q[2].imag,
               float(np.sum(np.abs(q) ** 2)))


DIPOLE_HEADER = ["i", "x", "y", "z", "re_qx", "im_qx", "re_qy", "im_qy", "re_qz", "im_qz", "abs2"]
FIELD_HEADER = ["cell", "x", "y", "z", "re_ex", "im_ex", "re_ey", "im_ey", "re_ez", "im_ez", "abs2",
                "abs2_hat"]


def field_rows(centers: np.ndarray, E: np.ndarray, E_hat: np.ndarray):
    for i, (z, e, eh) in enumerate(zip(centers, E, E_hat)):
        yield (i, *z, e[0].real, e[0].imag, e[1].real, e[1].imag, e[2].real, e[2].imag,
               float(np.sum(np.abs(e) ** 2)), float(np.sum(np.abs(eh) ** 2)))


def trajectory_rows(centers: np.ndarray, times: np.ndarray, *series: np.ndarray):
    for i, z in enumerate(centers):
        for n, t in enumerate(times):
            yield (i, *z, t, *(s[i, n] for s in series))


def sample_rows(points: np.ndarray, times: np.ndarray, values: np.ndarray):
    for p, x in enumerate(points):
        for n, t in enumerate(times):
            yield (*x, t, values[p, n])
