"""CSV writers and readers.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs give byte-identical files.  Missing values are written as empty
fields.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "" if np.isnan(x) else repr(x)
    return str(x)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader if row]


def stride_for(n: int, max_rows: int | None) -> int:
    if not max_rows or n <= max_rows:
        return 1
    return -(-(n - 1) // (max_rows - 1))


# -- table layouts ----------------------------------------------------------


def spectrum_rows(ratio: float, eigenvalues, residuals):
    for k, (lam, res) in enumerate(zip(eigenvalues, residuals)):
        yield ratio, k, lam.real, lam.imag, res


SPECTRUM_HEADER = ["v_over_gamma", "k", "re_lambda", "im_lambda", "residual"]
EP_HEADER = ["abscissa", "cluster_size", "kind"]
SCALING_HEADER = ["n_lossy", "t_mix", "segment", "fit_exponent"]
RECIPE_HEADER = ["node_index", "re_amp", "im_amp"]


def trajectory_header(dim: int) -> list[str]:
    return ["t", "p_total"] + [f"p_{j}" for j in range(1, dim + 1)]


def amplitude_header(dim: int) -> list[str]:
    cols = ["t"]
    for j in range(1, dim + 1):
        cols += [f"re_psi_{j}", f"im_psi_{j}"]
    return cols


def mix_header(dim: int) -> list[str]:
    return ["class", "t_mix", "epsilon", "dark_overlap"] + [f"p_st_{j}" for j in range(1, dim + 1)]


def mix_row(report, dim: int) -> list:
    p = report.p_stationary
    p_cols = [None] * dim if p is None else list(p)
    return [report.mix_class, report.t_mix, report.epsilon, report.dark_overlap] + p_cols


def write_trajectory(path, traj, max_rows=None) -> Path:
    step = stride_for(len(traj.times), max_rows)
    idx = np.arange(0, len(traj.times), step)
    p_total = traj.p_total[idx]
    p_norm = traj.p_norm[idx]
    rows = ([t, pt, *p] for t, pt, p in zip(traj.times[idx], p_total, p_norm))
    return write_csv(path, trajectory_header(traj.amplitudes.shape[1]), rows)


def write_amplitudes(path, traj, max_rows=None) -> Path:
    step = stride_for(len(traj.times), max_rows)
    idx = np.arange(0, len(traj.times), step)
    rows = []
    for t, psi in zip(traj.times[idx], traj.amplitudes[idx]):
        row = [t]
        for z in psi:
            row += [z.real, z.imag]
        rows.append(row)
    return write_csv(path, amplitude_header(traj.amplitudes.shape[1]), rows)


def write_recipe(path, amplitudes) -> Path:
    rows = ((j + 1, z.real, z.imag) for j, z in enumerate(amplitudes) if z != 0)
    return write_csv(path, RECIPE_HEADER, rows)


def read_recipe(path, dim: int) -> np.ndarray:
    """Amplitude vector of length ``dim`` from a ``node_index, re_amp, im_amp`` file."""
    try:
        header, rows = read_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read recipe file {path}: {exc.strerror}") from None
    except StopIteration:
        raise ConfigError(f"recipe file {path} is empty") from None
    if [h.strip() for h in header] != RECIPE_HEADER:
        raise ConfigError(f"recipe file {path} must have columns {', '.join(RECIPE_HEADER)}")
    psi = np.zeros(dim, dtype=complex)
    for lineno, row in enumerate(rows, start=2):
        try:
            node, re, im = int(row[0]), float(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise ConfigError(f"{path}: line {lineno}: malformed row {row}") from None
        if not 1 <= node <= dim:
            raise ConfigError(f"{path}: line {lineno}: node {node} outside 1..{dim}")
        psi[node - 1] = complex(re, im)
    if not np.any(psi):
        raise ConfigError(f"recipe file {path} has no nonzero amplitude")
    return psi
