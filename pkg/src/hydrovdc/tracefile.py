"""CSV trace files and generated plotting scripts."""

from __future__ import annotations

import csv
import os
import re
from pathlib import Path

import numpy as np

SIGNIFICANT_DIGITS = 12


def format_number(v: float) -> str:
    """Locale-independent decimal text with 12 significant digits."""
    return format(float(v), f".{SIGNIFICANT_DIGITS}g")


def write_trace_csv(columns: dict[str, np.ndarray], path) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in data:
            w.writerow([format_number(v) for v in row])


def read_trace_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    names = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


def _count(names, pattern: str) -> int:
    return len([n for n in names if re.fullmatch(pattern, n)])


PLOT_TEMPLATE = '''"""Plots of a closed-loop trace: piston forces, chamber pressures, valve voltages and tool path.

Run with: python {script_name}
Figures are written next to this script as PNG files.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
CSV = HERE / {csv_rel!r}
N_ACT = {n_act}

d = np.genfromtxt(CSV, delimiter=",", names=True)
t = d["t_s"]


def save(fig, name):
    fig.tight_layout()
    fig.savefig(HERE / name, dpi=150)
    plt.close(fig)


fig, axes = plt.subplots(N_ACT, 1, sharex=True, figsize=(8, 2.6 * N_ACT), squeeze=False)
for k, ax in enumerate(axes[:, 0], start=1):
    ax.plot(t, d[f"fp{{k}}_req_N"] / 1e3, label="required")
    ax.plot(t, d[f"fp{{k}}_N"] / 1e3, "--", label="obtained")
    ax.set_ylabel(f"actuator {{k}} force (kN)")
    ax.legend(loc="best")
axes[-1, 0].set_xlabel("time (s)")
save(fig, "forces.png")

fig, axes = plt.subplots(N_ACT, 1, sharex=True, figsize=(8, 2.6 * N_ACT), squeeze=False)
for k, ax in enumerate(axes[:, 0], start=1):
    ax.plot(t, d[f"pa{{k}}_Pa"] / 1e5, label="chamber a")
    ax.plot(t, d[f"pb{{k}}_Pa"] / 1e5, label="chamber b")
    ax.set_ylabel(f"actuator {{k}} pressure (bar)")
    ax.legend(loc="best")
axes[-1, 0].set_xlabel("time (s)")
save(fig, "pressures.png")

fig, ax = plt.subplots(figsize=(8, 3))
for k in range(1, N_ACT + 1):
    ax.plot(t, d[f"u{{k}}_V"], label=f"valve {{k}}")
ax.set_xlabel("time (s)")
ax.set_ylabel("voltage (V)")
ax.legend(loc="best")
save(fig, "voltages.png")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(d["tool_x_des_m"], d["tool_y_des_m"], label="desired")
ax1.plot(d["tool_x_m"], d["tool_y_m"], "--", label="obtained")
ax1.set_xlabel("x (m)")
ax1.set_ylabel("y (m)")
ax1.set_aspect("equal", adjustable="datalim")
ax1.legend(loc="best")
ax2.semilogy(t, np.maximum(d["tool_err_m"] * 1e3, 1e-9))
ax2.set_xlabel("time (s)")
ax2.set_ylabel("tool error (mm)")
save(fig, "path.png")
'''


def plot_script(csv_path, script_path) -> str:
    """Source of a matplotlib script plotting the trace at ``csv_path``; paths are resolved relative to the script."""
    csv_path = Path(csv_path)
    script_path = Path(script_path)
    with open(csv_path, newline="", encoding="utf-8") as fh:
        names = next(csv.reader(fh))
    n_act = _count(names, r"u\d+_V")
    if n_act == 0:
        raise ValueError(f"{csv_path}: no voltage columns found")
    rel = os.path.relpath(csv_path.resolve(), script_path.resolve().parent)
    return PLOT_TEMPLATE.format(script_name=script_path.name, csv_rel=rel, n_act=n_act)
