"""Bit-stable CSV and JSON writers shared by the CLI and the tests.

Every number is written with 17 significant digits so outputs round-trip
exactly and reruns with the same config and seed are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsRecord
from .errors import ValidationError
from .grid import GridSpec, HeightProfile

DIAGNOSTICS_COLUMNS = (
    "step,t,phi,mass,l2,min_slope,max_slope,tv_logslope,"
    "pos_mass,neg_mass,sing_pos,sing_neg,evi_viol"
)


def fmt(x: float) -> str:
    """17-significant-digit decimal form (round-trips any float64)."""
    return format(float(x), ".17g")


def write_profile_csv(path, h: HeightProfile) -> None:
    lines = ["x,h"]
    xs = h.x()
    for i in range(h.spec.n):
        lines.append(f"{fmt(xs[i])},{fmt(h.values[i])}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_profile_csv(path) -> tuple[np.ndarray, np.ndarray]:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0].strip() != "x,h":
        raise ValidationError("profile CSV must start with the header 'x,h'", "snapshot")
    xs, hs = [], []
    for line in text[1:]:
        a, b = line.split(",")
        xs.append(float(a))
        hs.append(float(b))
    return np.array(xs), np.array(hs)


def read_profile_snapshot(path, spec: GridSpec) -> HeightProfile:
    xs, hs = read_profile_csv(path)
    if len(hs) != spec.n:
        raise ValidationError(f"snapshot has {len(hs)} rows, grid expects {spec.n}", "snapshot")
    if np.max(np.abs(xs - spec.nodes())) > 1e-9 * max(1.0, spec.length):
        raise ValidationError("snapshot abscissae do not match the grid nodes", "snapshot")
    return HeightProfile(spec, hs)


def write_diagnostics_csv(path, records) -> None:
    lines = [DIAGNOSTICS_COLUMNS]
    for r in records:
        evi = "" if r.evi_viol is None else fmt(r.evi_viol)
        lines.append(
            f"{r.step},{fmt(r.t)},{fmt(r.phi)},{fmt(r.mass)},{fmt(r.l2)},"
            f"{fmt(r.min_slope)},{fmt(r.max_slope)},{fmt(r.tv_logslope)},"
            f"{fmt(r.pos_mass)},{fmt(r.neg_mass)},{fmt(r.sing_pos)},{fmt(r.sing_neg)},{evi}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_diagnostics_csv(path) -> list[DiagnosticsRecord]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != DIAGNOSTICS_COLUMNS:
        raise ValidationError("unexpected diagnostics CSV header", "diagnostics")
    records = []
    for line in lines[1:]:
        parts = line.split(",")
        records.append(
            DiagnosticsRecord(
                step=int(parts[0]),
                t=float(parts[1]),
                phi=float(parts[2]),
                mass=float(parts[3]),
                l2=float(parts[4]),
                min_slope=float(parts[5]),
                max_slope=float(parts[6]),
                tv_logslope=float(parts[7]),
                pos_mass=float(parts[8]),
                neg_mass=float(parts[9]),
                sing_pos=float(parts[10]),
                sing_neg=float(parts[11]),
                evi_viol=None if parts[12] == "" else float(parts[12]),
            )
        )
    return records


def write_summary_json(path, summary: dict) -> None:
    """Fixed-order JSON with 17-significant-digit numbers."""
    parts = []
    for key, value in summary.items():
        if value is None:
            parts.append(f'  "{key}": null')
        elif isinstance(value, bool):
            parts.append(f'  "{key}": {"true" if value else "false"}')
        elif isinstance(value, int):
            parts.append(f'  "{key}": {value}')
        elif isinstance(value, float):
            parts.append(f'  "{key}": {fmt(value)}')
        elif isinstance(value, str):
            parts.append(f'  "{key}": {json.dumps(value)}')
        elif isinstance(value, (list, tuple)):
            inner = ", ".join(fmt(v) if isinstance(v, float) else str(v) for v in value)
            parts.append(f'  "{key}": [{inner}]')
        else:
            raise TypeError(f"unsupported summary value for {key}: {type(value)}")
    Path(path).write_text("{\n" + ",\n".join(parts) + "\n}\n")


def read_summary_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_step_trajectory_csv(path, times, configurations) -> None:
    n = configurations[0].n_steps
    header = "t," + ",".join(f"x_{i}" for i in range(n))
    lines = [header]
    for t, cfg in zip(times, configurations):
        lines.append(fmt(t) + "," + ",".join(fmt(x) for x in cfg.x))
    Path(path).write_text("\n".join(lines) + "\n")


def write_compare_csv(path, rows) -> None:
    lines = ["n_steps,L2_error"]
    for n_steps, err in rows:
        lines.append(f"{n_steps},{fmt(err)}")
    Path(path).write_text("\n".join(lines) + "\n")
