"""Command-line front end: run | oracle | bcf | compare | check | study.

Every mode reads one flat config file plus ``--key value`` overrides, echoes
the effective configuration, and writes bit-stable outputs into ``out_dir``
(overridable through the ``SOSFLOW_OUT`` environment variable).

Exit codes: 0 success, 1 invariant violation, 2 solver failure, 3 config error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .bcf import BcfTimeConfig, bcf_evolve, profile_to_steps
from .config import MODES, RunConfig, apply_overrides, parse_config, parse_initial
from .diagnostics import evi_test, feasible_probe_profiles, singularity_refinement_study
from .errors import (
    BlowUp,
    CheckFailure,
    InfeasibleStart,
    NoDecrease,
    NonMonotone,
    NotNormalized,
    ParseError,
    SosflowError,
    StepCollision,
    ValidationError,
)
from .evolution import EvolutionConfig, Trajectory, evolve
from .functional import BvBallSpec, slope_total_variation
from .grid import GridSpec, HeightProfile
from .initial import kink_profile, linear_profile, profile_from_csv, sine_profile
from .strong_form import OracleConfig, oracle_evolve

PHI_STEP_TOL_FACTOR = 10.0  # per-step functional increase allowance, times grad_tol
L2_STEP_TOL = 1e-8
MASS_TOL = 1e-12
MASS_BALANCE_TOL = 1e-10
SLOPE_BOUND_SLACK = 1e-6
TV_SLACK = 1e-6


def build_initial(cfg: RunConfig, spec: GridSpec) -> HeightProfile:
    kind, params = parse_initial(cfg.initial)
    if kind == "linear":
        return linear_profile(spec)
    if kind == "sine":
        return sine_profile(spec, params[0], int(params[1]))
    if kind == "kink":
        return kink_profile(spec, params[0], params[1], params[2])
    return profile_from_csv(spec, params[0])


def _resolve_out_dir(cfg: RunConfig) -> Path:
    out = os.environ.get("SOSFLOW_OUT", cfg.out_dir)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo(cfg: RunConfig, out_dir: Path, stream) -> None:
    lines = cfg.echo_lines()
    print("\n".join(lines), file=stream)
    (out_dir / "config_echo.cfg").write_text("\n".join(lines) + "\n")


def _write_trajectory(out_dir: Path, traj: Trajectory) -> None:
    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for step, state in zip(traj.snapshot_steps, traj.states):
        io.write_profile_csv(snap_dir / f"step_{step:06d}.csv", state)
    io.write_diagnostics_csv(out_dir / "diagnostics.csv", traj.diagnostics)


def _verify_run_outputs(cfg: RunConfig, out_dir: Path) -> list[str]:
    """Invariant suite over a finished run directory; returns violations."""
    problems: list[str] = []
    summary_path = out_dir / "summary.json"
    diag_path = out_dir / "diagnostics.csv"
    if not summary_path.exists() or not diag_path.exists():
        return [f"missing outputs in {out_dir}"]
    summary = io.read_summary_json(summary_path)
    records = io.read_diagnostics_csv(diag_path)
    if not records:
        return ["diagnostics table is empty"]

    phi_tol = PHI_STEP_TOL_FACTOR * cfg.grad_tol
    phi0 = records[0].phi
    c1, c2 = summary["c1"], summary["c2"]
    for prev, cur in zip(records[:-1], records[1:]):
        if cur.phi > prev.phi + phi_tol:
            problems.append(
                f"phi nonincreasing violated at step {cur.step}: "
                f"{prev.phi!r} -> {cur.phi!r}"
            )
        if cur.l2 > prev.l2 + L2_STEP_TOL:
            problems.append(f"l2 decay violated at step {cur.step}")
        if abs(cur.mass - prev.mass) > MASS_TOL:
            problems.append(f"mass conservation violated at step {cur.step}")
    for r in records:
        if r.min_slope < c1 * (1.0 - SLOPE_BOUND_SLACK):
            problems.append(f"lower slope bound violated at step {r.step}")
        if r.max_slope > c2 * (1.0 + SLOPE_BOUND_SLACK):
            problems.append(f"upper slope bound violated at step {r.step}")
        if r.tv_logslope > 2.0 * phi0 + TV_SLACK:
            problems.append(f"log-slope TV bound violated at step {r.step}")
        if abs(r.pos_mass - r.neg_mass) > MASS_BALANCE_TOL:
            problems.append(f"curvature mass balance violated at step {r.step}")
        if abs(r.pos_mass - 0.5 * r.tv_logslope) > MASS_BALANCE_TOL:
            problems.append(f"half-TV identity violated at step {r.step}")
    if abs(records[-1].t - cfg.t_final) > 1e-12 * max(1.0, cfg.t_final):
        problems.append(f"final time {records[-1].t!r} misses t_final {cfg.t_final!r}")

    spec = cfg.grid_spec()
    rule = cfg.threshold_rule()
    by_step = {r.step: r for r in records}
    snap_dir = out_dir / "snapshots"
    for snap in sorted(snap_dir.glob("step_*.csv")):
        step = int(snap.stem.split("_")[1])
        try:
            state = io.read_profile_snapshot(snap, spec)
            state.validate()
        except (ValidationError, NonMonotone, ValueError) as exc:
            problems.append(f"snapshot {snap.name} invalid: {exc}")
            continue
        from .diagnostics import record as diag_record

        fresh = diag_record(state, by_step[step].t, rule, step=step)
        row = by_step.get(step)
        if row is None:
            problems.append(f"snapshot {snap.name} has no diagnostics row")
            continue
        for name in ("phi", "l2", "tv_logslope"):
            a, b = getattr(fresh, name), getattr(row, name)
            if abs(a - b) > 1e-12 * max(1.0, abs(b)):
                problems.append(f"snapshot {snap.name}: recomputed {name} disagrees with table")
        tv_slope = slope_total_variation(state)
        if tv_slope > summary["c_star"] - 1.0 + TV_SLACK:
            problems.append(f"BV ball active at step {step} (slope TV {tv_slope!r})")
    return problems


# -- modes ----------------------------------------------------------------


def _mode_run(cfg: RunConfig, out_dir: Path) -> int:
    spec = cfg.grid_spec()
    rule = cfg.threshold_rule()
    h0 = build_initial(cfg, spec)
    evo = EvolutionConfig(
        t_final=cfg.t_final,
        n_steps=cfg.n_steps,
        inner=cfg.inner_config(),
        rule=rule,
        c_star_override=cfg.c_star_override,
        snapshot_every=cfg.snapshot_every,
    )
    traj = evolve(h0, evo)
    max_evi = None
    if cfg.evi_probes > 0:
        rng = np.random.default_rng(cfg.seed)
        ball = BvBallSpec(traj.bounds.c_star)
        probes = feasible_probe_profiles(spec, ball, rule, cfg.evi_probes, rng)
        report = evi_test(traj, probes, ball, rule)
        max_evi = report.max_violation
        print(
            f"evi probes: {report.n_probes}, excluded (nonconvex segment): "
            f"{report.excluded_nonconvex}"
        )
    _write_trajectory(out_dir, traj)
    summary = {
        "phi0": traj.bounds.phi0,
        "phi_final": traj.diagnostics[-1].phi,
        "c1": traj.bounds.c1,
        "c2": traj.bounds.c2,
        "c_star": traj.bounds.c_star,
        "steps": len(traj.reports),
        "backoffs": sum(r.backoffs for r in traj.reports),
        "max_evi_violation": max_evi,
    }
    io.write_summary_json(out_dir / "summary.json", summary)
    problems = _verify_run_outputs(cfg, out_dir)
    for p in problems:
        print(f"INVARIANT VIOLATED: {p}", file=sys.stderr)
    print(
        f"run finished: steps={summary['steps']} phi {io.fmt(summary['phi0'])} -> "
        f"{io.fmt(summary['phi_final'])}"
    )
    return 1 if problems else 0


def _mode_oracle(cfg: RunConfig, out_dir: Path) -> int:
    spec = cfg.grid_spec()
    rule = cfg.threshold_rule()
    h0 = build_initial(cfg, spec)
    ocfg = OracleConfig(
        t_final=cfg.t_final,
        dt_safety=cfg.dt_safety,
        rule=rule,
        n_records=cfg.oracle_records,
    )
    traj = oracle_evolve(h0, ocfg)
    _write_trajectory(out_dir, traj)
    summary = {
        "phi0": traj.bounds.phi0,
        "phi_final": traj.diagnostics[-1].phi,
        "c1": traj.bounds.c1,
        "c2": traj.bounds.c2,
        "c_star": traj.bounds.c_star,
        "steps": len(traj.diagnostics) - 1,
        "backoffs": 0,
        "max_evi_violation": None,
    }
    io.write_summary_json(out_dir / "summary.json", summary)
    problems = []
    recs = traj.diagnostics
    for prev, cur in zip(recs[:-1], recs[1:]):
        if cur.phi > prev.phi + 1e-6 * max(cur.t - prev.t, 1e-300) + 1e-12:
            problems.append(f"oracle dissipation violated at record {cur.step}")
        if abs(cur.mass - prev.mass) > MASS_BALANCE_TOL:
            problems.append(f"oracle mass conservation violated at record {cur.step}")
    for p in problems:
        print(f"INVARIANT VIOLATED: {p}", file=sys.stderr)
    print(f"oracle finished: phi {io.fmt(recs[0].phi)} -> {io.fmt(recs[-1].phi)}")
    return 1 if problems else 0


def _mode_bcf(cfg: RunConfig, out_dir: Path) -> int:
    spec = cfg.grid_spec()
    h0 = build_initial(cfg, spec)
    steps0 = profile_to_steps(h0, cfg.bcf_steps)
    tcfg = BcfTimeConfig(
        t_final=cfg.bcf_t,
        dt=cfg.bcf_dt,
        record_every=cfg.bcf_record_every,
    )
    traj = bcf_evolve(steps0, tcfg)
    io.write_step_trajectory_csv(out_dir / "bcf_trajectory.csv", traj.times, traj.configurations)
    gaps = traj.configurations[-1].gaps()
    print(
        f"bcf finished: {len(traj.times)} records, final gap spread "
        f"[{io.fmt(gaps.min())}, {io.fmt(gaps.max())}]"
    )
    return 0


def _mode_compare(cfg: RunConfig, out_dir: Path) -> int:
    spec = cfg.grid_spec()
    rule = cfg.threshold_rule()
    h0 = build_initial(cfg, spec)
    ocfg = OracleConfig(
        t_final=cfg.t_final, dt_safety=cfg.dt_safety, rule=rule, n_records=2
    )
    reference = oracle_evolve(h0, ocfg).states[-1]
    rows = []
    for n_steps in cfg.compare_steps_list():
        evo = EvolutionConfig(
            t_final=cfg.t_final,
            n_steps=n_steps,
            inner=cfg.inner_config(),
            rule=rule,
            c_star_override=cfg.c_star_override,
            snapshot_every=n_steps,
        )
        final = evolve(h0, evo).states[-1]
        err = float(
            np.sqrt(np.sum((final.values - reference.values) ** 2) * spec.dx)
        )
        rows.append((n_steps, err))
        print(f"n_steps={n_steps}: L2 error {io.fmt(err)}")
    io.write_compare_csv(out_dir / "compare.csv", rows)
    return 0


def _mode_check(cfg: RunConfig, out_dir: Path) -> int:
    problems = _verify_run_outputs(cfg, out_dir)
    for p in problems:
        print(f"CHECK FAIL: {p}", file=sys.stderr)
    if problems:
        return 1
    print("CHECK OK")
    return 0


def _mode_study(cfg: RunConfig, out_dir: Path) -> int:
    kind, params = parse_initial(cfg.initial)
    if kind != "kink":
        raise ValidationError("study mode needs kink(...) initial data", "initial")
    rule = cfg.threshold_rule()

    def factory(n: int) -> HeightProfile:
        return kink_profile(GridSpec(n, cfg.L), params[0], params[1], params[2])

    report = singularity_refinement_study(
        factory,
        cfg.study_levels_list(),
        t_final=cfg.study_t,
        n_steps=cfg.study_steps,
        rule=rule,
        inner=cfg.inner_config(),
    )
    io.write_summary_json(
        out_dir / "study.json",
        {
            "levels": list(report.levels),
            "neg_masses": [float(v) for v in report.neg_masses],
            "pos_masses": [float(v) for v in report.pos_masses],
            "neg_vanishing": report.neg_vanishing,
            "pos_in_band": report.pos_in_band,
        },
    )
    for n, neg, pos in zip(report.levels, report.neg_masses, report.pos_masses):
        print(f"N={n}: singular masses neg={io.fmt(neg)} pos={io.fmt(pos)}")
    print(f"neg vanishing: {report.neg_vanishing}; pos within factor-2 band: {report.pos_in_band}")
    return 0 if (report.neg_vanishing and report.pos_in_band) else 1


_MODE_DRIVERS = {
    "run": _mode_run,
    "oracle": _mode_oracle,
    "bcf": _mode_bcf,
    "compare": _mode_compare,
    "check": _mode_check,
    "study": _mode_study,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sosflow", description=__doc__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("config", help="path to a flat key = value config file")
        p.add_argument(
            "overrides",
            nargs=argparse.REMAINDER,
            help="pairs of --key value overriding config entries",
        )
    return parser


def _collect_overrides(tokens: list[str]) -> list[tuple[str, str]]:
    pairs = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ValidationError(f"expected --key, got '{tok}'", tok)
        if i + 1 >= len(tokens):
            raise ValidationError("missing value after override key", tok[2:])
        pairs.append((tok[2:], tokens[i + 1]))
        i += 2
    return pairs


def main(argv: list[str]) -> int:
    try:
        ns = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return 3 if exc.code not in (0, None) else 0
    try:
        text = Path(ns.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    try:
        cfg = parse_config(text)
        cfg = apply_overrides(cfg, _collect_overrides(ns.overrides))
        cfg.mode = ns.mode
        out_dir = _resolve_out_dir(cfg)
        _echo(cfg, out_dir, sys.stdout)
        return _MODE_DRIVERS[ns.mode](cfg, out_dir)
    except (ParseError, ValidationError, NotNormalized) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except (NoDecrease, BlowUp, StepCollision, InfeasibleStart, NonMonotone) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except CheckFailure as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1
    except SosflowError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:  # entry point for the installed script
    raise SystemExit(main(sys.argv[1:]))
