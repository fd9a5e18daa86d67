"""Flat ``key = value`` run configuration: parsing, validation and echo."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any

from .errors import ParseError, ValidationError
from .grid import GridSpec, ThresholdRule
from .resolvent import InnerSolverConfig

MODES = ("run", "oracle", "bcf", "compare", "check", "study")


def _fmt_value(v: Any) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if v is None:
        return "none"
    return str(v)


@dataclass
class RunConfig:
    """Every knob of a run; defaults make a small smooth demonstration run."""

    mode: str = "run"
    N: int = 64
    L: float = 1.0
    initial: str = "linear"
    t_final: float = 1e-3
    n_steps: int = 32
    snapshot_every: int = 1
    grad_tol: float = 1e-10
    max_iter: int = 200
    tau_backoff: float = 0.5
    max_backoffs: int = 20
    constraint_tol: float = 1e-12
    threshold_k: float = 4.0
    c_star_override: float | None = None
    dt_safety: float = 0.1
    oracle_records: int = 33
    seed: int = 0
    out_dir: str = "out"
    evi_probes: int = 20
    compare_steps: str = "32,64,128"
    bcf_steps: int = 100
    bcf_t: float = 1e-2
    bcf_dt: float | None = None
    bcf_record_every: int = 200
    study_levels: str = "64,128,256"
    study_t: float = 2e-4
    study_steps: int = 16

    # -- derived objects -------------------------------------------------

    def grid_spec(self) -> GridSpec:
        return GridSpec(self.N, self.L)

    def threshold_rule(self) -> ThresholdRule:
        return ThresholdRule(k0=self.threshold_k)

    def inner_config(self) -> InnerSolverConfig:
        return InnerSolverConfig(
            grad_tol=self.grad_tol,
            max_iter=self.max_iter,
            tau_backoff=self.tau_backoff,
            max_backoffs=self.max_backoffs,
            constraint_tol=self.constraint_tol,
        )

    def compare_steps_list(self) -> list[int]:
        return [int(s) for s in self.compare_steps.split(",")]

    def study_levels_list(self) -> list[int]:
        return [int(s) for s in self.study_levels.split(",")]

    def echo_lines(self) -> list[str]:
        lines = ["# effective configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {_fmt_value(getattr(self, f.name))}")
        return lines


def parse_initial(text: str) -> tuple[str, tuple]:
    """Parse the initial-data spec: linear | sine(a,k) | kink(l,r,p) | from_file(path)."""
    text = text.strip()
    if text == "linear":
        return "linear", ()
    for name, n_args in (("sine", 2), ("kink", 3), ("from_file", 1)):
        if text.startswith(name + "(") and text.endswith(")"):
            inner = text[len(name) + 1 : -1]
            parts = [p.strip() for p in inner.split(",")]
            if len(parts) != n_args:
                raise ValidationError(
                    f"{name} takes {n_args} argument(s), got {len(parts)}", "initial"
                )
            if name == "from_file":
                return name, (parts[0],)
            try:
                return name, tuple(float(p) for p in parts)
            except ValueError as exc:
                raise ValidationError(f"bad numeric argument in '{text}'", "initial") from exc
    raise ValidationError(f"unknown initial data '{text}'", "initial")


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ValidationError(f"expected an integer, got '{raw}'", key) from exc


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ValidationError(f"expected a number, got '{raw}'", key) from exc


def _parse_value(key: str, raw: str) -> Any:
    if key == "mode":
        if raw not in MODES:
            raise ValidationError(f"mode must be one of {'|'.join(MODES)}", key)
        return raw
    if key in ("N", "n_steps", "snapshot_every", "max_iter", "max_backoffs",
               "oracle_records", "seed", "evi_probes", "bcf_steps",
               "bcf_record_every", "study_steps"):
        return _parse_int(key, raw)
    if key in ("L", "t_final", "grad_tol", "tau_backoff", "constraint_tol",
               "threshold_k", "dt_safety", "bcf_t", "study_t"):
        return _parse_float(key, raw)
    if key in ("c_star_override", "bcf_dt"):
        return None if raw.lower() in ("none", "auto") else _parse_float(key, raw)
    if key in ("initial", "out_dir", "compare_steps", "study_levels"):
        return raw
    raise ValidationError("unknown key", key)


def _validate(cfg: RunConfig) -> None:
    def require(cond: bool, key: str, msg: str) -> None:
        if not cond:
            raise ValidationError(msg, key)

    require(cfg.N >= 4, "N", f"grid needs at least 4 cells, got {cfg.N}")
    require(cfg.L > 0.0, "L", "period length must be positive")
    require(cfg.t_final > 0.0, "t_final", "must be positive")
    require(cfg.n_steps >= 1, "n_steps", "must be at least 1")
    require(cfg.snapshot_every >= 1, "snapshot_every", "must be at least 1")
    require(cfg.grad_tol > 0.0, "grad_tol", "must be positive")
    require(cfg.max_iter >= 1, "max_iter", "must be at least 1")
    require(0.0 < cfg.tau_backoff < 1.0, "tau_backoff", "must lie in (0, 1)")
    require(cfg.max_backoffs >= 1, "max_backoffs", "must be at least 1")
    require(cfg.constraint_tol > 0.0, "constraint_tol", "must be positive")
    require(cfg.threshold_k > 0.0, "threshold_k", "must be positive")
    require(
        cfg.c_star_override is None or cfg.c_star_override >= 1.0,
        "c_star_override",
        "must be at least 1 when given",
    )
    require(0.0 < cfg.dt_safety <= 1.0, "dt_safety", "must lie in (0, 1]")
    require(cfg.oracle_records >= 2, "oracle_records", "must be at least 2")
    require(cfg.evi_probes >= 0, "evi_probes", "must be non-negative")
    require(cfg.bcf_steps >= 3, "bcf_steps", "must be at least 3")
    require(cfg.bcf_t > 0.0, "bcf_t", "must be positive")
    require(cfg.bcf_dt is None or cfg.bcf_dt > 0.0, "bcf_dt", "must be positive or auto")
    require(cfg.bcf_record_every >= 1, "bcf_record_every", "must be at least 1")
    require(cfg.study_t > 0.0, "study_t", "must be positive")
    require(cfg.study_steps >= 1, "study_steps", "must be at least 1")
    parse_initial(cfg.initial)
    for key, getter in (("compare_steps", cfg.compare_steps_list),
                        ("study_levels", cfg.study_levels_list)):
        try:
            values = getter()
        except ValueError as exc:
            raise ValidationError("expected a comma-separated integer list", key) from exc
        require(len(values) >= 1 and all(v >= 4 for v in values), key,
                "every entry must be an integer grid size >= 4")


_KNOWN_KEYS = {f.name for f in fields(RunConfig)}


def parse_config(text: str) -> RunConfig:
    """Parse config text; raises ParseError (syntax) or ValidationError (values)."""
    assignments: dict[str, Any] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got '{raw_line.strip()}'", lineno)
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key in assignments:
            raise ParseError(f"duplicate key '{key}'", lineno)
        if key not in _KNOWN_KEYS:
            raise ValidationError("unknown key", key)
        assignments[key] = _parse_value(key, raw_value)
    cfg = RunConfig(**assignments)
    _validate(cfg)
    return cfg


def apply_overrides(cfg: RunConfig, pairs: list[tuple[str, str]]) -> RunConfig:
    """Apply ``--key value`` command-line overrides on top of a parsed config."""
    for key, raw in pairs:
        if key not in _KNOWN_KEYS:
            raise ValidationError("unknown key", key)
        setattr(cfg, key, _parse_value(key, raw))
    _validate(cfg)
    return cfg
