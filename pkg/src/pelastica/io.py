"""Run configuration and atomic output files.

Configuration is a flat ``key=value`` text file; ``#`` starts a comment.
Command-line ``--set key=value`` overrides win over file entries.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .energy import FlowParams
from .errors import ConfigError
from .flow import ContinuationSchedule, FlowControls

COMMANDS = ("flow", "continuation", "gradcheck", "check", "energy")

# Defaults for every optional key; ``lambda`` has none and must be given.
DEFAULTS = {
    "p": "2",
    "delta": "0.01",
    "epsilon": "0.01",
    "N": "256",
    "n": "2",
    "horizon": "10",
    "initial": "ellipse 2 1",
    "seed": "0",
    "snapshot_stride": "10",
    "dt_initial": "1e-3",
    "dt_max": "0.05",
    "tol_stationary": "1e-5",
    "tol_energy_rise": "1e-10",
    "max_steps": "1000000",
    "degenerate": "false",
    "regularity_diagnostics": "false",
    "stages": "1e-1:1e-1,1e-2:1e-2,1e-3:1e-3",
    "per_stage_time": "10",
    "regularity_cap": "1000",
    "interpolation_cap": "10",
    "gradcheck_curves": "2",
    "gradcheck_fields": "3",
    "gradcheck_N": "256",
    "gradcheck_tol": "1e-4",
    "variation_tol": "1e-5",
    "monotonicity_trials": "100000",
    "check_curves": "10",
    "workers": "1",
}
REQUIRED = ("lambda",)
KNOWN_KEYS = frozenset(DEFAULTS) | frozenset(REQUIRED)


def parse_key_values(text: str, source: str = "config") -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}", key=line)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key", key="")
        out[key] = value
    return out


def _as_float(raw, key):
    try:
        return float(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {raw[key]!r}", key=key) from exc


def _as_int(raw, key, minimum=None):
    try:
        value = int(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {raw[key]!r}", key=key) from exc
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}", key=key)
    return value


def _as_bool(raw, key):
    value = raw[key].lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be true or false, got {raw[key]!r}", key=key)


def parse_stages(text: str) -> tuple:
    """``"e1:d1,e2:d2"`` into ``((e1, d1), (e2, d2))``."""
    stages = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            eps, delta = (float(v) for v in item.split(":"))
        except ValueError as exc:
            raise ConfigError(f"stage {item!r} is not epsilon:delta", key="stages") from exc
        stages.append((eps, delta))
    return tuple(stages)


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: FlowParams
    N: int
    n: int
    horizon: float
    initial: str
    seed: int
    controls: FlowControls
    schedule: ContinuationSchedule | None
    output_dir: Path | None
    options: dict = field(default_factory=dict)


def build_config(command: str, raw: dict, output_dir=None) -> RunConfig:
    """Validate every entry of ``raw`` and assemble a :class:`RunConfig`."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}", key="command")
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}", key=unknown[0])
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}", key=key)
    values = {**DEFAULTS, **raw}
    params = FlowParams(
        p=_as_float(values, "p"), delta=_as_float(values, "delta"),
        epsilon=_as_float(values, "epsilon"), lam=_as_float(values, "lambda"),
    )
    N = _as_int(values, "N", 16)
    n = _as_int(values, "n", 2)
    horizon = _as_float(values, "horizon")
    if not horizon > 0:
        raise ConfigError(f"horizon must be > 0, got {horizon}", key="horizon")
    seed = _as_int(values, "seed", 0)
    if seed >= 2**64:
        raise ConfigError(f"seed must fit in 64 bits, got {seed}", key="seed")
    degenerate = _as_bool(values, "degenerate")
    controls = FlowControls(
        dt_initial=_as_float(values, "dt_initial"), dt_max=_as_float(values, "dt_max"),
        tol_stationary=_as_float(values, "tol_stationary"), tol_energy_rise=_as_float(values, "tol_energy_rise"),
        snapshot_stride=_as_int(values, "snapshot_stride", 1), max_steps=_as_int(values, "max_steps", 1),
        degenerate=degenerate, regularity_diagnostics=_as_bool(values, "regularity_diagnostics"),
    )
    if command in ("flow",) and params.degenerate and not degenerate:
        raise ConfigError("epsilon = 0 or delta = 0 needs degenerate=true (experimental)", key="degenerate")
    schedule = None
    if command == "continuation":
        schedule = ContinuationSchedule(parse_stages(values["stages"]), _as_float(values, "per_stage_time"),
                                        degenerate)
    options = {
        "regularity_cap": _as_float(values, "regularity_cap"),
        "interpolation_cap": _as_float(values, "interpolation_cap"),
        "gradcheck_curves": _as_int(values, "gradcheck_curves", 1),
        "gradcheck_fields": _as_int(values, "gradcheck_fields", 1),
        "gradcheck_N": _as_int(values, "gradcheck_N", 16),
        "gradcheck_tol": _as_float(values, "gradcheck_tol"),
        "variation_tol": _as_float(values, "variation_tol"),
        "monotonicity_trials": _as_int(values, "monotonicity_trials", 1),
        "check_curves": _as_int(values, "check_curves", 1),
        "workers": _as_int(values, "workers", 1),
    }
    return RunConfig(command, params, N, n, horizon, values["initial"], seed, controls, schedule,
                     Path(output_dir) if output_dir else None, options)


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
