"""Sectioned key-value configuration with typed defaults.

A config file is INI-style. Only the sections of the chosen subcommand plus
``[array]`` are read; unknown sections or keys are errors. Command-line
``--set section.key=value`` overrides have the highest precedence.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from ..errors import ConfigError


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return text.strip()


PARSERS: dict[type | str, Callable[[str], Any]] = {
    int: int, float: float, bool: _bool, str: _str, "floats": _floats, "ints": _ints,
}

ARRAY = {"n_bs": (int, 64), "n_sc": (int, 2048), "bandwidth_hz": (float, 1e9), "carrier_hz": (float, 60e9)}

SCHEMA: dict[str, dict[str, dict[str, tuple[Any, Any]]]] = {
    "gain": {
        "gain": {
            "subcarriers": ("ints", (0, 256, 512, 768, 1024, 1280, 1536, 1792)),
            "theta_points": (int, 2049),
            "zeta_points": (int, 21),
            "k_max": (int, 32),
        },
    },
    "collision": {
        "collision": {
            "users": (int, 400),
            "n_rb": (int, 1024),
            "trials": (int, 10_000),
            "uc_users": ("ints", (100, 200, 400, 800, 1024, 2048, 4096)),
            "uc_trials": (int, 200),
        },
    },
    "plr": {
        "plr": {
            "n_rb_total": (int, 1024),
            "k_rb": (int, 32),
            "grouping": (int, 1),
            "users": ("ints", (2, 5, 10, 20)),
            "n_max": (int, 0),
            "trials": (int, 20_000),
        },
    },
    "sync": {
        "sync": {
            "snr_min_db": (float, -30.0),
            "snr_max_db": (float, -4.0),
            "snr_step_db": (float, 1.0),
            "band_sizes": ("ints", (8, 16, 32)),
            "n_symbols": (int, 22),
            "n_paths": (int, 1),
            "trials": (int, 10_000),
            "preamble_seed": (int, 0),
        },
    },
    "sim": {
        "sim": {
            "pool_size": (int, 1000),
            "activation_prob": ("floats", (0.03,)),
            "grouping": (int, 2),
            "k_rb": (int, 0),
            "n_rep": (int, 0),
            "decode_mode": (str, "collision"),
            "sync_model": (str, "ideal"),
            "sync_table": (str, ""),
            "phased_beams": (int, 64),
            "phased_sectors_per_frame": (int, 8),
            "radius_m": (float, 400.0),
            "n_frames": (int, 2000),
            "warmup_frames": (int, 50),
            "drain_frames": (int, 64),
        },
    },
    "backoff": {
        "backoff": {
            "users_per_rb": ("floats", (0.25, 0.5, 1.0, 2.0, 4.0)),
            "n_rb": (int, 1024),
            "half_window": (int, 16),
            "payload_slots": (int, 1),
            "trials": (int, 100),
            "max_rounds": (int, 10_000),
        },
    },
}


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


@dataclass
class ExperimentConfig:
    """Resolved configuration of one CLI run."""

    command: str
    sections: dict[str, dict[str, Any]]
    master_seed: int = 0
    output_path: Path = Path(".")
    worker_count: int = 1
    source: str = "<defaults>"
    _lines: dict[tuple[str, str], int] = field(default_factory=dict, repr=False)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.sections[section]

    def where(self, section: str, key: str) -> str:
        line = self._lines.get((section, key))
        loc = f"{self.source}:{line}" if line else self.source
        return f"{loc}: [{section}] {key}"

    def dump(self) -> str:
        """Effective configuration as INI text, reloadable by :func:`load_config`."""
        cp = configparser.ConfigParser(interpolation=None)
        cp["run"] = {"seed": str(self.master_seed), "workers": str(self.worker_count)}
        for sec, values in self.sections.items():
            cp[sec] = {k: _format(v) for k, v in values.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _schema_for(command: str) -> dict[str, dict[str, tuple[Any, Any]]]:
    if command not in SCHEMA:
        raise ConfigError(f"unknown subcommand {command!r}")
    return {"array": ARRAY, **SCHEMA[command]}


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    out: dict[tuple[str, str], int] = {}
    section = ""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip()
            out[(section, "")] = i
            continue
        m = re.match(r"^([^=:#;]+?)\s*[=:]", line)
        if m and section:
            out[(section, m.group(1).strip().lower())] = i
    return out


def load_config(
    command: str,
    path: str | Path | None = None,
    overrides: list[str] | None = None,
    seed: int | None = None,
    out: str | Path | None = None,
    workers: int | None = None,
) -> ExperimentConfig:
    """Merge defaults, an optional file and overrides, then validate types."""
    schema = _schema_for(command)
    raw: dict[str, dict[str, str]] = {}
    lines: dict[tuple[str, str], int] = {}
    source = "<defaults>"
    file_seed = file_workers = None
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        lines = _line_numbers(text)
        for sec in cp.sections():
            if sec == "run":
                for k, v in cp[sec].items():
                    if k == "seed":
                        file_seed = _parse_int(v, f"{source}:{lines.get((sec, k), '?')}: [run] seed")
                    elif k == "workers":
                        file_workers = _parse_int(v, f"{source}:{lines.get((sec, k), '?')}: [run] workers")
                    else:
                        raise ConfigError(f"{source}:{lines.get((sec, k), '?')}: unknown key [run] {k}")
                continue
            if sec not in schema:
                raise ConfigError(f"{source}:{lines.get((sec, ''), '?')}: section [{sec}] not used by '{command}'")
            raw.setdefault(sec, {}).update(cp[sec])
    for item in overrides or []:
        m = re.match(r"^([A-Za-z_]\w*)\.([A-Za-z_]\w*)=(.*)$", item)
        if not m:
            raise ConfigError(f"override {item!r} is not section.key=value")
        sec, key, value = m.group(1), m.group(2).lower(), m.group(3)
        if sec == "run" and key in ("seed", "workers"):
            if key == "seed":
                file_seed = _parse_int(value, f"--set {item}")
            else:
                file_workers = _parse_int(value, f"--set {item}")
            continue
        if sec not in schema:
            raise ConfigError(f"--set {item}: section [{sec}] not used by '{command}'")
        raw.setdefault(sec, {})[key] = value
        lines.pop((sec, key), None)
    cfg = ExperimentConfig(
        command=command,
        sections={},
        master_seed=seed if seed is not None else (file_seed if file_seed is not None else 0),
        output_path=Path(out) if out is not None else Path("."),
        worker_count=workers if workers is not None else (file_workers if file_workers is not None else 1),
        source=source,
        _lines=lines,
    )
    for sec, keys in schema.items():
        values = {}
        given = raw.get(sec, {})
        for key in given:
            if key not in keys:
                raise ConfigError(f"{cfg.where(sec, key)}: unknown key")
        for key, (kind, default) in keys.items():
            if key in given:
                try:
                    values[key] = PARSERS[kind](given[key])
                except ValueError as exc:
                    raise ConfigError(f"{cfg.where(sec, key)}: {exc}") from exc
            else:
                values[key] = default
        cfg.sections[sec] = values
    if cfg.worker_count < 1:
        raise ConfigError("workers must be at least 1")
    return cfg


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
