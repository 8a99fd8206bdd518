"""Pipeline configuration: defaults, key=value config files, flag overrides.

Config files are plain text, one `key = value` per line, `#` comments. Lists
are comma separated. CLI flags override file values; file values override the
defaults below.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

CONFIG_ENV_VAR = "DRIVESTYLE_CONFIG"


@dataclass
class PipelineConfig:
    input: str = ""  # recordings directory, glob, or *_recordingMeta.csv path
    output_dir: str = "out"
    min_frames: int = 25
    min_mean_speed: float = 0.5
    dv7_series: str = "full"
    exceedance_alpha: str = "dv2"
    scale: bool = True
    k_values: list[int] = field(default_factory=lambda: [2, 3])
    report_k: int | None = None  # defaults to the last entry of k_values
    seed: int = 0
    restarts: int = 16
    max_iter: int = 300
    tol: float = 1e-6
    elbow_kmin: int = 1
    elbow_kmax: int = 6
    style_map: str | None = None  # optional manual style map JSON
    radius: float = 10.0
    min_overlap_frames: int = 1
    formats: list[str] = field(default_factory=lambda: ["json", "csv"])
    threads: int = 1

    def __post_init__(self):
        if not self.k_values:
            raise ConfigError("k_values must not be empty")
        if any(k < 1 for k in self.k_values):
            raise ConfigError("k_values must be >= 1")
        if self.report_k is not None and self.report_k not in self.k_values:
            raise ConfigError(f"report_k {self.report_k} is not in k_values {self.k_values}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.tol < 0:
            raise ConfigError("tol must be >= 0")
        if not 1 <= self.elbow_kmin <= self.elbow_kmax:
            raise ConfigError("need 1 <= elbow_kmin <= elbow_kmax")
        if self.radius <= 0:
            raise ConfigError("radius must be > 0")
        if self.min_overlap_frames < 1:
            raise ConfigError("min_overlap_frames must be >= 1")
        if self.min_frames < 1:
            raise ConfigError("min_frames must be >= 1")
        if self.min_mean_speed < 0:
            raise ConfigError("min_mean_speed must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.dv7_series not in ("full", "positive"):
            raise ConfigError("dv7_series must be 'full' or 'positive'")
        if self.exceedance_alpha not in ("dv2", "subseries"):
            raise ConfigError("exceedance_alpha must be 'dv2' or 'subseries'")
        bad = [f for f in self.formats if f not in ("json", "csv")]
        if bad:
            raise ConfigError(f"unknown format(s) {bad}")
        if self.style_map and not Path(self.style_map).is_file():
            raise ConfigError(f"style map file not found: {self.style_map}")

    @property
    def effective_report_k(self) -> int:
        return self.report_k if self.report_k is not None else self.k_values[-1]

    def to_dict(self) -> dict:
        return {
            "input": self.input,
            "output_dir": self.output_dir,
            "min_frames": self.min_frames,
            "min_mean_speed": self.min_mean_speed,
            "dv7_series": self.dv7_series,
            "exceedance_alpha": self.exceedance_alpha,
            "scale": self.scale,
            "k_values": list(self.k_values),
            "report_k": self.effective_report_k,
            "seed": self.seed,
            "restarts": self.restarts,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "elbow_kmin": self.elbow_kmin,
            "elbow_kmax": self.elbow_kmax,
            "style_map": self.style_map,
            "radius": self.radius,
            "min_overlap_frames": self.min_overlap_frames,
            "formats": list(self.formats),
            "threads": self.threads,
        }


_BOOL_STRINGS = {"true": True, "1": True, "yes": True, "on": True,
                 "false": False, "0": False, "no": False, "off": False}


def _coerce(name: str, kind, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() not in _BOOL_STRINGS:
                raise ValueError(raw)
            return _BOOL_STRINGS[raw.lower()]
        if kind == "list_int":
            return [int(v) for v in raw.split(",") if v.strip()]
        if kind == "list_str":
            return [v.strip() for v in raw.split(",") if v.strip()]
        if kind == "opt_int":
            return None if raw.lower() in ("", "none") else int(raw)
        if kind == "opt_str":
            return None if raw.lower() in ("", "none") else raw
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: '{raw}'") from exc


_FIELD_KINDS = {
    "input": "str",
    "output_dir": "str",
    "min_frames": "int",
    "min_mean_speed": "float",
    "dv7_series": "str",
    "exceedance_alpha": "str",
    "scale": "bool",
    "k_values": "list_int",
    "report_k": "opt_int",
    "seed": "int",
    "restarts": "int",
    "max_iter": "int",
    "tol": "float",
    "elbow_kmin": "int",
    "elbow_kmax": "int",
    "style_map": "opt_str",
    "radius": "float",
    "min_overlap_frames": "int",
    "formats": "list_str",
    "threads": "int",
}


def parse_config_file(path) -> dict:
    """Read `key = value` lines; unknown keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values: dict = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_KINDS:
            raise ConfigError(f"{path}:{lineno}: unknown config key '{key}'")
        values[key] = value.strip()
    return values


def build_config(file_values: dict | None = None,
                 overrides: dict | None = None) -> PipelineConfig:
    """Merge defaults < config file < explicit overrides into a PipelineConfig."""
    merged = {}
    for name, raw in (file_values or {}).items():
        merged[name] = _coerce(name, _FIELD_KINDS[name], raw)
    for name, value in (overrides or {}).items():
        if value is None:
            continue
        if name not in _FIELD_KINDS:
            raise ConfigError(f"unknown config key '{name}'")
        merged[name] = _coerce(name, _FIELD_KINDS[name], value)
    known = {f.name for f in fields(PipelineConfig)}
    assert set(merged) <= known
    return PipelineConfig(**merged)
