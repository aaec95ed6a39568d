"""Run configuration: built-in defaults, an optional JSON defaults file, CLI overrides.

Precedence is CLI flag > defaults file > built-in default. The defaults file is
``.robust-consensus.json`` in the working directory, or the path given by ``--config``.
"""

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from robust_consensus.consensus import METHODS
from robust_consensus.errors import ConfigError
from robust_consensus.lp_core import BACKENDS
from robust_consensus.residuals import Norm

DEFAULTS_FILENAME = ".robust-consensus.json"

COMMANDS = ("synth", "sfm", "oracle")
SYNTH_METHODS = (*METHODS, "ransac")
ORACLE_METHODS = (*SYNTH_METHODS, "exact")

# Keys a defaults file may set, with the JSON types accepted for each.
_EXPECTED_TYPES: dict[str, tuple[type, ...]] = {
    "methods": (list, str),
    "delta": (int, float),
    "q": (list, int, float),
    "epsilon": (int, float),
    "K": (int,),
    "d_min": (int, float),
    "d_max": (int, float),
    "norm": (str,),
    "seed": (int,),
    "backend": (str,),
    "ratios": (list, int, float),
    "repeats": (int,),
    "measurements": (int,),
    "dim": (int,),
    "inlier_sigma": (int, float),
    "outlier_sigma": (int, float),
}


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of one command invocation."""

    command: str
    methods: tuple[str, ...] = ("alg1",)
    delta: float | None = None
    q_values: tuple[float, ...] = (0.1,)
    epsilon: float = 1e-3
    K: int = 2
    K_sweep: tuple[int, ...] | None = None
    d_min: float = 0.01
    d_max: float = 1e4
    norm: str = "l1"
    seed: int = 0
    backend: str = "highs"
    ratios: tuple[float, ...] = (0.5,)
    repeats: int = 1
    measurements: int = 500
    dim: int = 8
    inlier_sigma: float = 0.1
    outlier_sigma: float = 1.0
    cameras_path: Path | None = None
    observations_path: Path | None = None
    out: Path | None = None

    @property
    def method(self) -> str:
        return self.methods[0]

    @property
    def q(self) -> float:
        return self.q_values[0]

    @property
    def norm_p(self) -> Norm:
        return Norm(self.norm)

    def validate(self) -> "RunConfig":
        """Raise ConfigError naming the first invalid field; returns self when valid."""
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command '{self.command}'")
        allowed = {"sfm": METHODS, "synth": SYNTH_METHODS}.get(self.command, ORACLE_METHODS)
        if not self.methods:
            raise ConfigError("method", "at least one method is required")
        for method in self.methods:
            if method not in allowed:
                raise ConfigError("method", f"'{method}' is not one of {', '.join(allowed)}")
        if self.delta is None:
            raise ConfigError("delta", "an inlier threshold is required (--delta)")
        if not self.delta > 0:
            raise ConfigError("delta", f"must be > 0, got {self.delta}")
        if not self.q_values or any(not 0 < q < 1 for q in self.q_values):
            raise ConfigError("q", f"every q must lie in (0, 1), got {list(self.q_values)}")
        if self.command != "synth" and len(self.q_values) != 1:
            raise ConfigError("q", "a single q value is expected")
        if not self.epsilon > 0:
            raise ConfigError("epsilon", f"must be > 0, got {self.epsilon}")
        if self.K < 1:
            raise ConfigError("K", f"must be >= 1, got {self.K}")
        if self.K_sweep is not None and (not self.K_sweep or min(self.K_sweep) < 1):
            raise ConfigError("sweep-k", "iteration counts must be >= 1")
        if not 0 < self.d_min < self.d_max:
            raise ConfigError("dmin", f"need 0 < dmin < dmax, got ({self.d_min}, {self.d_max})")
        if self.norm not in {n.value for n in Norm}:
            raise ConfigError("norm", f"'{self.norm}' is not one of l1, linf")
        if self.backend not in BACKENDS:
            raise ConfigError("backend", f"'{self.backend}' is not one of {', '.join(BACKENDS)}")
        if not self.ratios or any(not 0 <= r < 1 for r in self.ratios):
            raise ConfigError("ratio", f"outlier ratio must lie in [0, 1), got {list(self.ratios)}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be >= 0, got {self.seed}")
        if self.repeats < 1:
            raise ConfigError("repeats", f"must be >= 1, got {self.repeats}")
        if self.dim < 1 or self.measurements <= self.dim:
            msg = f"need measurements > dim >= 1, got ({self.measurements}, {self.dim})"
            raise ConfigError("measurements", msg)
        if self.inlier_sigma < 0 or self.outlier_sigma < 0:
            raise ConfigError("sigma", "noise levels must be >= 0")
        return self

    def as_dict(self) -> dict:
        """JSON-friendly view, echoed in reports for provenance."""
        data = dataclasses.asdict(self)
        for key, value in data.items():
            if isinstance(value, Path):
                data[key] = str(value)
            elif isinstance(value, tuple):
                data[key] = list(value)
        return data


def _validate_defaults(data, source: Path) -> dict:
    if not isinstance(data, dict):
        raise ConfigError("config", f"expected a JSON object in {source}")
    validated = {}
    for key, value in data.items():
        expected = _EXPECTED_TYPES.get(key)
        if expected is None:
            raise ConfigError(key, f"unknown key in {source}")
        if isinstance(value, bool) or not isinstance(value, expected):
            raise ConfigError(key, f"unexpected type {type(value).__name__} in {source}")
        validated[key] = value
    return validated


def load_defaults(path: Path | None = None, cwd: Path | None = None) -> dict:
    """Read the defaults file; an explicit path must exist, the implicit one may not."""
    if path is None:
        path = (cwd or Path.cwd()) / DEFAULTS_FILENAME
        if not path.is_file():
            return {}
    elif not path.is_file():
        raise ConfigError("config", f"defaults file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, ValueError) as exc:
        raise ConfigError("config", f"malformed JSON in {path} ({exc})") from exc
    return _validate_defaults(data, path)


def _as_tuple(value, cast) -> tuple:
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    elif not isinstance(value, list | tuple):
        value = [value]
    return tuple(cast(part.strip() if isinstance(part, str) else part) for part in value)


def parse_list(field: str, value, cast=float) -> tuple:
    """Comma-separated string (or JSON list) to a tuple, naming ``field`` on failure."""
    try:
        return _as_tuple(value, cast)
    except (TypeError, ValueError) as exc:
        raise ConfigError(field, f"cannot parse '{value}'") from exc


def parse_range(field: str, value: str) -> tuple[int, ...]:
    """``"1..10"`` (inclusive) or ``"1,2,5"`` to a tuple of ints."""
    if ".." in value:
        low, _, high = value.partition("..")
        try:
            start, stop = int(low), int(high)
        except ValueError as exc:
            raise ConfigError(field, f"cannot parse range '{value}'") from exc
        if stop < start:
            raise ConfigError(field, f"empty range '{value}'")
        return tuple(range(start, stop + 1))
    return parse_list(field, value, int)


# Built-in defaults that differ by command; the defaults file and CLI override them.
COMMAND_DEFAULTS: dict[str, dict] = {
    "oracle": {
        "methods": ("alg1", "alg2", "l1full", "linf", "ransac"),
        "measurements": 10,
        "dim": 2,
        "ratios": (0.2,),
        "repeats": 50,
    },
}

# Defaults-file key -> (RunConfig field, converter)
_FIELD_MAP = {
    "methods": ("methods", lambda v: parse_list("method", v, str)),
    "delta": ("delta", float),
    "q": ("q_values", lambda v: parse_list("q", v)),
    "epsilon": ("epsilon", float),
    "K": ("K", int),
    "d_min": ("d_min", float),
    "d_max": ("d_max", float),
    "norm": ("norm", str),
    "seed": ("seed", int),
    "backend": ("backend", str),
    "ratios": ("ratios", lambda v: parse_list("ratio", v)),
    "repeats": ("repeats", int),
    "measurements": ("measurements", int),
    "dim": ("dim", int),
    "inlier_sigma": ("inlier_sigma", float),
    "outlier_sigma": ("outlier_sigma", float),
}


def resolve_config(command: str, overrides: dict, defaults: dict | None = None) -> RunConfig:
    """Merge built-ins, the defaults file and CLI overrides (None means "not given")."""
    values: dict = dict(COMMAND_DEFAULTS.get(command, {}))
    for key, raw in (defaults or {}).items():
        field_name, convert = _FIELD_MAP[key]
        values[field_name] = convert(raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(command=command, **values).validate()


def derive_seed(base_seed: int, *keys: int) -> int:
    """Deterministic child seed for (base_seed, keys...), independent across keys."""
    sequence = np.random.SeedSequence([int(base_seed), *(int(k) for k in keys)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
