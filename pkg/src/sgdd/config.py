"""Run configuration: a flat key = value format shared by every workflow.

Unknown keys are hard errors (silent typos corrupt studies); parsing and
serialization round-trip exactly.  Defaults follow the experimental setup
used throughout the studies: sigma 0.3, unit correlation lengths, 2nd
order input and 3rd order output chaos, fine:coarse ratio 4, outer
tolerance 1e-5 and Picard tolerance 1e-6.
"""

import math
from dataclasses import dataclass, fields

__all__ = ["RunConfig", "ConfigError", "parse_config", "serialize_config", "load_config"]

PROBLEMS = ("linear-stochastic", "nonlinear-stochastic",
            "linear-deterministic", "nonlinear-deterministic")
PRECONDITIONERS = ("ras1", "2glu", "2gv2", "2gv3")


class ConfigError(ValueError):
    """Bad configuration file or field value (usage error, exit code 2)."""


@dataclass
class RunConfig:
    problem: str = "linear-stochastic"
    mesh_n: int = 32
    M: int = 3
    p_in: int = 2
    p_out: int = 3
    sigma: float = 0.3
    bx: float = 1.0
    by: float = 1.0
    g0: float = 0.0
    nsub: int = 4
    overlap: int = 1
    preconditioner: str = "2gv3"
    coarse_ratio: int = 4
    tol_outer: float = 1e-5
    tol_coarse: float = None  # None = variant default (1e-2 for 2gv2, 1e-5 for 2gv3)
    tol_picard: float = 1e-6
    m_nonlin: int = 1
    nsamples: int = 40000
    seed: int = 0
    threads: int = 1
    output_dir: str = "out"

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigError(
                f"preconditioner must be one of {PRECONDITIONERS}, got {self.preconditioner!r}"
            )
        if self.mesh_n < 1:
            raise ConfigError(f"mesh_n must be positive, got {self.mesh_n}")
        if self.M < 1:
            raise ConfigError(f"M must be at least 1, got {self.M}")
        if self.p_in < 0 or self.p_out < 0:
            raise ConfigError(f"expansion orders must be non-negative, got {self.p_in}/{self.p_out}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")
        if self.bx <= 0 or self.by <= 0:
            raise ConfigError(f"correlation lengths must be positive, got {self.bx}/{self.by}")
        if self.nsub < 1:
            raise ConfigError(f"nsub must be positive, got {self.nsub}")
        if self.overlap < 1:
            raise ConfigError(f"overlap must be at least 1, got {self.overlap}")
        for name in ("tol_outer", "tol_picard"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ConfigError(f"{name} must be in (0,1), got {val}")
        if self.tol_coarse is not None and not 0.0 < self.tol_coarse < 1.0:
            raise ConfigError(f"tol_coarse must be in (0,1) or auto, got {self.tol_coarse}")
        if self.m_nonlin < 0:
            raise ConfigError(f"m_nonlin must be non-negative, got {self.m_nonlin}")
        if self.nsamples < 1:
            raise ConfigError(f"nsamples must be positive, got {self.nsamples}")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        if self.preconditioner != "ras1":
            r = math.isqrt(self.coarse_ratio)
            if r * r != self.coarse_ratio or r < 1:
                raise ConfigError(
                    f"coarse_ratio must be a perfect square (vertex ratio), got {self.coarse_ratio}"
                )
            if r > 1 and self.mesh_n % r:
                raise ConfigError(
                    f"mesh_n={self.mesh_n} is not divisible by the refinement factor {r}"
                )
        return self

    @property
    def refinement_factor(self):
        return math.isqrt(self.coarse_ratio)

    @property
    def is_nonlinear(self):
        return self.problem.startswith("nonlinear")

    @property
    def is_stochastic(self):
        return self.problem.endswith("stochastic")

    def coarse_tol(self, variant):
        if self.tol_coarse is not None:
            return self.tol_coarse
        return 1e-2 if variant == "v2" else 1e-5


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {k for k, t in _FIELD_TYPES.items() if t in (int, "int")}
_FLOAT_KEYS = {k for k, t in _FIELD_TYPES.items() if t in (float, "float")}


def _parse_value(key, raw):
    if key == "tol_coarse" and raw == "auto":
        return None
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS or key == "tol_coarse":
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from None
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse key = value lines ('#' comments allowed) into a validated config."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return RunConfig(**values).validate()


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        val = getattr(cfg, f.name)
        if f.name == "tol_coarse" and val is None:
            val = "auto"
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())
