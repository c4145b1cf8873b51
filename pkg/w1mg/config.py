"""Configuration loading and validation."""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import yaml

from .solvers.base import DEFAULT_GAP_TOLERANCE

DEFAULT_CONFIG_NAME = "w1mg.yaml"
THREADS_ENV = "W1MG_THREADS"


class ConfigError(Exception):
    """Raised when configuration is invalid."""
    pass


def _threads_from_env() -> int:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return 1
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {value!r}")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1, got {threads}")
    return threads


@dataclass
class SolverConfig:
    p: str = "1"
    algo: str = "ml-pdhg"
    levels: Union[int, str] = "auto"
    alpha: float = -1.0
    tol: Union[float, str] = "auto"
    max_iters: int = 100_000
    safe_steps: bool = False
    gap: Union[float, str] = DEFAULT_GAP_TOLERANCE


@dataclass
class BenchConfig:
    threads: int = field(default_factory=_threads_from_env)


@dataclass
class OutputConfig:
    json_indent: int = 2
    digits: int = 17


@dataclass
class Config:
    solver: SolverConfig = field(default_factory=SolverConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


def _auto_or(value, kind, name):
    if value is None or str(value).lower() == "auto":
        return "auto"
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"solver.{name} must be a number or 'auto', got {value!r}")


def _gap_or_off(value):
    # YAML reads a bare `off` as False
    if value is None or value is False or str(value).lower() == "off":
        return "off"
    try:
        gap = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"solver.gap must be a number or 'off', got {value!r}")
    if not gap > 0:
        raise ConfigError(f"solver.gap must be positive, got {gap}")
    return gap


def _validate(config: Config) -> Config:
    solver = config.solver
    solver.p = str(solver.p).lower()
    if solver.p not in ("1", "2", "inf"):
        raise ConfigError(f"solver.p must be 1, 2 or inf, got {solver.p!r}")
    if solver.algo not in ("cp", "pdhg", "ml-cp", "ml-pdhg"):
        raise ConfigError(f"solver.algo must be cp, pdhg, ml-cp or ml-pdhg, got {solver.algo!r}")
    solver.levels = _auto_or(solver.levels, int, "levels")
    solver.tol = _auto_or(solver.tol, float, "tol")
    solver.gap = _gap_or_off(solver.gap)
    if solver.levels != "auto" and solver.levels < 1:
        raise ConfigError(f"solver.levels must be at least 1, got {solver.levels}")
    if solver.tol != "auto" and not solver.tol > 0:
        raise ConfigError(f"solver.tol must be positive, got {solver.tol}")
    if int(solver.max_iters) < 1:
        raise ConfigError(f"solver.max_iters must be at least 1, got {solver.max_iters}")
    if int(config.bench.threads) < 1:
        raise ConfigError(f"bench.threads must be at least 1, got {config.bench.threads}")
    return config


def load_config(path: Path) -> Config:
    """Load configuration from YAML file."""
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")

    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML: {e}")

    if not isinstance(data, dict):
        raise ConfigError(f"Config file must hold a mapping, got {type(data).__name__}")

    try:
        config = _from_mapping(data)
    except (AttributeError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid config value: {e}")
    return _validate(config)


def _from_mapping(data: dict) -> Config:
    config = Config()

    if "solver" in data:
        section = data["solver"] or {}
        config.solver = SolverConfig(
            p=section.get("p", config.solver.p),
            algo=section.get("algo", config.solver.algo),
            levels=section.get("levels", config.solver.levels),
            alpha=float(section.get("alpha", config.solver.alpha)),
            tol=section.get("tol", config.solver.tol),
            max_iters=int(section.get("max_iters", config.solver.max_iters)),
            safe_steps=bool(section.get("safe_steps", config.solver.safe_steps)),
            gap=section.get("gap", config.solver.gap),
        )

    if "bench" in data:
        section = data["bench"] or {}
        # the environment caps what the file asks for
        threads = int(section.get("threads", config.bench.threads))
        if os.environ.get(THREADS_ENV):
            threads = min(threads, _threads_from_env())
        config.bench = BenchConfig(threads=threads)

    if "output" in data:
        section = data["output"] or {}
        config.output = OutputConfig(
            json_indent=int(section.get("json_indent", config.output.json_indent)),
            digits=int(section.get("digits", config.output.digits)),
        )

    return config


def resolve_config(path: Optional[Path]) -> Config:
    """Explicit path must exist; otherwise use ./w1mg.yaml when present, else defaults."""
    if path is not None:
        return load_config(Path(path))
    default = Path(DEFAULT_CONFIG_NAME)
    if default.exists():
        return load_config(default)
    return Config()


def create_default_config(path: Path):
    """Create a default configuration file."""
    default_yaml = """\
# w1mg configuration

# Solver defaults (command-line flags take precedence)
solver:
  p: 1              # Ground metric: 1, 2 or inf
  algo: ml-pdhg     # Options: cp, pdhg, ml-cp, ml-pdhg
  levels: auto      # Multilevel depth; auto = log2(N) - 3
  alpha: -1.0       # eps_l = eps_L * (h_l / h_L)^alpha
  tol: auto         # Finest-level tolerance; auto scales with h^2 (h^3 for cp)
  max_iters: 100000
  safe_steps: false # Use the provably convergent half step sizes
  gap: 5.0e-5       # Certified relative gap on the finest level; off = residual only

# Benchmark sweeps
bench:
  threads: 1        # Worker threads; W1MG_THREADS caps this

# Result files
output:
  json_indent: 2
  digits: 17        # Significant digits in CSV exports
"""
    path.write_text(default_yaml)
