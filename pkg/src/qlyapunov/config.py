"""Experiment configuration: TOML files, named presets and CLI overrides.

Schema (all tables optional when a preset supplies them)::

    preset = "twoqubit-ideal"

    [model]
    H0 = [[0, 0], [0, 1]]        # entries: number or [re, im]
    H1 = [[0, 1], [1, 0]]

    [target]                     # exactly one key
    diag = [0.35, 0.35, 0.15, 0.15]
    # ket = [1, 0, 0, 2]         # normalized automatically
    # rho = [[...], ...]
    # named = "bell"

    [experiment]
    samples = 50
    seed = 0
    jobs = 1

    [integrator]                 # fields of IntegratorOptions
    t_final = 300.0

    [output]
    dir = "results"
    gzip = false
    plot = false

    [thresholds]
    converged_fraction = 0.9
    flatlined_fraction = 0.6
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import IntegratorOptions
from .states import as_density, as_hamiltonian, bell_state, pure_state

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


class ConfigError(ValueError):
    """Bad configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _all_ones_offdiag(n):
    return (np.ones((n, n)) - np.eye(n)).astype(complex)


# name -> (H0, H1, default target, note)
PRESETS = {
    "example3-qutrit": (
        np.diag([-1.0, 0.0, 1.0]).astype(complex),
        _all_ones_offdiag(3),
        np.diag([1.0, 0.0, 0.0]).astype(complex),
        "three-level example: H1 fully connected, H0 equally spaced (not strongly regular)",
    ),
    "twoqubit-ising": (
        0.1 * np.kron(SIGMA_Z, SIGMA_Z),
        np.kron(SIGMA_X, I2) + 0.9 * np.kron(I2, SIGMA_X),
        bell_state(4),
        "Ising coupling with local x controls (not ideal)",
    ),
    "twoqubit-ideal": (
        np.diag([0.0, 1.0, 2.5, 4.1]).astype(complex),
        _all_ones_offdiag(4),
        np.diag([0.35, 0.35, 0.15, 0.15]).astype(complex),
        "artifact-chosen ideal four-level instance; ideality checked by `check`",
    ),
    "qutrit-ideal": (
        np.diag([0.0, 1.0, 2.5]).astype(complex),
        _all_ones_offdiag(3),
        np.diag([0.25, 0.25, 0.5]).astype(complex),
        "artifact-chosen ideal three-level instance",
    ),
}


@dataclass
class ExperimentConfig:
    h0: np.ndarray
    h1: np.ndarray
    rho_d0: np.ndarray
    preset: str | None = None
    samples: int = 50
    seed: int = 0
    jobs: int = 1
    integrator: IntegratorOptions = field(default_factory=IntegratorOptions)
    out_dir: Path = Path("results")
    gzip: bool = False
    plot: bool = False
    converged_fraction: float = 0.9
    flatlined_fraction: float = 0.6

    @property
    def n(self) -> int:
        return self.h0.shape[0]


def parse_complex(value, key: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError(key, "booleans are not matrix entries")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(key, f"expected a number or [re, im], got {value!r}")


def parse_matrix(value, key: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError(key, "expected a matrix as a list of rows")
    n = len(value)
    if any(len(r) != n for r in value):
        raise ConfigError(key, f"matrix must be square ({n} rows, row lengths {[len(r) for r in value]})")
    return np.array([[parse_complex(v, f"{key}[{i}][{j}]") for j, v in enumerate(row)]
                     for i, row in enumerate(value)])


def parse_vector(value, key: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(key, "expected a non-empty list")
    return np.array([parse_complex(v, f"{key}[{i}]") for i, v in enumerate(value)])


def parse_target(spec, key: str = "target") -> np.ndarray:
    """Target from a config table or a CLI string (``diag:..``, ``ket:..``, ``bell``)."""
    if isinstance(spec, str):
        kind, _, rest = spec.partition(":")
        kind = kind.strip().lower()
        if kind == "bell" and not rest:
            return bell_state(4)
        try:
            nums = [float(x) for x in rest.split(",")]
        except ValueError:
            raise ConfigError(key, f"cannot parse numbers in {spec!r}") from None
        if kind == "diag":
            spec = {"diag": nums}
        elif kind == "ket":
            spec = {"ket": nums}
        else:
            raise ConfigError(key, f"unknown target form {spec!r}; use diag:..., ket:... or bell")
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(key, "give exactly one of diag, ket, rho, named")
    (kind, value), = spec.items()
    try:
        if kind == "diag":
            rho = np.diag(parse_vector(value, f"{key}.diag"))
        elif kind == "ket":
            rho = pure_state(parse_vector(value, f"{key}.ket"))
        elif kind == "rho":
            rho = parse_matrix(value, f"{key}.rho")
        elif kind == "named":
            if value != "bell":
                raise ConfigError(f"{key}.named", f"unknown named state {value!r}")
            rho = bell_state(4)
        else:
            raise ConfigError(f"{key}.{kind}", "unknown target key")
        return as_density(rho, "target state")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{key}.{kind}", str(exc)) from None


def _expect(table, name, types, key):
    value = table[name]
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(key, f"expected {types[0].__name__}, got {value!r}")
    if not isinstance(value, types):
        raise ConfigError(key, f"expected {types[0].__name__}, got {value!r}")
    return value


_TOP_KEYS = {"preset", "model", "target", "experiment", "integrator", "output", "thresholds"}


def config_from_dict(data: dict) -> ExperimentConfig:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    preset = data.get("preset")
    h0 = h1 = rho_d = None
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        h0, h1, rho_d, _ = PRESETS[preset]
    model = data.get("model", {})
    for name in model:
        if name not in ("H0", "H1"):
            raise ConfigError(f"model.{name}", "unknown key (expected H0, H1)")
    if "H0" in model:
        h0 = parse_matrix(model["H0"], "model.H0")
    if "H1" in model:
        h1 = parse_matrix(model["H1"], "model.H1")
    if h0 is None or h1 is None:
        raise ConfigError("model", "H0 and H1 are required unless a preset is given")
    for key, m in (("model.H0", h0), ("model.H1", h1)):
        try:
            as_hamiltonian(m, key)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    if h0.shape != h1.shape:
        raise ConfigError("model.H1", f"shape {h1.shape} differs from H0 {h0.shape}")
    if "target" in data:
        rho_d = parse_target(data["target"])
    if rho_d is None:
        raise ConfigError("target", "a target state is required unless a preset is given")
    if rho_d.shape != h0.shape:
        raise ConfigError("target", f"shape {rho_d.shape} differs from H0 {h0.shape}")

    cfg = ExperimentConfig(h0=as_hamiltonian(h0), h1=as_hamiltonian(h1), rho_d0=rho_d, preset=preset)

    exp = data.get("experiment", {})
    for name in exp:
        if name not in ("samples", "seed", "jobs"):
            raise ConfigError(f"experiment.{name}", "unknown key")
        setattr(cfg, name, _expect(exp, name, (int,), f"experiment.{name}"))
    if cfg.samples < 1:
        raise ConfigError("experiment.samples", "must be positive")

    integ = data.get("integrator", {})
    fields = {f.name: f for f in dataclasses.fields(IntegratorOptions)}
    kwargs = {}
    for name, value in integ.items():
        if name not in fields:
            raise ConfigError(f"integrator.{name}", "unknown key")
        default = getattr(IntegratorOptions(), name)
        if isinstance(default, bool):
            kwargs[name] = _expect(integ, name, (bool,), f"integrator.{name}")
        elif isinstance(default, (int, float)) and not isinstance(default, bool):
            types = (int,) if isinstance(default, int) else (float, int)
            kwargs[name] = _expect(integ, name, types, f"integrator.{name}")
        else:
            kwargs[name] = _expect(integ, name, (str,), f"integrator.{name}")
    cfg.integrator = IntegratorOptions(**kwargs)

    out = data.get("output", {})
    for name in out:
        if name == "dir":
            cfg.out_dir = Path(_expect(out, name, (str,), "output.dir"))
        elif name in ("gzip", "plot"):
            setattr(cfg, name, _expect(out, name, (bool,), f"output.{name}"))
        else:
            raise ConfigError(f"output.{name}", "unknown key")

    thr = data.get("thresholds", {})
    for name in thr:
        if name not in ("converged_fraction", "flatlined_fraction"):
            raise ConfigError(f"thresholds.{name}", "unknown key")
        setattr(cfg, name, float(_expect(thr, name, (float, int), f"thresholds.{name}")))
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"TOML syntax error: {exc}") from None
    return config_from_dict(data)
