"""Experiment configuration: INI files with validated, documented defaults."""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .evolution import q_admissible
from .geometry import Window
from .spectral import MultiplierSpec, SymbolBoundError


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class MultiplierConfig:
    kind: str = "riesz"            # riesz | perturbed | table
    amplitude: float = 0.5         # perturbed: m = |k|^-1 (1 + amplitude exp(-decay |k|^2))
    decay: float = 1.0
    radii: tuple[float, ...] = ()  # table: |k| nodes
    values: tuple[float, ...] = ()  # table: m(|k|) at the nodes

    def build(self, name: str = "multiplier") -> MultiplierSpec:
        try:
            if self.kind == "riesz":
                return MultiplierSpec.riesz()
            if self.kind == "perturbed":
                return MultiplierSpec.perturbed(self.amplitude, self.decay)
            if self.kind == "table":
                if len(self.radii) != len(self.values) or not self.radii:
                    raise ConfigError(f"{name}.values", "table needs matching non-empty radii "
                                      "and values")
                return MultiplierSpec.from_table(self.radii, self.values)
        except (SymbolBoundError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(name, str(exc)) from exc
        raise ConfigError(f"{name}.kind", f"unknown multiplier {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    N: int = 128
    alpha: float = 0.75
    s: float = 1.5
    q: float = 4.0
    T: float = 0.5
    M: int = 500
    multiplier: MultiplierConfig = MultiplierConfig()
    compare_multiplier: MultiplierConfig = MultiplierConfig(kind="perturbed")
    window_center: tuple[float, float] = (0.0, 0.0)
    window_radius: float = 0.1
    epsilons: tuple[float, ...] = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    lambdas: tuple[float, ...] = (1e-2, 1e-4, 1e-6)
    runge_maxiter: int = 50
    probe_width: float = 0.05
    offset_radii: tuple[float, float] = (0.2, 0.4)
    offset_grid: tuple[int, int] = (8, 8)
    output_dir: str = "runs"
    rng_seed: int = 42

    def __post_init__(self):
        validate(self)

    @property
    def window(self) -> Window:
        return Window(self.window_center, self.window_radius)

    def with_overrides(self, **kw) -> ExperimentConfig:
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def validate(cfg: ExperimentConfig) -> None:
    """Raise ConfigError for parameters outside the model's hypotheses."""
    if int(cfg.N) != cfg.N or cfg.N % 2 or cfg.N < 16:
        raise ConfigError("N", f"must be an even integer >= 16, got {cfg.N}")
    if not 0.5 < cfg.alpha < 1.0:
        raise ConfigError("alpha", f"must lie in (1/2, 1), got {cfg.alpha}")
    if not cfg.q > 0 or not q_admissible(cfg.q, cfg.alpha):
        raise ConfigError("q", f"need 0 < 1/q <= alpha - 1/2 = {cfg.alpha - 0.5:g}, got q={cfg.q}")
    if not cfg.s + cfg.alpha > 2:
        raise ConfigError("s", f"need s + alpha > 2, got s={cfg.s}, alpha={cfg.alpha}")
    if not cfg.T > 0:
        raise ConfigError("T", f"must be positive, got {cfg.T}")
    if int(cfg.M) != cfg.M or cfg.M < 1:
        raise ConfigError("M", f"must be a positive integer, got {cfg.M}")
    try:
        Window(cfg.window_center, cfg.window_radius)
    except ValueError as exc:
        raise ConfigError("window", str(exc)) from exc
    eps = np.asarray(cfg.epsilons, float)
    if eps.size < 1 or np.any(eps <= 0) or np.any(eps >= 1) or np.any(np.diff(eps) >= 0):
        raise ConfigError("epsilons", "must be strictly decreasing values in (0, 1)")
    if len(cfg.lambdas) < 1 or any(not lam > 0 for lam in cfg.lambdas):
        raise ConfigError("lambdas", "regularisation weights must be positive")
    if cfg.runge_maxiter < 1:
        raise ConfigError("runge_maxiter", "must be at least 1")
    if not 0 < cfg.probe_width < 0.25:
        raise ConfigError("probe_width", f"must lie in (0, 1/4), got {cfg.probe_width}")
    r0, r1 = cfg.offset_radii
    if not 0 < r0 <= r1 < 0.5:
        raise ConfigError("offset_radii", "need 0 < r_min <= r_max < 1/2")
    if min(cfg.offset_grid) < 1:
        raise ConfigError("offset_grid", "needs at least one radius and one angle")
    if int(cfg.rng_seed) != cfg.rng_seed:
        raise ConfigError("rng_seed", "must be an integer")
    for name in ("multiplier", "compare_multiplier"):
        getattr(cfg, name).build(name)


# -----------------------------------------------------------------------------
# INI I/O


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _fmt(values) -> str:
    return ", ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)


_FIELDS = {
    # section, key -> (field, parser)
    ("grid", "N"): ("N", int),
    ("grid", "T"): ("T", float),
    ("grid", "M"): ("M", int),
    ("model", "alpha"): ("alpha", float),
    ("model", "s"): ("s", float),
    ("model", "q"): ("q", float),
    ("window", "center"): ("window_center", _floats),
    ("window", "radius"): ("window_radius", float),
    ("linearize", "epsilons"): ("epsilons", _floats),
    ("runge", "lambdas"): ("lambdas", _floats),
    ("runge", "maxiter"): ("runge_maxiter", int),
    ("reconstruct", "width"): ("probe_width", float),
    ("reconstruct", "offset_radii"): ("offset_radii", _floats),
    ("reconstruct", "offset_grid"): ("offset_grid", _ints),
    ("run", "output_dir"): ("output_dir", str),
    ("run", "seed"): ("rng_seed", int),
}

_MULT_KEYS = {"kind": str, "amplitude": float, "decay": float, "radii": _floats,
              "values": _floats}


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read an INI file (missing keys keep their defaults) and apply overrides."""
    kw: dict = {}
    if path is not None:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError("config", f"malformed file {path}: {exc}") from exc
        known_sections = {s for s, _ in _FIELDS} | {"multiplier", "compare_multiplier"}
        for section in cp.sections():
            if section not in known_sections:
                raise ConfigError(section, "unknown section")
            for key, raw in cp[section].items():
                if section in ("multiplier", "compare_multiplier"):
                    if key not in _MULT_KEYS:
                        raise ConfigError(f"{section}.{key}", "unknown key")
                    continue
                if (section, key) not in _FIELDS:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                name, parse = _FIELDS[(section, key)]
                try:
                    kw[name] = parse(raw)
                except ValueError as exc:
                    raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from exc
        for section in ("multiplier", "compare_multiplier"):
            if cp.has_section(section):
                mk = {}
                for key, raw in cp[section].items():
                    try:
                        mk[key] = _MULT_KEYS[key](raw)
                    except ValueError as exc:
                        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from exc
                base = getattr(ExperimentConfig, section, None) or MultiplierConfig()
                kw[section] = replace(base, **mk)
    for key in ("window_center", "offset_radii", "offset_grid"):
        if key in kw and len(kw[key]) != 2:
            raise ConfigError(key, "needs exactly two values")
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw)


def dump_config(cfg: ExperimentConfig, path) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    values = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    for (section, key), (name, _) in _FIELDS.items():
        v = values[name]
        if not cp.has_section(section):
            cp.add_section(section)
        cp[section][key] = _fmt(v) if isinstance(v, tuple) else str(v)
    for section in ("multiplier", "compare_multiplier"):
        m = values[section]
        cp[section] = {"kind": m.kind, "amplitude": repr(m.amplitude), "decay": repr(m.decay),
                       "radii": _fmt(m.radii), "values": _fmt(m.values)}
    with open(Path(path), "w") as fh:
        cp.write(fh)
