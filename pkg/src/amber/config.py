"""Experiment configuration files.

Grammar, one entry per line::

    # comment
    key = value
    key = v1, v2, v3

Blank lines and text after ``#`` are ignored.  Keys are case-sensitive and
must be known; unknown keys are an error rather than silently ignored.
"""

import enum
from dataclasses import dataclass, fields

from .ber import QuadratureConfig, ReceiverKind
from .detection import DetectionStrategy
from .errors import InvalidParameterError
from .fading import FadingParams
from .simkit import AmbientModel, R2Threshold


class ConfigError(InvalidParameterError):
    """The configuration file cannot be parsed or fails validation."""


class Experiment(str, enum.Enum):
    PDF_COMPARE = "pdf_compare"
    BER_VS_N = "ber_vs_n"
    BER_VS_SNR = "ber_vs_snr"
    THRESHOLD_TABLE = "threshold_table"
    VALIDATE = "validate"


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    out = []
    for v in text.split(","):
        f = float(v)
        if f != int(f):
            raise ValueError(f"{v.strip()!r} is not an integer")
        out.append(int(f))
    return tuple(out)


def _names(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved settings of one experiment run."""

    experiment: Experiment
    n: tuple = (150,)
    snr_db: tuple = (0.0,)
    mu: tuple = (1.0,)
    nu: tuple = (1.625,)
    receiver: tuple = ("R1_CSI",)
    strategy: tuple = ("MT",)
    e_bar: float = 1.0
    sigma_h2: float = 1.0
    attenuation_db: float = 1.1
    attenuation_convention: str = "amplitude"
    ambient: str = "constant_envelope"
    seed: int = 1
    # pdf_compare
    n_windows: int = 1_000_000
    bins: int = 200
    # BER sweeps
    n_channels: int = 100_000
    mc_bits: int = 1_000_000
    mc_max_errors: int = 200
    coherence_bits: int = 1
    r2_coherence_bits: int = 16
    pilot_windows: int = 16
    r2_threshold: str = "pilot"
    # quadrature
    abs_tol: float = 1e-7
    rel_tol: float = 1e-4
    density: str = "integral"
    # validate
    sigmas: float = 3.0
    output: str = ""
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        grids = ("n", "snr_db", "mu", "nu", "receiver", "strategy")
        for name in grids:
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must not be empty")
        if any(n < 1 for n in self.n):
            raise ConfigError("n values must be positive integers")
        if any(v <= 0 for v in self.mu + self.nu):
            raise ConfigError("mu and nu fixtures must be positive")
        for name in ("abs_tol", "rel_tol", "sigmas", "e_bar", "sigma_h2"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("n_windows", "bins", "coherence_bits", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("n_channels", "mc_bits", "mc_max_errors"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.r2_coherence_bits < 2:
            raise ConfigError("r2_coherence_bits must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        try:
            for r in self.receiver:
                ReceiverKind.parse(r)
            for s in self.strategy:
                DetectionStrategy.parse(s)
            AmbientModel(self.ambient)
            R2Threshold(self.r2_threshold)
            self.fading_params()
            self.quadrature()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # derived objects

    def receivers(self):
        return tuple(ReceiverKind.parse(r) for r in self.receiver)

    def strategies(self):
        return tuple(DetectionStrategy.parse(s) for s in self.strategy)

    def fading_params(self):
        return FadingParams.from_attenuation(self.attenuation_db, self.attenuation_convention, self.sigma_h2)

    def quadrature(self):
        return QuadratureConfig(abs_tol=self.abs_tol, rel_tol=self.rel_tol, density=self.density)

    def resolved_items(self):
        """``(key, text)`` pairs of every setting, in declaration order.

        ``threads`` is left out: it never changes results, and leaving it out
        keeps output files byte-identical across thread counts.
        """
        out = []
        for f in fields(self):
            if f.name == "threads":
                continue
            value = getattr(self, f.name)
            if isinstance(value, enum.Enum):
                text = value.value
            elif isinstance(value, tuple):
                text = ", ".join(_fmt(v) for v in value)
            else:
                text = _fmt(value)
            out.append((f.name, text))
        return out


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_PARSERS = {
    "experiment": str.strip,
    "n": _ints,
    "snr_db": _floats,
    "mu": _floats,
    "nu": _floats,
    "receiver": _names,
    "strategy": _names,
    "e_bar": float,
    "sigma_h2": float,
    "attenuation_db": float,
    "attenuation_convention": str.strip,
    "ambient": str.strip,
    "seed": lambda v: _ints(v)[0],
    "n_windows": lambda v: _ints(v)[0],
    "bins": lambda v: _ints(v)[0],
    "n_channels": lambda v: _ints(v)[0],
    "mc_bits": lambda v: _ints(v)[0],
    "mc_max_errors": lambda v: _ints(v)[0],
    "coherence_bits": lambda v: _ints(v)[0],
    "r2_coherence_bits": lambda v: _ints(v)[0],
    "pilot_windows": lambda v: _ints(v)[0],
    "r2_threshold": str.strip,
    "abs_tol": float,
    "rel_tol": float,
    "density": str.strip,
    "sigmas": float,
    "output": str.strip,
    "threads": lambda v: _ints(v)[0],
}


def parse_text(text):
    """Parse config text into a ``{key: value}`` dict of typed values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return values


def load_config(path, experiment=None, **overrides):
    """Read ``path`` and build an :class:`ExperimentConfig`.

    ``experiment`` (from the command line) must agree with the file if the
    file names one.  ``overrides`` whose value is not ``None`` replace file
    values.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            values = parse_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if experiment is not None:
        named = values.get("experiment")
        if named is not None and named != experiment:
            raise ConfigError(f"config is for {named!r}, not {experiment!r}")
        values["experiment"] = experiment
    if "experiment" not in values:
        raise ConfigError("no experiment given")
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
