"""Scenario configuration files.

The format is sectioned ``key = value`` text::

    # comment
    [chain]
    epsilon = 0.1
    [run]
    variant = Exact
    [sweep]
    parameter = epsilon
    values = 0.1, 0.01, 0.001

Unknown sections or keys are errors. Omitted values take the defaults of
``ChainSpec`` and of the dataclasses below.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .chain import ChainSpec
from .collision import Variant
from .errors import InvalidSpec, ParseError, ValidationError
from .quadrature import QuadratureConfig

CONFIG_FORMAT_VERSION = 1
SWEEP_PARAMETERS = ("epsilon", "sigma_p", "gamma")


@dataclass(frozen=True)
class TimeGrid:
    kind: str = "log"
    t_min: float = 0.1
    t_max: float = 1e6
    points: int = 121

    def times(self) -> np.ndarray:
        if self.kind == "log":
            return np.logspace(np.log10(self.t_min), np.log10(self.t_max), self.points)
        return np.linspace(self.t_min, self.t_max, self.points)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    emit_plots: bool = False
    coherences: tuple = ((2, 3),)


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class ScenarioConfig:
    chain: ChainSpec = field(default_factory=ChainSpec)
    variant: Variant = Variant.EXACT
    initial_state: str = "ground"
    method: str = "spectral"
    time_grid: TimeGrid = field(default_factory=TimeGrid)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    sweep: Sweep | None = None

    def with_parameter(self, name: str, value: float) -> "ScenarioConfig":
        if name not in SWEEP_PARAMETERS:
            raise ValidationError(f"cannot sweep {name!r}")
        return dataclasses.replace(self, chain=self.chain.replace(**{name: value}), sweep=None)

    def echo(self) -> dict:
        """Flat ``section.key -> value`` view, used in manifests."""
        out = {f"chain.{k}": v for k, v in dataclasses.asdict(self.chain).items()}
        out.update(
            {
                "run.variant": self.variant.value,
                "run.initial_state": self.initial_state,
                "run.method": self.method,
            }
        )
        out.update({f"time.{k}": v for k, v in dataclasses.asdict(self.time_grid).items()})
        q = self.quadrature
        out.update({"quadrature.panels": q.panels, "quadrature.nodes": q.nodes, "quadrature.W": q.W, "quadrature.tol_quad": q.tol_quad})
        out["outputs.directory"] = self.outputs.directory
        out["outputs.emit_plots"] = self.outputs.emit_plots
        out["outputs.coherences"] = ", ".join(f"{j}-{k}" for j, k in self.outputs.coherences)
        if self.sweep is not None:
            out["sweep.parameter"] = self.sweep.parameter
            out["sweep.values"] = ", ".join(repr(v) for v in self.sweep.values)
        return out


def _float(text):
    return float(text)


def _int(text):
    val = float(text)
    if val != int(val):
        raise ValueError(f"{text!r} is not an integer")
    return int(val)


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _pairs(text):
    out = []
    for item in text.replace(",", " ").split():
        j, _, k = item.replace("rho_", "").partition("-")
        out.append((int(j), int(k)))
    return tuple(out)


SCHEMA = {
    "chain": {
        "n_qubits": _int,
        "h": _float,
        "epsilon": _float,
        "g": _float,
        "mass": _float,
        "beta": _float,
        "sigma_p": _float,
        "gamma": _float,
    },
    "run": {"variant": str, "initial_state": str, "method": str},
    "time": {"kind": str, "t_min": _float, "t_max": _float, "points": _int},
    "quadrature": {"panels": _int, "nodes": _int, "W": _float, "tol_quad": _float},
    "outputs": {"directory": str, "emit_plots": _bool, "coherences": _pairs},
    "sweep": {"parameter": str, "values": _floats},
}


def parse_text(text: str) -> ScenarioConfig:
    values: dict = {name: {} for name in SCHEMA}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("unterminated section header", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ParseError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise ParseError("key outside of a section", lineno)
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in SCHEMA[section]:
            raise ParseError(f"unknown key {key!r} in [{section}]", lineno)
        if key in values[section]:
            raise ParseError(f"duplicate key {key!r} in [{section}]", lineno)
        try:
            values[section][key] = SCHEMA[section][key](val)
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}", lineno) from None
    return _build(values)


def _build(values: dict) -> ScenarioConfig:
    try:
        chain = ChainSpec(**values["chain"])
    except InvalidSpec as exc:
        raise ValidationError(str(exc)) from None

    run = values["run"]
    try:
        variant = Variant.parse(run.get("variant", "Exact"))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    method = run.get("method", "spectral").lower()
    if method not in ("spectral", "rk4"):
        raise ValidationError(f"method must be spectral or rk4, got {method!r}")

    grid = TimeGrid(**values["time"])
    if grid.kind not in ("log", "linear"):
        raise ValidationError("time.kind must be log or linear")
    if not grid.t_min < grid.t_max:
        raise ValidationError("time grid needs t_min < t_max")
    if grid.points < 2:
        raise ValidationError("time grid needs points >= 2")
    if grid.kind == "log" and grid.t_min <= 0:
        raise ValidationError("log time grid needs t_min > 0")
    if grid.t_min < 0:
        raise ValidationError("times must be >= 0")

    try:
        quad = QuadratureConfig(**values["quadrature"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    outputs = OutputConfig(**values["outputs"])
    d = chain.dim
    for j, k in outputs.coherences:
        if max(j, k) >= d or min(j, k) < 0:
            raise ValidationError(f"coherence {j}-{k} outside dimension {d}")

    sweep = None
    if values["sweep"]:
        sw = values["sweep"]
        if "parameter" not in sw or "values" not in sw:
            raise ValidationError("sweep needs both parameter and values")
        if sw["parameter"] not in SWEEP_PARAMETERS:
            raise ValidationError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
        if not sw["values"]:
            raise ValidationError("sweep values must be nonempty")
        sweep = Sweep(sw["parameter"], sw["values"])
        for v in sweep.values:
            try:
                chain.replace(**{sweep.parameter: v})
            except InvalidSpec as exc:
                raise ValidationError(f"sweep value {v}: {exc}") from None

    return ScenarioConfig(
        chain=chain,
        variant=variant,
        initial_state=run.get("initial_state", "ground"),
        method=method,
        time_grid=grid,
        quadrature=quad,
        outputs=outputs,
        sweep=sweep,
    )


def parse_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_text(fh.read())


def default_config() -> ScenarioConfig:
    return parse_text("")
