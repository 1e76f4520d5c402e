"""Experiment configuration: a YAML file validated by pydantic models.

Validation errors are reported with the YAML line of the offending field.
Random families draw from generators seeded by ``(seed, name)`` so adding or
reordering entries never changes the draws of the others.
"""
from __future__ import annotations

import hashlib
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .charclass import InvariantPolynomial, PolynomialError, pontryagin
from .fields import GridManifold, build_grid
from .geometry import (
    AffinePerturbedDiffeo,
    ConformalMetric,
    Diffeomorphism,
    FourierMetric,
    MetricField,
    isotopy_flow,
    random_fourier_metric,
    random_perturbation,
    random_vector_field,
)


class ConfigError(ValueError):
    pass


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Model):
    dim: int = 3
    period: float = Field(1.0, gt=0)


class MetricSpec(_Model):
    family: Literal["flat", "random-fourier", "conformal", "fourier"]
    amplitude: float = Field(0.06, ge=0)
    modes: int = Field(3, ge=1)
    kmax: int = Field(1, ge=1)
    terms: Optional[list[dict[str, Any]]] = None

    @model_validator(mode="after")
    def _terms_needed(self):
        if self.family in ("conformal", "fourier") and not self.terms:
            raise ValueError(f"family {self.family!r} needs explicit terms")
        return self


class PerturbationSpec(_Model):
    modes: int = Field(2, ge=1)
    amplitude: float = Field(0.004, ge=0)


class FlowSpec(_Model):
    amplitude: float = Field(gt=0)
    time: float = Field(1.0, ge=0, le=1)
    modes: int = Field(2, ge=1)
    nodes: int = Field(16, ge=8)


class DiffeoSpec(_Model):
    linear: Optional[list[list[int]]] = None
    shift: Optional[list[float]] = None
    perturbation: Optional[PerturbationSpec] = None
    compose: Optional[list[str]] = None
    flow: Optional[FlowSpec] = None

    @model_validator(mode="after")
    def _one_kind(self):
        kinds = [self.linear is not None, self.compose is not None, self.flow is not None]
        if sum(kinds) != 1:
            raise ValueError("give exactly one of 'linear', 'compose' or 'flow'")
        return self


class PolynomialSpec(_Model):
    kind: Literal["pontryagin", "trace"] = "pontryagin"
    index: int = 1
    coefficient: str = "1"
    terms: Optional[dict[str, str]] = None

    def build(self) -> InvariantPolynomial:
        c = Fraction(self.coefficient)
        if self.kind == "pontryagin":
            return pontryagin(self.index, c)
        if not self.terms:
            raise ConfigError("a trace polynomial needs 'terms'")
        return InvariantPolynomial.from_spec(self.terms) * c


class PathSpec(_Model):
    metric: str
    diffeo: Optional[str] = None
    end_metric: Optional[str] = None
    samples: int = Field(9, ge=3)
    bump_amplitude: float = Field(0.05, ge=0)

    @model_validator(mode="after")
    def _endpoint(self):
        if (self.diffeo is None) == (self.end_metric is None):
            raise ValueError("a path ends at either 'diffeo' (class path) or 'end_metric' (free endpoint)")
        return self


class LedgerSpec(_Model):
    data: Optional[str] = None
    family: str = "majorana"
    oriented: list[str] = ["K3", "S4", "CP2"]
    all: Optional[list[str]] = None
    bound: int = Field(64, ge=1)


class CheckOverride(_Model):
    enabled: bool = True
    tolerance: Optional[float] = Field(None, gt=0)
    params: dict[str, Any] = {}


class ExperimentConfig(_Model):
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    output: str = "gravanom-report.json"
    tolerance_scale: float = Field(1.0, gt=0)
    grid: GridSpec = GridSpec()
    polynomial: PolynomialSpec = PolynomialSpec()
    metrics: dict[str, MetricSpec] = {}
    diffeos: dict[str, DiffeoSpec] = {}
    paths: dict[str, PathSpec] = {}
    ledger: LedgerSpec = LedgerSpec()
    checks: dict[str, CheckOverride] = {}

    @model_validator(mode="after")
    def _resolve(self):
        for name, d in self.diffeos.items():
            for part in d.compose or []:
                if part not in self.diffeos:
                    raise ValueError(f"diffeo {name!r} composes unknown diffeo {part!r}")
                if part == name:
                    raise ValueError(f"diffeo {name!r} composes itself")
        for name, p in self.paths.items():
            for ref, table in ((p.metric, self.metrics), (p.end_metric, self.metrics), (p.diffeo, self.diffeos)):
                if ref is not None and ref not in table:
                    raise ValueError(f"path {name!r} references unknown name {ref!r}")
        randomized = any(m.family == "random-fourier" for m in self.metrics.values()) or any(
            d.flow is not None or d.perturbation is not None for d in self.diffeos.values()
        )
        if randomized and self.seed is None:
            raise ValueError("a seed is mandatory when randomized families are used")
        return self


# -- loading with line context ---------------------------------------------------------


def _node_line(node, loc) -> int | None:
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            if nxt is None:
                return line
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def parse_config(text: str, source: str = "<config>", overrides: dict | None = None) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text) or {}
        tree = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: YAML syntax error: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and p.startswith("function-")))
            where = ".".join(str(p) for p in loc) or "<root>"
            line = _node_line(tree, loc)
            at = f"line {line}, " if line else ""
            lines.append(f"{source}: {at}field {where}: {err['msg']}")
        raise ConfigError("\n".join(lines)) from None


def default_config_text() -> str:
    return resources.files("gravanom").joinpath("data/default.yaml").read_text()


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    if path is None:
        return parse_config(default_config_text(), "default.yaml", overrides)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), overrides)


# -- builders --------------------------------------------------------------------------


def named_rng(seed: int | None, name: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "little"))


class Builder:
    """Materializes named metrics and diffeomorphisms of a config on demand."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.periods = (config.grid.period,) * config.grid.dim
        self._generators: dict[str, Any] = {}
        self._diffeos: dict[str, Diffeomorphism] = {}

    def grid(self, nodes: int, orientation: int = 1) -> GridManifold:
        return build_grid(self.config.grid.dim, nodes, self.config.grid.period, orientation)

    def generator(self, name: str):
        if name not in self._generators:
            try:
                spec = self.config.metrics[name]
            except KeyError:
                raise ConfigError(f"unknown metric {name!r}; known: {sorted(self.config.metrics)}") from None
            n = self.config.grid.dim
            if spec.family == "flat":
                gen = FourierMetric(np.eye(n), [], self.periods)
            elif spec.family == "random-fourier":
                gen = random_fourier_metric(named_rng(self.config.seed, "metric:" + name), n, self.periods, spec.modes, spec.amplitude, spec.kmax)
            elif spec.family == "conformal":
                gen = ConformalMetric(np.eye(n), [(t["k"], t["a"], t.get("phase", 0.0)) for t in spec.terms], self.periods)
            else:
                gen = FourierMetric(np.eye(n), [(t["k"], np.asarray(t["S"], float), t.get("phase", 0.0)) for t in spec.terms], self.periods)
            self._generators[name] = gen
        return self._generators[name]

    def metric(self, name: str, nodes: int) -> MetricField:
        return MetricField.from_generator(self.grid(nodes), self.generator(name))

    def diffeo(self, name: str) -> Diffeomorphism:
        if name in self._diffeos:
            return self._diffeos[name]
        try:
            spec = self.config.diffeos[name]
        except KeyError:
            raise ConfigError(f"unknown diffeomorphism {name!r}; known: {sorted(self.config.diffeos)}") from None
        n = self.config.grid.dim
        if spec.compose is not None:
            phi = self.diffeo(spec.compose[0])
            for part in spec.compose[1:]:
                phi = phi.compose(self.diffeo(part))
        elif spec.flow is not None:
            coarse = build_grid(n, spec.flow.nodes, self.config.grid.period)
            X = random_vector_field(named_rng(self.config.seed, "flow:" + name), coarse, spec.flow.modes, spec.flow.amplitude)
            phi = isotopy_flow(X, spec.flow.time)
        else:
            modes = coefs = None
            if spec.perturbation is not None:
                modes, coefs = random_perturbation(named_rng(self.config.seed, "diffeo:" + name), n, spec.perturbation.modes, spec.perturbation.amplitude)
            phi = AffinePerturbedDiffeo(spec.linear, spec.shift, modes, coefs, self.periods)
        self._diffeos[name] = phi
        return phi
