"""TOML run configuration: schema, parsing, serialisation and object builders.

A config has a top-level ``seed`` plus the sections ``[model]``,
``[reward]``, ``[split]`` (optional), ``[solver]`` and ``[output]``.
Unknown keys anywhere are rejected.  See README.md for the full grammar.
"""

from __future__ import annotations

import os
from typing import Annotated, Literal, Optional, Union

import numpy as np
import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy import stats

from . import models
from .errors import ConfigError
from .kernel import MonotoneKernel, RewardFunction

DEFAULT_SEED = 20240611
SEED_ENV = "MONOPOISSON_SEED"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class BirthDeath(_Section):
    family: Literal["birth_death"]
    p: float = Field(gt=0, lt=1)
    N: int = Field(20, ge=2)
    q: Optional[float] = Field(None, ge=0, le=1)


class Lindley(_Section):
    family: Literal["lindley"]
    arrival_rate: float = Field(gt=0)
    service_rate: float = Field(gt=0)


class LindleyDiscrete(_Section):
    family: Literal["lindley_discrete"]
    p_up: float = Field(gt=0, lt=1)
    up: int = Field(1, gt=0)
    down: int = Field(-1, lt=0)
    N: int = Field(40, ge=2)


class ReflectedAR1(_Section):
    family: Literal["reflected_ar1"]
    a: float = Field(ge=0)
    noise_mean: float = -0.5
    noise_sd: float = Field(1.0, gt=0)


class Matrix(_Section):
    family: Literal["matrix"]
    rows: list[list[float]]


ModelSection = Annotated[
    Union[BirthDeath, Lindley, LindleyDiscrete, ReflectedAR1, Matrix], Field(discriminator="family")
]


class RewardSection(_Section):
    form: Literal["identity", "linear", "constant", "power", "capped", "step", "indicator"] = "identity"
    slope: Optional[float] = None
    intercept: Optional[float] = None
    value: Optional[float] = None
    exponent: Optional[float] = None
    cap: Optional[float] = None
    threshold: Optional[float] = None
    point: Optional[float] = None


class Drift(_Section):
    """v(x) = quadratic * x^2 + linear * x + constant."""

    quadratic: float = Field(0.0, ge=0)
    linear: float = 0.0
    constant: float = 0.0


class SplitSection(_Section):
    b: float = Field(gt=0)
    lambda_: float = Field(alias="lambda", gt=0, lt=1)
    phi: Literal["lindley_minorization", "matrix_minorization"]
    v1: Drift
    v2: Drift


class SolverSection(_Section):
    method: Literal["linear", "regenerative", "series"] = "linear"
    anchor: int = Field(0, ge=0)
    tol: float = Field(1e-12, gt=0)
    max_terms: int = Field(100_000, gt=0)
    grid: Optional[str] = None
    cycles: int = Field(10_000, ge=30)
    at: Optional[list[float]] = None
    paths: int = Field(10_000, ge=2)


class OutputSection(_Section):
    path: str = "-"


class RunConfig(_Section):
    seed: Optional[int] = Field(None, ge=0)
    model: ModelSection
    reward: RewardSection = RewardSection()
    split: Optional[SplitSection] = None
    solver: SolverSection = SolverSection()
    output: OutputSection = OutputSection()

    def effective_seed(self) -> int:
        if self.seed is not None:
            return self.seed
        env = os.environ.get(SEED_ENV)
        return int(env) if env else DEFAULT_SEED


def _error_path(loc) -> str:
    # discriminated unions insert the tag name into the location
    parts = [str(p) for p in loc if p not in ("birth_death", "lindley", "lindley_discrete", "reflected_ar1", "matrix")]
    return ".".join(parts)


def parse_config(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(exc), path="<toml>") from exc
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(err["msg"], path=_error_path(err["loc"])) from exc


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError("config is not UTF-8", path=str(path)) from exc
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.model_dump(by_alias=True, exclude_none=True))


# ---------------------------------------------------------------------------
# builders


def build_kernel(cfg: RunConfig) -> MonotoneKernel:
    m = cfg.model
    if m.family == "birth_death":
        return models.build_birth_death(m.p, m.N, q=m.q)
    if m.family == "lindley":
        return models.build_lindley(m.arrival_rate, m.service_rate)
    if m.family == "lindley_discrete":
        return models.build_discrete_lindley(m.p_up, m.up, m.down, m.N)
    if m.family == "reflected_ar1":
        return models.build_reflected_ar1(m.a, stats.norm(m.noise_mean, m.noise_sd))
    return MonotoneKernel.from_matrix(np.array(m.rows), name="matrix")


def build_reward(cfg: RunConfig) -> RewardFunction:
    r = cfg.reward

    def need(name):
        value = getattr(r, name)
        if value is None:
            raise ConfigError(f"reward form {r.form!r} needs {name}", path=f"reward.{name}")
        return value

    if r.form == "identity":
        return models.identity_reward()
    if r.form == "linear":
        return models.linear_reward(need("slope"), r.intercept or 0.0)
    if r.form == "constant":
        return models.constant_reward(need("value"))
    if r.form == "power":
        return models.power_reward(need("exponent"))
    if r.form == "capped":
        return models.capped_reward(need("cap"))
    if r.form == "step":
        return models.step_reward(need("threshold"))
    return models.indicator_reward(need("point"))


def _drift(d: Drift):
    return lambda x: d.quadratic * np.asarray(x, dtype=float) ** 2 + d.linear * np.asarray(x, dtype=float) + d.constant


def build_split(cfg: RunConfig, k: MonotoneKernel):
    from .split import SplitConfig, lindley_minorization, matrix_minorization

    s = cfg.split
    if s is None:
        raise ConfigError("this command needs a [split] section", path="split")
    if s.phi == "lindley_minorization":
        if cfg.model.family != "lindley":
            raise ConfigError("lindley_minorization needs model.family = 'lindley'", path="split.phi")
        mass, phi = lindley_minorization(cfg.model.arrival_rate, cfg.model.service_rate, s.b)
    else:
        if not k.discrete:
            raise ConfigError("matrix_minorization needs a discrete model", path="split.phi")
        mass, phi = matrix_minorization(k, s.b)
    if s.lambda_ > mass + 1e-15:
        raise ConfigError(f"lambda {s.lambda_} exceeds the minorization mass {mass:.6g}", path="split.lambda")
    return SplitConfig(s.b, s.lambda_, phi, _drift(s.v1), _drift(s.v2), name=cfg.model.family,
                       info={"max_lambda": mass})


def parse_grid(spec: str) -> np.ndarray:
    """'a:b:n' -> n evenly spaced points from a to b."""
    try:
        a, b, n = spec.split(":")
        return np.linspace(float(a), float(b), int(n))
    except ValueError as exc:
        raise ConfigError(f"grid must look like a:b:n, got {spec!r}", path="solver.grid") from exc
