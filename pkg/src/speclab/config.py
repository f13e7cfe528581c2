"""Experiment configuration: TOML file, pydantic schema, content hash."""
from __future__ import annotations

import hashlib
import json
import math
import os
import sys
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import grid as gp
from .errors import ConfigError

OUTPUT_ENV = "SPECLAB_OUTPUT"

COMMANDS = ("eig", "thick", "obs", "sweep", "lift", "cauchy", "agmon", "all")

POTENTIALS = {
    "harmonic": gp.harmonic,
    "power": gp.power,
    "power_pair": gp.power_pair,
    "stretched_exp": gp.stretched_exp,
    "exp_log_power": gp.exp_log_power,
    "log_power": gp.log_power,
}


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialBlock(_Block):
    kind: Literal["harmonic", "power", "power_pair", "stretched_exp", "exp_log_power", "log_power"]
    params: Dict[str, float] = {}


class GridBlock(_Block):
    lam_max: float
    L: Optional[float] = None
    n: Optional[int] = None
    margin: float = 2.0
    points_per_wavelength: float = 40.0
    max_h: float = 0.02

    @model_validator(mode="after")
    def _both_or_neither(self):
        if (self.L is None) != (self.n is None):
            raise ValueError("give both L and n, or neither")
        return self


class ThicknessBlock(_Block):
    s: float = 0.0
    tau: float = 0.0
    gamma: float
    D: float
    N: int = 200  # partition size for the recipe check


class SensorBlock(_Block):
    kind: Literal["periodic", "balls", "random_thick", "explicit"]
    params: Dict[str, float] = {}
    intervals: Optional[List[List[float]]] = None
    window: Optional[List[float]] = None
    thickness: Optional[ThicknessBlock] = None

    @model_validator(mode="after")
    def _explicit_needs_intervals(self):
        if self.kind == "explicit" and not self.intervals:
            raise ValueError("explicit sensor sets need 'intervals'")
        for pair in self.intervals or []:
            if len(pair) != 2 or not pair[0] <= pair[1]:
                raise ValueError(f"bad interval {pair}")
        return self


class LamRange(_Block):
    start: float
    stop: float
    num: int

    def values(self):
        r = (self.stop / self.start) ** (1.0 / (self.num - 1))
        return [self.start * r ** k for k in range(self.num - 1)] + [self.stop]


class SweepBlock(_Block):
    lams: Optional[List[float]] = None
    lam_range: Optional[LamRange] = None
    deltas: List[float] = []
    delta_lambda: Optional[float] = None
    delta_period: float = 1.0
    measures: List[float] = [1.0, 0.5, 0.25, 0.125, 0.0625]
    s: float = 0.0
    tau: float = 0.0

    @model_validator(mode="after")
    def _one_source(self):
        if self.lams is not None and self.lam_range is not None:
            raise ValueError("give 'lams' or 'lam_range', not both")
        lams = self.lambda_list()
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambda list must be strictly increasing")
        if any(not 0 < m <= 2 for m in self.measures):
            raise ValueError("set measures must lie in (0, 2]")
        return self

    def lambda_list(self) -> List[float]:
        if self.lams is not None:
            return [float(l) for l in self.lams]
        if self.lam_range is not None:
            return self.lam_range.values()
        return []


class LiftBlock(_Block):
    lam: Optional[float] = None  # lift the span below this level (default grid.lam_max)
    Y: float = 1.0
    ny: Optional[int] = None  # default: dy <= 0.1 / sqrt(lam), at least 101 points
    levels: int = 3  # step halvings for the residual rate
    vectors: int = 20
    dump_field: bool = False


class CauchyBlock(_Block):
    polynomials: int = 200
    max_degree: int = 64
    measures: List[float] = [0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125]
    multipliers: int = 20
    max_M: float = 64.0
    max_K: float = 64.0
    E: List[float] = [-0.5, 0.5]
    c1: float = 2.0
    lemma_vectors: int = 5

    @field_validator("measures")
    @classmethod
    def _measures(cls, v):
        if any(not 0 < m < 2 for m in v):
            raise ValueError("three-ball set measures must lie in (0, 2)")
        return v


class AgmonBlock(_Block):
    rs: List[float] = [1.5, 2.0, 3.0, 4.0, 6.0]
    c0: float = 3.0
    n_random: int = 50


class ExperimentConfig(_Block):
    command: Optional[Literal["eig", "thick", "obs", "sweep", "lift", "cauchy", "agmon", "all"]] = None
    seed: int = 0
    output: str = "runs"
    potential: PotentialBlock
    grid: GridBlock
    sensors: Optional[SensorBlock] = None
    sweep: SweepBlock = SweepBlock()
    lift: LiftBlock = LiftBlock()
    cauchy: CauchyBlock = CauchyBlock()
    agmon: AgmonBlock = AgmonBlock()

    @field_validator("seed")
    @classmethod
    def _seed(cls, v):
        if v < 0:
            raise ValueError("seed must be nonnegative")
        return v

    def build_potential(self) -> gp.PotentialSpec:
        try:
            return POTENTIALS[self.potential.kind](**self.potential.params)
        except TypeError as exc:
            raise ConfigError(f"potential.params: {exc}") from None

    def build_grid(self, spec: gp.PotentialSpec) -> gp.Grid:
        g = self.grid
        if g.L is not None:
            return gp.make_grid(g.L, g.n)
        return gp.auto_grid(spec, g.lam_max, g.margin, g.points_per_wavelength, g.max_h)

    def content_hash(self) -> str:
        """sha256 of the canonical JSON of everything except the output location."""
        return _hash(self.model_dump(exclude={"output", "command"}))

    def eigen_hash(self) -> str:
        """Hash of the blocks that determine the eigenpairs."""
        return _hash({"potential": self.potential.model_dump(), "grid": self.grid.model_dump()})


def _hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


def _loc(err) -> str:
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def parse_config(data: dict, source: str = "<config>") -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = [f"{source}: key '{_loc(e)}': {e['msg']}" for e in exc.errors()]
        raise ConfigError("\n".join(lines)) from None
    return check_finite(cfg)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = parse_config(data, str(path))
    override = os.environ.get(OUTPUT_ENV)
    if override:
        cfg = cfg.model_copy(update={"output": override})
    return cfg


def check_finite(cfg: ExperimentConfig):
    """Reject NaN or infinite numbers anywhere in the config."""
    def walk(v, where):
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"key '{where}': non-finite value {v!r}")
        if isinstance(v, dict):
            for k, x in v.items():
                walk(x, f"{where}.{k}" if where else k)
        if isinstance(v, list):
            for i, x in enumerate(v):
                walk(x, f"{where}.{i}")
    walk(cfg.model_dump(), "")
    return cfg
