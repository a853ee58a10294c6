"""JSON run configuration with full validation."""

from __future__ import annotations

import json
import math
import warnings
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

Vec3 = tuple[float, float, float]
MODES = ("resonance", "discrete", "effective-em", "effective-heat", "compare")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MaterialBlock(_Block):
    model: Literal["drude", "lorentz"] = "drude"
    k_0: float = 0.0
    eps_inf: float = 1.0
    eps0_drude: float = 9.84
    k_p: float = 9.096
    zeta: float = 0.072
    eps_m: float = 1.0
    eps_m_imag: float = 0.0
    kappa_m: float = 1.0
    gamma_m: float = 1.0
    gamma_p: float = 10.0
    c_m: float = 1.0
    c_p: float = 1.0
    h: float = 1.9
    beta: float = 1.9
    delta: Optional[float] = None

    @model_validator(mode="after")
    def _lorentz(self):
        if self.model == "lorentz":
            warnings.warn("Lorentz model requested: reduced to Drude (k_0 set to 0)", stacklevel=2)
            self.k_0 = 0.0
            self.model = "drude"
        return self


class ShapeBlock(_Block):
    kind: Literal["ball", "csv"] = "ball"
    spectral_csv: Optional[str] = None

    @model_validator(mode="after")
    def _csv(self):
        if self.kind == "csv" and not self.spectral_csv:
            raise ValueError("shape.kind='csv' needs spectral_csv")
        return self


class WaveBlock(_Block):
    k: Union[float, Literal["resonant"]] = "resonant"
    c: float = 0.0
    c_zeta: Optional[float] = None
    theta: Vec3 = (0.0, 0.0, 1.0)
    E0: Vec3 = (1.0, 0.0, 0.0)

    @model_validator(mode="after")
    def _transverse(self):
        nt = math.sqrt(sum(x * x for x in self.theta))
        ne = math.sqrt(sum(x * x for x in self.E0))
        if nt == 0 or ne == 0:
            raise ValueError("theta and E0 must be non-zero")
        if isinstance(self.k, float) and not self.k > 0:
            raise ValueError("k must be positive")
        dot = sum(a * b for a, b in zip(self.theta, self.E0)) / (nt * ne)
        if abs(dot) > 1e-12:
            raise ValueError(f"polarization not transverse (theta.E0 = {dot:.3g})")
        self.theta = tuple(x / nt for x in self.theta)
        self.E0 = tuple(x / ne for x in self.E0)
        return self


class OmegaBlock(_Block):
    kind: Literal["box", "ball"] = "box"
    center: Vec3 = (0.0, 0.0, 0.0)
    extent: float = 0.5


class LatticeBlock(_Block):
    omega: OmegaBlock = Field(default_factory=OmegaBlock)
    delta: float
    beta: Optional[float] = None

    @field_validator("delta")
    @classmethod
    def _pos(cls, v):
        if not v > 0:
            raise ValueError("delta must be positive")
        return v


class ClusterBlock(_Block):
    centers_file: Optional[str] = None
    centers: Optional[list[Vec3]] = None
    delta: Optional[float] = None
    lattice: Optional[LatticeBlock] = None

    @model_validator(mode="after")
    def _one_source(self):
        sources = [self.centers_file is not None, self.centers is not None, self.lattice is not None]
        if sum(sources) != 1:
            raise ValueError("exactly one of centers_file, centers, lattice is required")
        if self.lattice is None and not (self.delta is not None and self.delta > 0):
            raise ValueError("explicit centers need a positive delta")
        return self


class TimeBlock(_Block):
    T: float
    N_t: int
    r: int = 1
    ell: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.N_t < 2:
            raise ValueError("N_t must be at least 2")
        if self.r < 0:
            raise ValueError("r must be non-negative")
        if self.ell is not None and not self.ell > 0:
            raise ValueError("ell must be positive")
        return self


class RayBlock(_Block):
    origin: Vec3 = (0.0, 0.0, 0.0)
    direction: Vec3 = (1.0, 0.0, 0.0)
    start: float = 1.0
    step: float = 0.25
    count: int = 5


class ProbesBlock(_Block):
    points: Optional[list[Vec3]] = None
    points_file: Optional[str] = None
    ray: Optional[RayBlock] = None
    rho_min: Optional[float] = None

    @model_validator(mode="after")
    def _one(self):
        if sum(x is not None for x in (self.points, self.points_file, self.ray)) != 1:
            raise ValueError("exactly one of points, points_file, ray is required")
        return self


class ScanBlock(_Block):
    k_min: Optional[float] = None
    k_max: Optional[float] = None
    steps: int = 201
    lambda_n: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.k_min is not None and self.k_max is not None and self.k_max < self.k_min:
            raise ValueError("k_max must not be below k_min")
        return self


class CompareBlock(_Block):
    deltas: list[float] = [0.08, 0.05, 0.03]
    b_bar_target: Optional[float] = 0.2
    c_k: float = 5.0
    c_zeta: float = 10.0


class SimulationConfig(_Block):
    mode: Optional[Literal["resonance", "discrete", "effective-em", "effective-heat", "compare"]] = None
    material: MaterialBlock = Field(default_factory=MaterialBlock)
    shape: ShapeBlock = Field(default_factory=ShapeBlock)
    wave: WaveBlock = Field(default_factory=WaveBlock)
    cluster: Optional[ClusterBlock] = None
    time: Optional[TimeBlock] = None
    probes: Optional[ProbesBlock] = None
    scan: ScanBlock = Field(default_factory=ScanBlock)
    compare: CompareBlock = Field(default_factory=CompareBlock)
    em_polarization: Literal["matched", "leading_order"] = "matched"

    base_dir: Path = Field(default=Path("."), exclude=True)

    def require(self, mode: str) -> None:
        """Check that the blocks needed by ``mode`` are present."""
        need = {
            "resonance": [],
            "discrete": ["cluster", "time", "probes"],
            "effective-em": ["cluster"],
            "effective-heat": ["cluster", "time", "probes"],
            "compare": ["time", "probes"],
        }[mode]
        missing = [f"{name}: field required for mode {mode!r}" for name in need if getattr(self, name) is None]
        if mode.startswith("effective") and self.cluster is not None and self.cluster.lattice is None:
            missing.append("cluster.lattice: effective modes need a lattice cluster")
        if missing:
            raise ConfigError(missing)

    def resolve(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        msg = err["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        out.append(f"{loc}: {msg}")
    return out


def parse_config_dict(data: dict, base_dir: Path | str = ".") -> SimulationConfig:
    try:
        cfg = SimulationConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    cfg.base_dir = Path(base_dir)
    return cfg


def parse_config(path: str | Path) -> SimulationConfig:
    """Read and validate a JSON configuration; every violation is reported."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a JSON object"])
    return parse_config_dict(data, path.parent)
