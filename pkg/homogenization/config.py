# homogenization/config.py
"""
Per-run configuration.

A run is described by one JSON document validated by the models below;
unknown keys are rejected. Command-line values override file values and the
resolved model is embedded in the report, so a report can be re-run from
its own "config" block.
"""
import json
import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Type, Union, get_args, get_origin

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from .engine.tensor2d import IsotropicModuli

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Configuration file unreadable or invalid."""


def _check_power_of_two(n: Optional[int]) -> Optional[int]:
    if n is not None and (n < 2 or n & (n - 1)):
        raise ValueError(f"resolution must be a power of two ≥ 2, got {n}")
    return n


class StrictModel(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)


class PhaseConfig(StrictModel):
    lam: float = Field(alias='lambda')
    mu: float

    def to_moduli(self) -> IsotropicModuli:
        return IsotropicModuli(lam=self.lam, mu=self.mu)


class LaminateGenerator(StrictModel):
    kind: Literal['laminate']
    theta: float = Field(ge=0.0, le=1.0)
    normal_axis: Literal[1, 2] = 1


class DiskGenerator(StrictModel):
    kind: Literal['disk']
    radius: float = Field(gt=0.0, lt=0.5)
    center: Tuple[float, float] = (0.5, 0.5)


class HomogeneousGenerator(StrictModel):
    kind: Literal['homogeneous']


class RasterGenerator(StrictModel):
    kind: Literal['raster']
    path: str


Generator = Annotated[
    Union[LaminateGenerator, DiskGenerator, HomogeneousGenerator, RasterGenerator],
    Field(discriminator='kind'),
]


class MicrostructureConfig(StrictModel):
    n: Optional[int] = None
    generator: Generator
    phase1: PhaseConfig
    phase2: PhaseConfig

    @field_validator('n')
    @classmethod
    def _n_power_of_two(cls, v):
        return _check_power_of_two(v)

    @model_validator(mode='after')
    def _resolution_required(self):
        if self.n is None and self.generator.kind != 'raster':
            raise ValueError(f"'n' is required for generator kind '{self.generator.kind}'")
        return self

    def to_descriptor(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True, mode='json')


class SolverConfig(StrictModel):
    tol: Optional[PositiveFloat] = None
    max_iter: Optional[PositiveInt] = None
    reference: Optional[PhaseConfig] = None
    workers: Optional[PositiveInt] = None


class RunConfig(StrictModel):
    """Fields shared by every command."""

    out: Optional[str] = None
    strict: bool = False


class HomogenizeConfig(RunConfig):
    microstructure: MicrostructureConfig
    solver: SolverConfig = Field(default_factory=SolverConfig)
    rank_one_grid: Optional[PositiveInt] = None
    corrector_dump: Optional[str] = None
    extrapolate: bool = False


class CoercivityConfig(RunConfig):
    microstructure: MicrostructureConfig
    resolution: Optional[int] = None
    eig_tol: Optional[PositiveFloat] = None
    k_grid: Optional[int] = Field(default=None, ge=2)
    reduce_wedge: bool = False
    method: Literal['inverse-iteration', 'lobpcg'] = 'inverse-iteration'
    workers: Optional[PositiveInt] = None
    csv: Optional[str] = None

    @field_validator('resolution')
    @classmethod
    def _resolution_power_of_two(cls, v):
        return _check_power_of_two(v)


class DecomposeConfig(RunConfig):
    phase1: PhaseConfig
    phase2: PhaseConfig
    identity_samples: int = Field(default=1000, ge=0)
    seed: int = 0


class SweepConfig(StrictModel):
    start: float = Field(ge=0.0, le=1.0)
    stop: float = Field(ge=0.0, le=1.0)
    count: int = Field(ge=1)

    def values(self) -> List[float]:
        if self.count == 1:
            return [self.start]
        step = (self.stop - self.start) / (self.count - 1)
        return [self.start + i * step for i in range(self.count)]


class LaminateConfig(RunConfig):
    phase1: PhaseConfig
    phase2: PhaseConfig
    theta: float = Field(default=0.5, ge=0.0, le=1.0)
    normal: Tuple[float, float] = (1.0, 0.0)
    route: Literal['traction', 'partial_inversion', 'both'] = 'traction'
    sweep: Optional[SweepConfig] = None
    include_tensors: bool = False
    workers: Optional[PositiveInt] = None
    csv: Optional[str] = None

    @field_validator('normal')
    @classmethod
    def _unit_normal(cls, v):
        norm = (v[0] ** 2 + v[1] ** 2) ** 0.5
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"normal must be a unit vector, got |n| = {norm}")
        return v


class EllipticityConfig(RunConfig):
    mandel: Optional[List[List[float]]] = None
    moduli: Optional[PhaseConfig] = None
    grid: Optional[PositiveInt] = None
    refine_tol: Optional[PositiveFloat] = None

    @model_validator(mode='after')
    def _one_tensor_source(self):
        if (self.mandel is None) == (self.moduli is None):
            raise ValueError("give exactly one of 'mandel' (3x3 matrix) or 'moduli'")
        if self.mandel is not None and (len(self.mandel) != 3 or any(len(row) != 3 for row in self.mandel)):
            raise ValueError("'mandel' must be a 3x3 matrix")
        return self


CONFIG_MODELS: Dict[str, Type[RunConfig]] = {
    'homogenize': HomogenizeConfig,
    'coercivity': CoercivityConfig,
    'decompose': DecomposeConfig,
    'laminate': LaminateConfig,
    'ellipticity': EllipticityConfig,
}


def parse_value(text: str) -> Any:
    """JSON literal when it parses as one, else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Set dotted keys ("solver.tol") in a copy of `data`."""
    result = json.loads(json.dumps(data))
    for dotted, value in overrides.items():
        target = result
        *parents, leaf = dotted.split('.')
        for key in parents:
            node = target.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set '{dotted}': '{key}' is not an object")
            target = node
        target[leaf] = value
    return result


def _is_scalar(annotation: Any) -> bool:
    if get_origin(annotation) is Annotated:
        annotation = get_args(annotation)[0]
    return get_origin(annotation) is Literal or annotation in (int, float, str, bool)


def scalar_fields(model: Type[BaseModel]) -> List[str]:
    """Top-level fields that take a single scalar value on the command line."""
    names = []
    for name, info in model.model_fields.items():
        annotation = info.annotation
        if get_origin(annotation) is Union:
            candidates = [a for a in get_args(annotation) if a is not type(None)]
        else:
            candidates = [annotation]
        if all(_is_scalar(a) for a in candidates):
            names.append(name)
    return names


def load_run_config(command: str, path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Read, override and validate a run configuration.

    Raises:
        ConfigError: unreadable file, invalid JSON or failed validation.
    """
    model = CONFIG_MODELS[command]
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")

    data = apply_overrides(data, overrides or {})
    try:
        config = model.model_validate(data)
    except ValidationError as e:
        problems = '; '.join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid {command} config: {problems}") from e
    logger.debug(f"Resolved {command} config from {path}")
    return config


def dump_config(config: RunConfig) -> Dict[str, Any]:
    return config.model_dump(by_alias=True, mode='json')
