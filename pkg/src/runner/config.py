"""
Validated run configuration shared by the CLI, the pipeline and sweep workers
"""
import logging
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import (COLLECTIVE_CONFIG, CURVE_CONFIG, DATA_CONFIG, SOLVER_CONFIG,
                             SSA_CONFIG, VERB_METHODS, WORKER_CONFIG)
from src.checking.schedule import parse_method

logger = logging.getLogger(__name__)

Verb = Literal['fluid', 'check-local', 'check-global', 'simulate', 'sweep']

OVER_PATTERN = re.compile(r'^\s*(N|T)\s*=\s*(.+)$')


class RunConfig(BaseModel):
    """
    Everything needed to reproduce one CLI invocation.

    ``method`` accepts ``moments:4`` as well as ``moments(4)`` and is stored in
    the latter form.
    """
    model_config = ConfigDict(extra='forbid', frozen=True)

    verb: Verb
    model_path: Path
    property_path: Optional[Path] = None
    property_name: Optional[str] = None
    method: str = 'cla'
    n: Optional[int] = Field(default=None, ge=1)
    params: Dict[str, float] = Field(default_factory=dict)
    horizon: Optional[float] = Field(default=None, gt=0)
    t0_max: float = Field(default=0.0, ge=0)
    grid_points: int = Field(default=CURVE_CONFIG['grid_points'], ge=2)
    state: Optional[str] = None
    runs: int = Field(default=SSA_CONFIG['runs'], ge=1)
    seed: int = SSA_CONFIG['seed']
    correct: bool = COLLECTIVE_CONFIG['finite_size_correction']
    over: Optional[str] = None
    rtol: float = Field(default=SOLVER_CONFIG['rtol'], gt=0)
    atol: float = Field(default=SOLVER_CONFIG['atol'], gt=0)
    workers: int = Field(default=WORKER_CONFIG['workers'], ge=1)
    output_dir: Path = DATA_CONFIG['output_dir']
    csv_path: Optional[Path] = None
    json_path: Optional[Path] = None
    dump_product: bool = False
    strict: bool = False
    quiet: bool = False

    @field_validator('method', mode='before')
    @classmethod
    def _normalize_method(cls, value: str) -> str:
        value = str(value).strip()
        if ':' in value:
            name, order = value.split(':', 1)
            value = f"{name}({order})"
        parse_method(value)
        return value

    @field_validator('over')
    @classmethod
    def _check_over(cls, value: Optional[str]) -> Optional[str]:
        if value is not None:
            _parse_over(value)
        return value

    @model_validator(mode='after')
    def _check_verb(self) -> 'RunConfig':
        name, _ = parse_method(self.method)
        if name not in VERB_METHODS[self.verb]:
            raise ValueError(
                f"method '{self.method}' is not valid for '{self.verb}' "
                f"(expected one of {', '.join(VERB_METHODS[self.verb])})"
            )
        if self.verb in ('check-local', 'check-global', 'sweep') and self.property_path is None:
            raise ValueError(f"'{self.verb}' needs a property file")
        if self.verb == 'sweep' and self.over is None:
            raise ValueError("'sweep' needs --over N=... or --over T=...")
        if self.verb in ('fluid', 'simulate') and self.horizon is None:
            raise ValueError(f"'{self.verb}' needs a horizon")
        return self

    @property
    def method_name(self) -> str:
        return parse_method(self.method)[0]

    @property
    def solver_overrides(self) -> Dict[str, float]:
        return {'rtol': self.rtol, 'atol': self.atol}

    def sweep_values(self) -> Tuple[str, List[float]]:
        return _parse_over(self.over)

    def manifest(self) -> Dict[str, object]:
        """JSON-ready copy of the configuration embedded in every artifact."""
        return self.model_dump(mode='json')


def _parse_over(value: str) -> Tuple[str, List[float]]:
    match = OVER_PATTERN.match(value)
    if not match:
        raise ValueError(f"cannot parse sweep '{value}' (expected N=... or T=...)")
    axis, raw = match.groups()
    try:
        values = [float(v) for v in raw.split(',') if v.strip()]
    except ValueError as exc:
        raise ValueError(f"cannot parse sweep values '{raw}'") from exc
    if not values:
        raise ValueError(f"sweep '{value}' has no values")
    if axis == 'N':
        if any(v < 1 or v != int(v) for v in values):
            raise ValueError(f"population sizes must be positive integers: {raw}")
        values = [int(v) for v in values]
    elif any(v <= 0 for v in values):
        raise ValueError(f"horizons must be positive: {raw}")
    return axis, values
