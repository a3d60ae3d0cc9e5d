"""
Run Configuration
Validated settings for one CLI invocation, merged from a JSON/TOML file and command-line flags
"""

import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from ..config import config
from ..models.bound_models import BoundsConfig
from ..models.dataset_models import Dataset
from ..models.estimate_models import Bandwidths
from ..models.silp_models import Sense, ToleranceSet
from ..models.sim_models import SimParams
from ..simulation.study import FIGURE_MODE_N_LARGE, PROFILES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a .json or .toml configuration file into a plain dictionary"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    if path.suffix.lower() == '.toml':
        with open(path, 'rb') as f:
            return tomllib.load(f)
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


class GridSpec(BaseModel):
    """Evaluation points: explicit list, or `size` points on [lo, hi] (data range when unset)"""
    lo: Optional[float] = None
    hi: Optional[float] = None
    size: int = Field(default=101, ge=1)
    points: Optional[List[float]] = None

    @model_validator(mode='after')
    def _check_order(self) -> 'GridSpec':
        if self.points is not None and any(b <= a for a, b in zip(self.points, self.points[1:])):
            raise ValueError("grid points must be strictly increasing")
        if self.lo is not None and self.hi is not None and self.hi <= self.lo:
            raise ValueError("grid hi must exceed lo")
        return self

    def resolve(self, dataset: Optional[Dataset] = None) -> np.ndarray:
        if self.points is not None:
            return np.asarray(self.points, dtype=float)
        lo = self.lo if self.lo is not None else (float(np.min(dataset.y)) if dataset is not None else None)
        hi = self.hi if self.hi is not None else (float(np.max(dataset.y)) if dataset is not None else None)
        if lo is None or hi is None:
            raise ValueError("grid bounds needed when no dataset is available")
        return np.linspace(lo, hi, self.size)


def _writable(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise ValueError(f"output directory {path} is not writable")
    return path


class RunConfig(BaseModel):
    """Settings shared by bounds, qte, inference, check and dataset-dump"""
    subcommand: str
    input: Optional[Path] = None
    column_map: Dict[str, Any] = Field(default_factory=dict)
    reference: Optional[float] = None
    x: Optional[List[float]] = None
    y0_grid: GridSpec = Field(default_factory=GridSpec)
    tau: float = config.DEFAULT_TAU
    tolerances: Dict[str, float] = Field(default_factory=dict)
    bandwidths: Optional[Dict[str, Any]] = None
    smoothed: bool = False
    grid_cap: int = Field(default=config.GRID_CAP, ge=3)
    margin_min: float = config.MARGIN_MIN
    trusted_interval: Optional[List[float]] = None
    use_fallback: bool = True
    min_cell_size: int = Field(default=config.MIN_CELL_SIZE, ge=1)
    seed: Optional[int] = None
    output_dir: Path = Path(config.DEFAULT_OUTPUT_DIR)
    n_workers: int = Field(default=config.N_WORKERS, ge=1)
    # qte / inference / check
    tau_q: float = Field(default=0.5, gt=0, lt=1)
    y0: Optional[List[float]] = None
    level: float = Field(default=0.95, gt=0, lt=1)
    n_boot: int = Field(default=200, ge=100)
    step: Optional[float] = Field(default=None, gt=0)
    kappa: float = Field(default=config.KAPPA, gt=0, le=1)
    sense: Sense = Sense.UPPER
    resolve: bool = False
    # dataset-dump
    sim: Optional[Dict[str, Any]] = None
    output: Optional[Path] = None

    @field_validator('tau')
    @classmethod
    def _tau_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("tau must be positive")
        return v

    @field_validator('trusted_interval')
    @classmethod
    def _interval(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and (len(v) != 2 or v[1] < v[0]):
            raise ValueError("trusted interval must be [lo, hi] with lo <= hi")
        return v

    @field_validator('output_dir')
    @classmethod
    def _output_dir(cls, v: Path) -> Path:
        return _writable(Path(v))

    def tolerance_set(self) -> ToleranceSet:
        return ToleranceSet.from_config(**self.tolerances)

    def bounds_config(self) -> BoundsConfig:
        return BoundsConfig(
            tau=self.tau,
            smoothed=self.smoothed,
            bandwidths=None if self.bandwidths is None else Bandwidths.from_dict(self.bandwidths),
            grid_cap=self.grid_cap,
            margin_min=self.margin_min,
            trusted_interval=None if self.trusted_interval is None else tuple(self.trusted_interval),
            use_fallback=self.use_fallback,
            min_cell_size=self.min_cell_size,
            tolerances=self.tolerance_set(),
            n_workers=self.n_workers,
        )

    def resolved(self) -> Dict[str, Any]:
        """JSON-safe resolved settings for artifact headers"""
        data = self.model_dump(mode='json')
        if math.isinf(self.tau):
            data['tau'] = 'inf'
        data['tolerances'] = self.tolerance_set().to_dict()
        return data


class StudyConfig(BaseModel):
    """Simulation study: a named profile plus overrides; the seed is mandatory"""
    profile: str = 'smoke'
    seed: int
    params: Dict[str, Any] = Field(default_factory=dict)
    n_reps: int = Field(ge=2)
    n_list: List[int]
    l_list: List[int]
    grid: GridSpec
    n_large: int = Field(ge=1)
    level: float = Field(default=0.95, gt=0, lt=1)
    tau: float = config.DEFAULT_TAU
    smoothed: bool = False
    trusted: str = 'oracle'
    figure_mode: bool = False
    output_dir: Path = Path(config.DEFAULT_OUTPUT_DIR)
    n_workers: int = Field(default=config.N_WORKERS, ge=1)

    @model_validator(mode='before')
    @classmethod
    def _apply_profile(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        profile = data.get('profile', 'smoke')
        if profile not in PROFILES:
            raise ValueError(f"unknown profile '{profile}', expected one of {sorted(PROFILES)}")
        merged = dict(PROFILES[profile])
        merged.update({k: v for k, v in data.items() if v is not None})
        if merged.get('figure_mode'):
            merged['n_large'] = FIGURE_MODE_N_LARGE
        return merged

    @field_validator('trusted')
    @classmethod
    def _trusted(cls, v: str) -> str:
        if v not in ('oracle', 'margin'):
            raise ValueError("trusted must be 'oracle' or 'margin'")
        return v

    @field_validator('l_list')
    @classmethod
    def _l_list(cls, v: List[int]) -> List[int]:
        if not v or v != sorted(set(v)) or v[0] < 2:
            raise ValueError("l_list must be strictly increasing support sizes of at least 2")
        return v

    @field_validator('output_dir')
    @classmethod
    def _output_dir(cls, v: Path) -> Path:
        return _writable(Path(v))

    def sim_params(self) -> SimParams:
        return SimParams(seed=self.seed, **self.params)

    def resolved(self) -> Dict[str, Any]:
        return self.model_dump(mode='json')
