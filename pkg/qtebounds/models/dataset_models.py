"""
Dataset Models
Observations, instrument support and the immutable sample used by every estimator
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import DatasetValidationError


@dataclass(frozen=True)
class Observation:
    """One sampled unit (y, d, z, x)"""
    y: float
    d: int
    z: float
    x: Tuple[float, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {'y': self.y, 'd': self.d, 'z': self.z, 'x': list(self.x)}


@dataclass(frozen=True)
class InstrumentSupport:
    """Ordered finite support of the instrument with a designated reference value"""
    values: Tuple[float, ...]
    reference_index: int = -1

    def __post_init__(self):
        if len(self.values) < 2:
            raise DatasetValidationError(
                "instrument needs at least two distinct values",
                {'values': list(self.values)},
            )
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise DatasetValidationError(
                "instrument support must be strictly increasing",
                {'values': list(self.values)},
            )
        # -1 means "largest value"
        ref = self.reference_index if self.reference_index >= 0 else len(self.values) - 1
        if not 0 <= ref < len(self.values):
            raise DatasetValidationError(
                f"reference index {self.reference_index} outside support of size {len(self.values)}"
            )
        object.__setattr__(self, 'reference_index', ref)

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def reference_value(self) -> float:
        return self.values[self.reference_index]

    @property
    def non_reference_indices(self) -> List[int]:
        """Indices of the L-1 non-reference values, in support order"""
        return [k for k in range(self.size) if k != self.reference_index]

    def index_of(self, value: float) -> int:
        for k, v in enumerate(self.values):
            if v == value:
                return k
        raise DatasetValidationError(f"value {value} not in instrument support")

    def to_dict(self) -> Dict[str, Any]:
        return {'values': list(self.values), 'reference_index': self.reference_index}


@dataclass(frozen=True)
class Dataset:
    """Immutable sample stored column-wise"""
    y: np.ndarray
    d: np.ndarray
    z_index: np.ndarray
    support: InstrumentSupport
    x: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    covariate_names: Tuple[str, ...] = ()

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        d = np.array(self.d, dtype=int)
        z_index = np.array(self.z_index, dtype=int)
        n = y.shape[0]
        x = np.array(self.x, dtype=float)
        if x.size == 0:
            x = np.zeros((n, 0))
        if x.ndim == 1:
            x = x.reshape(n, 1)

        if d.shape[0] != n or z_index.shape[0] != n or x.shape[0] != n:
            raise DatasetValidationError("column lengths differ", {'n': n})
        if n == 0:
            raise DatasetValidationError("dataset has no observations")
        if not np.all(np.isfinite(y)):
            row = int(np.flatnonzero(~np.isfinite(y))[0])
            raise DatasetValidationError(f"non-finite outcome at row {row}", {'row': row})
        if not np.all((d == 0) | (d == 1)):
            row = int(np.flatnonzero((d != 0) & (d != 1))[0])
            raise DatasetValidationError(f"non-binary treatment at row {row}", {'row': row})
        if np.any(z_index < 0) or np.any(z_index >= self.support.size):
            raise DatasetValidationError("instrument index outside support")
        if x.shape[1] and not np.all(np.isfinite(x)):
            row = int(np.flatnonzero(~np.all(np.isfinite(x), axis=1))[0])
            raise DatasetValidationError(f"non-finite covariate at row {row}", {'row': row})

        for arr in (y, d, z_index, x):
            arr.setflags(write=False)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'd', d)
        object.__setattr__(self, 'z_index', z_index)
        object.__setattr__(self, 'x', x)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def x_dim(self) -> int:
        return int(self.x.shape[1])

    @property
    def z(self) -> np.ndarray:
        """Instrument values (not indices)"""
        return np.asarray(self.support.values)[self.z_index]

    @property
    def observations(self) -> List[Observation]:
        z = self.z
        return [
            Observation(float(self.y[i]), int(self.d[i]), float(z[i]), tuple(float(v) for v in self.x[i]))
            for i in range(self.n)
        ]

    def cell_mask(self, d: Optional[int] = None, z_index: Optional[int] = None) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        if d is not None:
            mask &= self.d == d
        if z_index is not None:
            mask &= self.z_index == z_index
        return mask

    def subset(self, indices: Sequence[int]) -> 'Dataset':
        """Rows at `indices` (repetition allowed), same support and reference"""
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            y=self.y[idx], d=self.d[idx], z_index=self.z_index[idx],
            support=self.support, x=self.x[idx], covariate_names=self.covariate_names,
        )

    @classmethod
    def from_observations(cls, observations: Sequence[Observation],
                          support: Optional[InstrumentSupport] = None) -> 'Dataset':
        if not observations:
            raise DatasetValidationError("dataset has no observations")
        if support is None:
            support = InstrumentSupport(tuple(sorted({o.z for o in observations})))
        x = np.array([o.x for o in observations], dtype=float)
        return cls(
            y=np.array([o.y for o in observations]),
            d=np.array([o.d for o in observations]),
            z_index=np.array([support.index_of(o.z) for o in observations]),
            support=support,
            x=x.reshape(len(observations), -1) if x.size else np.zeros((len(observations), 0)),
        )


@dataclass
class CellCounts:
    """n(d, z) table; rows d = 0, 1 and columns in support order"""
    counts: np.ndarray
    support: InstrumentSupport

    def count(self, d: int, z_index: int) -> int:
        return int(self.counts[d, z_index])

    def cells_below(self, minimum: int) -> List[Tuple[int, int]]:
        return [
            (d, k) for d in (0, 1) for k in range(self.support.size)
            if self.counts[d, k] < minimum
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'z_values': list(self.support.values),
            'reference_index': self.support.reference_index,
            'd0': [int(c) for c in self.counts[0]],
            'd1': [int(c) for c in self.counts[1]],
        }


def tabulate_cells(dataset: Dataset) -> CellCounts:
    """n(d, z) for d in {0, 1} and every support value, including empty cells"""
    counts = np.zeros((2, dataset.support.size), dtype=int)
    np.add.at(counts, (dataset.d, dataset.z_index), 1)
    return CellCounts(counts=counts, support=dataset.support)
