"""
Dataset Loader
Reads and writes tabular (y, d, z, x) samples and tabulates instrument cells
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from ..exceptions import DatasetValidationError
from ..models.dataset_models import CellCounts, Dataset, InstrumentSupport, tabulate_cells


DEFAULT_COLUMNS: Dict[str, Union[str, List[str]]] = {'y': 'y', 'd': 'd', 'z': 'z', 'x': []}


def _resolve_columns(column_map: Optional[Dict[str, Union[str, List[str]]]]) -> Dict[str, Union[str, List[str]]]:
    columns = dict(DEFAULT_COLUMNS)
    if column_map:
        columns.update(column_map)
    x_cols = columns.get('x') or []
    columns['x'] = [x_cols] if isinstance(x_cols, str) else list(x_cols)
    return columns


def _numeric_column(frame: pd.DataFrame, name: str) -> np.ndarray:
    values = pd.to_numeric(frame[name], errors='coerce').to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise DatasetValidationError(
            f"missing or non-numeric value in column '{name}' at row {row}",
            {'row': row, 'column': name},
        )
    return values


def load_csv(path: Union[str, Path],
             column_map: Optional[Dict[str, Union[str, List[str]]]] = None,
             reference: Optional[float] = None) -> Dataset:
    """Load a sample from CSV

    Instrument values are mapped to support indices in increasing order; the reference
    value defaults to the largest support point.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset file not found: {path}")

    columns = _resolve_columns(column_map)
    try:
        frame = pd.read_csv(path, comment='#', float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetValidationError(f"could not parse {path}: {e}", {'path': str(path)}) from e

    required = [columns['y'], columns['d'], columns['z'], *columns['x']]
    for name in required:
        if name not in frame.columns:
            raise DatasetValidationError(f"missing column '{name}'", {'column': name})
    if frame.empty:
        raise DatasetValidationError("dataset has no observations", {'path': str(path)})

    y = _numeric_column(frame, columns['y'])
    d_raw = _numeric_column(frame, columns['d'])
    z = _numeric_column(frame, columns['z'])
    x = np.column_stack([_numeric_column(frame, c) for c in columns['x']]) if columns['x'] else np.zeros((len(frame), 0))

    non_binary = (d_raw != 0) & (d_raw != 1)
    if non_binary.any():
        row = int(np.flatnonzero(non_binary)[0])
        raise DatasetValidationError(
            f"non-binary treatment at row {row}: {float(d_raw[row])!r}",
            {'row': row, 'column': columns['d'], 'value': float(d_raw[row])},
        )

    values = tuple(float(v) for v in np.unique(z))
    if len(values) < 2:
        raise DatasetValidationError(
            "instrument takes fewer than two distinct values", {'values': list(values)}
        )
    ref_index = -1
    if reference is not None:
        if float(reference) not in values:
            raise DatasetValidationError(f"reference value {reference} not observed", {'values': list(values)})
        ref_index = values.index(float(reference))
    support = InstrumentSupport(values, ref_index)
    z_index = np.searchsorted(np.asarray(values), z)

    dataset = Dataset(
        y=y, d=d_raw.astype(int), z_index=z_index, support=support, x=x,
        covariate_names=tuple(columns['x']),
    )
    logger.info(f"Loaded {dataset.n} observations from {path} (L={support.size}, x_dim={dataset.x_dim})")
    return dataset


def dump_csv(dataset: Dataset, path: Union[str, Path],
             column_map: Optional[Dict[str, Union[str, List[str]]]] = None,
             header: Sequence[str] = ()) -> Path:
    """Write the sample so that load_csv reproduces it exactly; `header` lines are written as # comments"""
    columns = _resolve_columns(column_map)
    x_names: Sequence[str] = columns['x'] or dataset.covariate_names or [f"x{j}" for j in range(dataset.x_dim)]
    if len(x_names) != dataset.x_dim:
        raise DatasetValidationError("covariate column names do not match x_dim")

    frame = pd.DataFrame({
        columns['y']: dataset.y,
        columns['d']: dataset.d,
        columns['z']: dataset.z,
    })
    for j, name in enumerate(x_names):
        frame[name] = dataset.x[:, j]

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        for line in header:
            f.write(f"# {line}\n")
        # floats are written in repr form; load_csv parses them with float_precision='round_trip'
        frame.to_csv(f, index=False, lineterminator='\n')
    logger.info(f"Wrote {dataset.n} observations to {path}")
    return path


def cell_counts(dataset: Dataset) -> CellCounts:
    """n(d, z) table, empty cells included"""
    return tabulate_cells(dataset)
