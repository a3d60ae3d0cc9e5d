"""
Artifact Writers
CSV and JSON outputs carrying the schema version, library version and resolved configuration
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from .. import SCHEMA_VERSION, __version__
from ..core.data_loader import dump_csv
from ..models.bound_models import BoundCurve
from ..models.dataset_models import Dataset
from ..models.sim_models import SimResult


def artifact_meta(command: str, resolved: Mapping[str, Any]) -> Dict[str, Any]:
    return {
        'schema_version': SCHEMA_VERSION,
        'version': __version__,
        'command': command,
        'config': jsonable(dict(resolved)),
    }


def jsonable(value: Any) -> Any:
    """numpy scalars and arrays to Python types; non-finite floats to strings"""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, Path):
        return str(value)
    return value


def header_lines(meta: Mapping[str, Any]) -> list:
    return [json.dumps(jsonable(dict(meta)), sort_keys=True)]


def write_csv(path: Union[str, Path], table: Union[pd.DataFrame, Sequence[Mapping[str, Any]]],
              meta: Mapping[str, Any]) -> Path:
    """CSV with one `# {json}` header line ahead of the column names"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = table if isinstance(table, pd.DataFrame) else pd.DataFrame(list(table))
    with open(path, 'w', encoding='utf-8', newline='') as f:
        for line in header_lines(meta):
            f.write(f"# {line}\n")
        frame.to_csv(f, index=False, lineterminator='\n')
    logger.info(f"Wrote {path}")
    return path


def write_json(path: Union[str, Path], payload: Mapping[str, Any], meta: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {'meta': jsonable(dict(meta))}
    body.update(jsonable(dict(payload)))
    with open(path, 'w', encoding='utf-8', newline='') as f:
        json.dump(body, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path


def write_dataset(dataset: Dataset, path: Union[str, Path], meta: Mapping[str, Any],
                  column_map: Optional[Dict[str, Any]] = None) -> Path:
    return dump_csv(dataset, path, column_map, header=header_lines(meta))


def curve_plot_frame(curve: BoundCurve) -> pd.DataFrame:
    return pd.DataFrame({
        'y0': curve.y0_grid,
        'lower': curve.lower,
        'upper': curve.upper,
        'trusted': curve.trusted_mask,
    })


def write_figure_data(out_dir: Path, n_instruments: int, truth: np.ndarray, reference: Optional[BoundCurve],
                      result: SimResult, meta: Mapping[str, Any]) -> Dict[str, Path]:
    """One panel (support size L) of each figure family

    figure1: truth with large-n bounds; figure2: upper-bound means and pointwise intervals per N;
    figure3: lower-bound means and pointwise intervals per N.
    """
    plots = Path(out_dir) / 'plots'
    written: Dict[str, Path] = {}
    if reference is not None:
        frame = curve_plot_frame(reference)
        frame.insert(1, 'truth', truth)
        written['figure1'] = write_csv(plots / f"figure1_L{n_instruments}.csv", frame, meta)

    summary = result.summary_frame()
    if not summary.empty:
        upper_cols = ['n', 'y0', 'truth', 'upper_mean', 'upper_lo', 'upper_hi']
        lower_cols = ['n', 'y0', 'truth', 'lower_mean', 'lower_lo', 'lower_hi']
        for cols in (upper_cols, lower_cols):
            if 'reference_lower' in summary.columns:
                cols.append('reference_upper' if cols is upper_cols else 'reference_lower')
        written['figure2'] = write_csv(plots / f"figure2_L{n_instruments}.csv", summary[upper_cols], meta)
        written['figure3'] = write_csv(plots / f"figure3_L{n_instruments}.csv", summary[lower_cols], meta)
    return written


def error_payload(exc: BaseException) -> Dict[str, Any]:
    """Structured error object for stderr"""
    to_dict = getattr(exc, 'to_dict', None)
    if callable(to_dict):
        return jsonable(to_dict())
    return {'error': type(exc).__name__, 'message': str(exc), 'context': {}}
