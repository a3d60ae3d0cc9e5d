"""
Simulation Models
Data generating process parameters and replication study results
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class SimParams:
    """Latent-index design with a discrete instrument on {0, 1/(L-1), ..., 1}"""
    n: int = 1000
    n_instruments: int = 2
    rho: float = 0.8
    pi0: float = 0.2
    pi1: float = 0.5
    binomial_p: float = 0.5
    sigma_xi1: float = 1.0
    sigma_nu: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.n_instruments < 2:
            raise ValueError("the instrument needs at least two support points")
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie in (-1, 1)")
        if not 0 < self.binomial_p < 1:
            raise ValueError("binomial_p must lie in (0, 1)")
        if not (self.sigma_xi1 > 0 and self.sigma_nu > 0):
            raise ValueError("noise scales must be positive")

    @property
    def support(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_instruments)

    def with_overrides(self, **kwargs: Any) -> 'SimParams':
        values = dict(self.__dict__)
        values.update(kwargs)
        return SimParams(**values)

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class SampleSizeSummary:
    """Aggregates over R replications at one sample size"""
    n: int
    lower_curves: np.ndarray
    upper_curves: np.ndarray
    failed: List[int] = field(default_factory=list)

    @property
    def n_replications(self) -> int:
        return int(self.lower_curves.shape[0])


@dataclass
class SimResult:
    """Replication study output"""
    params: SimParams
    y0_grid: np.ndarray
    truth: np.ndarray
    level: float
    by_n: List[SampleSizeSummary] = field(default_factory=list)
    reference_lower: Optional[np.ndarray] = None
    reference_upper: Optional[np.ndarray] = None
    trusted_mask: Optional[np.ndarray] = None

    @property
    def has_reference(self) -> bool:
        return self.reference_lower is not None and self.reference_upper is not None

    def summary_frame(self) -> pd.DataFrame:
        """Long table with pointwise means, two-sided percentile intervals for each bound and coverage per N"""
        alpha = 1.0 - self.level
        q_lo, q_hi = 100 * alpha / 2, 100 * (1 - alpha / 2)
        frames = []
        for block in self.by_n:
            lo, up = block.lower_curves, block.upper_curves
            contains = (lo <= self.truth + 1e-12) & (self.truth - 1e-12 <= up)
            frame = pd.DataFrame({
                'n': block.n,
                'y0': self.y0_grid,
                'truth': self.truth,
                'lower_mean': np.nanmean(lo, axis=0),
                'upper_mean': np.nanmean(up, axis=0),
                'lower_lo': np.nanpercentile(lo, q_lo, axis=0),
                'lower_hi': np.nanpercentile(lo, q_hi, axis=0),
                'upper_lo': np.nanpercentile(up, q_lo, axis=0),
                'upper_hi': np.nanpercentile(up, q_hi, axis=0),
                'coverage': contains.mean(axis=0),
            })
            frame['lower_ci_width'] = frame['lower_hi'] - frame['lower_lo']
            frame['upper_ci_width'] = frame['upper_hi'] - frame['upper_lo']
            if self.trusted_mask is not None:
                frame['trusted'] = self.trusted_mask
            if self.has_reference:
                ref_lo, ref_up = self.reference_lower, self.reference_upper
                frame['reference_lower'] = ref_lo
                frame['reference_upper'] = ref_up
                frame['reference_lower_covered'] = (
                    (frame['lower_lo'] - 1e-12 <= ref_lo) & (ref_lo <= frame['lower_hi'] + 1e-12))
                frame['reference_upper_covered'] = (
                    (frame['upper_lo'] - 1e-12 <= ref_up) & (ref_up <= frame['upper_hi'] + 1e-12))
                # reference identified set inside the outer band [lower_lo, upper_hi]
                frame['reference_covered'] = (
                    (frame['lower_lo'] - 1e-12 <= ref_lo) & (ref_up <= frame['upper_hi'] + 1e-12))
            frames.append(frame)
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    def dispersion_report(self) -> pd.DataFrame:
        """Median interval widths over the trusted points for each N, in increasing N

        `*_width_shrinks` is False on the first row and True on later rows whose median width is
        strictly below the previous row's.
        """
        summary = self.summary_frame()
        if summary.empty:
            return pd.DataFrame()
        if 'trusted' in summary.columns:
            summary = summary[summary['trusted'].astype(bool)]
        if summary.empty:
            return pd.DataFrame()
        rows = []
        for n, block in summary.groupby('n', sort=True):
            row = {
                'n': int(n),
                'n_points': int(len(block)),
                'lower_ci_width': float(np.nanmedian(block['lower_ci_width'])),
                'upper_ci_width': float(np.nanmedian(block['upper_ci_width'])),
            }
            if self.has_reference:
                row['reference_covered_rate'] = float(block['reference_covered'].mean())
            rows.append(row)
        report = pd.DataFrame(rows)
        for side in ('lower', 'upper'):
            widths = report[f'{side}_ci_width'].to_numpy()
            shrinks = np.zeros(widths.size, dtype=bool)
            shrinks[1:] = widths[1:] < widths[:-1]
            report[f'{side}_width_shrinks'] = shrinks
        return report

    def dispersion_shrinks(self) -> bool:
        """True when both median interval widths strictly decrease across every consecutive N"""
        report = self.dispersion_report()
        if len(report) < 2:
            return True
        return bool(report['lower_width_shrinks'].iloc[1:].all() and report['upper_width_shrinks'].iloc[1:].all())

    def reference_coverage_ok(self, threshold: float = 0.9) -> Optional[bool]:
        """Reference bounds inside the outer band at `threshold` of trusted points for every N"""
        if not self.has_reference:
            return None
        report = self.dispersion_report()
        if report.empty:
            return False
        return bool((report['reference_covered_rate'] >= threshold).all())


@dataclass
class TightenReport:
    """Bound widths as the instrument support grows, plus interval dispersion across N per support size"""
    table: pd.DataFrame
    curves: Dict[int, Any]
    weakly_decreasing: bool
    slack: float = 0.005
    dispersion: Dict[int, pd.DataFrame] = field(default_factory=dict)

    def add_replications(self, n_instruments: int, result: SimResult) -> pd.DataFrame:
        """Record the width-in-N report of one support size's replication study"""
        report = result.dispersion_report()
        self.dispersion[int(n_instruments)] = report
        if 'dispersion_shrinks' not in self.table.columns:
            self.table['dispersion_shrinks'] = pd.Series([None] * len(self.table), dtype=object)
        self.table.loc[self.table['L'] == int(n_instruments), 'dispersion_shrinks'] = result.dispersion_shrinks()
        return report
