"""
Kernel Estimators
Conditional CDFs, propensity scores and the instrument differences Δ̂_{dz} that parametrize the SILP
"""

import dataclasses
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from scipy.special import ndtr

from ..config import config
from ..exceptions import EmptyCellError, ZeroKernelWeightError
from ..models.dataset_models import Dataset
from ..models.estimate_models import Bandwidths, CdfEstimate, CdfKind, CoefficientTriple, EvalGrid

# Entries of the (points x sample) matrix built per chunk by the smoothed estimator
_SMOOTHING_CHUNK = 4_000_000


def epanechnikov(u: np.ndarray) -> np.ndarray:
    """K(u) = 0.75 (1 - u²) on |u| ≤ 1"""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def product_kernel_weights(sample: np.ndarray, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Π_j K((x_j − X_ij) / h_j); all ones when there are no covariates"""
    if sample.shape[1] == 0:
        return np.ones(sample.shape[0])
    u = (x[None, :] - sample) / h[None, :]
    return np.prod(epanechnikov(u), axis=1)


def silverman_bandwidth(values: np.ndarray, n: Optional[int] = None) -> float:
    """1.06 σ̂ n^{-1/5}; σ̂ = 1 when the values are constant"""
    values = np.asarray(values, dtype=float)
    n = values.size if n is None else n
    sigma = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    if sigma <= 0:
        logger.warning("Constant covariate in bandwidth selection, using unit scale")
        sigma = 1.0
    return 1.06 * sigma * max(n, 1) ** (-0.2)


def outcome_bandwidth(y: np.ndarray) -> float:
    """b_n = 1.06 σ̂_Y n^{-1/3}"""
    y = np.asarray(y, dtype=float)
    sigma = float(np.std(y, ddof=1)) if y.size > 1 else 0.0
    if sigma <= 0:
        sigma = 1.0
    return 1.06 * sigma * y.size ** (-1.0 / 3.0)


def default_bandwidths(dataset: Dataset, smoothed: bool = False) -> Bandwidths:
    """Silverman-rule bandwidths per covariate dimension and conditioning group

    h_d uses the D = d sample; h'_d uses the D = d sample with the smallest (d, z) cell size;
    h† uses the full sample with the smallest instrument cell size.
    """
    bw = Bandwidths(b_n=outcome_bandwidth(dataset.y) if smoothed else None)
    if dataset.x_dim == 0:
        empty = np.zeros(0)
        bw.h_d = {0: empty, 1: empty}
        bw.h_prime = {0: empty, 1: empty}
        bw.h_dagger = empty
        return bw

    z_sizes = [int(np.sum(dataset.z_index == k)) for k in range(dataset.support.size)]
    for d in (0, 1):
        in_arm = dataset.d == d
        xs = dataset.x[in_arm]
        cell_sizes = [int(np.sum(in_arm & (dataset.z_index == k))) for k in range(dataset.support.size)]
        bw.h_d[d] = np.array([silverman_bandwidth(xs[:, j]) for j in range(dataset.x_dim)])
        n_cell = max(min(cell_sizes), 1)
        bw.h_prime[d] = np.array([silverman_bandwidth(xs[:, j], n_cell) for j in range(dataset.x_dim)])
    bw.h_dagger = np.array([
        silverman_bandwidth(dataset.x[:, j], max(min(z_sizes), 1)) for j in range(dataset.x_dim)
    ])
    return bw


def default_grid(dataset: Dataset, cap: int = config.GRID_CAP, pad: Optional[float] = None) -> EvalGrid:
    """Unique treated outcomes plus one padding point beyond each end of the sample range

    More than `cap` points are thinned to evenly spaced order statistics.
    """
    if cap < 3:
        raise ValueError("grid cap must be at least 3")
    pad = outcome_bandwidth(dataset.y) if pad is None or pad <= 0 else pad
    treated = dataset.y[dataset.d == 1]
    interior = np.unique(treated if treated.size else dataset.y)
    if interior.size > cap - 2:
        keep = np.unique(np.round(np.linspace(0, interior.size - 1, cap - 2)).astype(int))
        interior = interior[keep]
    lo = float(np.min(dataset.y)) - pad
    hi = float(np.max(dataset.y)) + pad
    return EvalGrid(np.concatenate([[lo], interior, [hi]]))


def _step_cdf(y: np.ndarray, w: np.ndarray, points: np.ndarray) -> np.ndarray:
    order = np.argsort(y, kind='mergesort')
    ys, cw = y[order], np.cumsum(w[order])
    idx = np.searchsorted(ys, points, side='right')
    out = np.zeros(points.shape, dtype=float)
    hit = idx > 0
    out[hit] = cw[idx[hit] - 1]
    return out / cw[-1]


def _smoothed_cdf(y: np.ndarray, w: np.ndarray, points: np.ndarray, b_n: float) -> np.ndarray:
    out = np.empty(points.shape, dtype=float)
    step = max(1, _SMOOTHING_CHUNK // max(y.size, 1))
    for start in range(0, points.size, step):
        block = points[start:start + step]
        out[start:start + step] = ndtr((block[:, None] - y[None, :]) / b_n) @ w
    return out / np.sum(w)


class CoefficientEstimator:
    """Kernel estimates of F(y|d,x), F(y|d,z,x), p(z,x) and Δ_{dz} for one (dataset, x)

    A single instance serves a whole y0 grid: the treated-arm coefficients depend only on
    the evaluation grid, Δ₀ is evaluated pointwise at each y0.
    """

    def __init__(self, dataset: Dataset, bandwidths: Optional[Bandwidths] = None,
                 grid: Optional[EvalGrid] = None, x: Optional[Sequence[float]] = None,
                 smoothed: bool = False, grid_cap: int = config.GRID_CAP):
        self.dataset = dataset
        self.smoothed = smoothed
        bw = default_bandwidths(dataset, smoothed=smoothed) if bandwidths is None else bandwidths
        if smoothed and bw.b_n is None:
            bw = dataclasses.replace(bw, b_n=outcome_bandwidth(dataset.y))
        elif not smoothed and bw.b_n is not None:
            bw = dataclasses.replace(bw, b_n=None)
        self.bandwidths = bw
        self.grid = grid or default_grid(dataset, cap=grid_cap, pad=self.bandwidths.b_n)
        self.x = np.zeros(0) if x is None else np.asarray(x, dtype=float).ravel()
        if self.x.size != dataset.x_dim:
            raise ValueError(f"evaluation point has {self.x.size} components, dataset has {dataset.x_dim}")
        self.x_on_boundary = self._check_boundary()
        self._delta1_cache: Optional[np.ndarray] = None
        self._f_treated_cache: Optional[CdfEstimate] = None

    @property
    def kind(self) -> CdfKind:
        return CdfKind.SMOOTHED if self.smoothed else CdfKind.STEP

    def _check_boundary(self) -> bool:
        if self.dataset.x_dim == 0:
            return False
        h = self.bandwidths.h_dagger
        lo = np.min(self.dataset.x, axis=0) + h
        hi = np.max(self.dataset.x, axis=0) - h
        on_boundary = bool(np.any(self.x < lo) or np.any(self.x > hi))
        if on_boundary:
            logger.warning(f"Covariate point {self.x.tolist()} lies within one bandwidth of the support boundary")
        return on_boundary

    def _weights(self, mask: np.ndarray, h: Optional[np.ndarray]) -> np.ndarray:
        h = np.zeros(0) if h is None else h
        w = product_kernel_weights(self.dataset.x[mask], self.x, h)
        if w.size and np.sum(w) <= 0:
            raise ZeroKernelWeightError(
                "all kernel weights vanish at the covariate point", {'x': self.x.tolist()}
            )
        return w

    def _cdf_on(self, mask: np.ndarray, h: Optional[np.ndarray], points: np.ndarray) -> np.ndarray:
        w = self._weights(mask, h)
        y = self.dataset.y[mask]
        if self.smoothed:
            return _smoothed_cdf(y, w, points, float(self.bandwidths.b_n))
        return _step_cdf(y, w, points)

    def _require_cell(self, d: int, z_index: Optional[int]) -> np.ndarray:
        mask = self.dataset.cell_mask(d, z_index)
        if not mask.any():
            z_value = None if z_index is None else self.dataset.support.values[z_index]
            raise EmptyCellError(d, -1 if z_index is None else z_index, z_value)
        return mask

    def cdf(self, d: int, z_index: Optional[int] = None,
            points: Optional[np.ndarray] = None) -> np.ndarray:
        """F̂(y | d, [z,] x) at the given points (the grid by default)"""
        pts = self.grid.points if points is None else np.atleast_1d(np.asarray(points, dtype=float))
        mask = self._require_cell(d, z_index)
        h = self.bandwidths.h_d.get(d) if z_index is None else self.bandwidths.h_prime.get(d)
        return self._cdf_on(mask, h, pts)

    def propensity(self, z_index: int) -> float:
        """p̂(z, x) = Pr̂(D = 1 | Z = z, X = x)"""
        in_z = self.dataset.z_index == z_index
        if not in_z.any():
            raise EmptyCellError(1, z_index, self.dataset.support.values[z_index])
        w = self._weights(in_z, self.bandwidths.h_dagger)
        treated = self.dataset.d[in_z] == 1
        return float(np.sum(w[treated]) / np.sum(w))

    def joint(self, d: int, z_index: int, points: Optional[np.ndarray] = None) -> np.ndarray:
        """Pr̂(Y ≤ y, D = d | Z = z, X = x) from one kernel fit on the instrument cell"""
        pts = self.grid.points if points is None else np.atleast_1d(np.asarray(points, dtype=float))
        in_z = self.dataset.z_index == z_index
        if not in_z.any():
            raise EmptyCellError(d, z_index, self.dataset.support.values[z_index])
        w = self._weights(in_z, self.bandwidths.h_dagger)
        keep = (self.dataset.d[in_z] == d) & (w > 0)
        if not keep.any():
            return np.zeros(pts.shape)
        share = float(np.sum(w[keep]) / np.sum(w))
        y = self.dataset.y[in_z][keep]
        if self.smoothed:
            return share * _smoothed_cdf(y, w[keep], pts, float(self.bandwidths.b_n))
        return share * _step_cdf(y, w[keep], pts)

    def _arm_term(self, d: int, z_index: int, points: np.ndarray) -> np.ndarray:
        p = self.propensity(z_index)
        factor = p if d == 1 else 1.0 - p
        return self.cdf(d, z_index, points) * factor

    def delta(self, d: int, z_index: int, points: Optional[np.ndarray] = None) -> np.ndarray:
        """Δ̂_{dz}(y) = F̂(y|d,z,x) p̂^d (1−p̂)^{1−d} − the same at the reference value"""
        pts = self.grid.points if points is None else np.atleast_1d(np.asarray(points, dtype=float))
        ref = self.dataset.support.reference_index
        if z_index == ref:
            return np.zeros(pts.shape)
        return self._arm_term(d, z_index, pts) - self._arm_term(d, ref, pts)

    def delta1_matrix(self) -> np.ndarray:
        """Δ̂₁ on the grid, one row per non-reference instrument value"""
        if self._delta1_cache is None:
            rows = [self.delta(1, k) for k in self.dataset.support.non_reference_indices]
            self._delta1_cache = np.vstack(rows)
        return self._delta1_cache

    def f_treated(self) -> CdfEstimate:
        if self._f_treated_cache is None:
            self._f_treated_cache = CdfEstimate(self.grid, self.cdf(1), self.kind)
        return self._f_treated_cache

    def delta0_at(self, y0: float) -> np.ndarray:
        return np.array([
            self.delta(0, k, np.array([y0]))[0] for k in self.dataset.support.non_reference_indices
        ])

    def triple(self, y0: float) -> CoefficientTriple:
        return CoefficientTriple(
            y0=float(y0),
            delta0_at_y0=self.delta0_at(y0),
            delta1=self.delta1_matrix(),
            f_treated=self.f_treated(),
            x_on_boundary=self.x_on_boundary,
        )

    def quantile(self, d: int, tau_q: float) -> float:
        """inf{y : F̂(y | d, x) ≥ τ} over the D = d sample"""
        if not 0 < tau_q < 1:
            raise ValueError("quantile level must lie in (0, 1)")
        mask = self._require_cell(d, None)
        w = self._weights(mask, self.bandwidths.h_d.get(d))
        y = self.dataset.y[mask]
        order = np.argsort(y, kind='mergesort')
        cw = np.cumsum(w[order]) / np.sum(w)
        k = int(np.searchsorted(cw, tau_q - 1e-12, side='left'))
        return float(y[order][min(k, y.size - 1)])


def _estimator(dataset: Dataset, x: Optional[Sequence[float]], bandwidths: Optional[Bandwidths],
               grid: Optional[EvalGrid], smoothed: bool) -> CoefficientEstimator:
    return CoefficientEstimator(dataset, bandwidths=bandwidths, grid=grid, x=x, smoothed=smoothed)


def _z_index(dataset: Dataset, z: Optional[float]) -> Optional[int]:
    return None if z is None else dataset.support.index_of(float(z))


def cdf_step(dataset: Dataset, d: int, z: Optional[float] = None, x: Optional[Sequence[float]] = None,
             bandwidths: Optional[Bandwidths] = None, grid: Optional[EvalGrid] = None) -> CdfEstimate:
    """Kernel-weighted indicator estimate of F_{Y|D[Z]X}; right-continuous step in y"""
    est = _estimator(dataset, x, bandwidths, grid, smoothed=False)
    return CdfEstimate(est.grid, est.cdf(d, _z_index(dataset, z)), CdfKind.STEP)


def cdf_smoothed(dataset: Dataset, d: int, z: Optional[float] = None, x: Optional[Sequence[float]] = None,
                 bandwidths: Optional[Bandwidths] = None, grid: Optional[EvalGrid] = None) -> CdfEstimate:
    """Indicator replaced by Φ((y − Y_i)/b_n); continuous and strictly increasing"""
    est = _estimator(dataset, x, bandwidths, grid, smoothed=True)
    return CdfEstimate(est.grid, est.cdf(d, _z_index(dataset, z)), CdfKind.SMOOTHED)


def propensity(dataset: Dataset, z: float, x: Optional[Sequence[float]] = None,
               bandwidths: Optional[Bandwidths] = None) -> float:
    est = _estimator(dataset, x, bandwidths, None, smoothed=False)
    return est.propensity(dataset.support.index_of(float(z)))


def delta_dz(dataset: Dataset, d: int, z: float, x: Optional[Sequence[float]] = None,
             bandwidths: Optional[Bandwidths] = None, grid: Optional[EvalGrid] = None,
             smoothed: bool = False) -> CdfEstimate:
    est = _estimator(dataset, x, bandwidths, grid, smoothed)
    return CdfEstimate(est.grid, est.delta(d, dataset.support.index_of(float(z))), est.kind)


def joint_subdistribution(dataset: Dataset, d: int, z: float, x: Optional[Sequence[float]] = None,
                          bandwidths: Optional[Bandwidths] = None, grid: Optional[EvalGrid] = None,
                          smoothed: bool = False) -> CdfEstimate:
    est = _estimator(dataset, x, bandwidths, grid, smoothed)
    return CdfEstimate(est.grid, est.joint(d, dataset.support.index_of(float(z))), est.kind)


def coefficient_triple(dataset: Dataset, y0: float, x: Optional[Sequence[float]] = None,
                       bandwidths: Optional[Bandwidths] = None, grid: Optional[EvalGrid] = None,
                       smoothed: bool = False) -> CoefficientTriple:
    return _estimator(dataset, x, bandwidths, grid, smoothed).triple(y0)


def weighted_quantile(dataset: Dataset, d: int, tau_q: float, x: Optional[Sequence[float]] = None,
                      bandwidths: Optional[Bandwidths] = None) -> float:
    return _estimator(dataset, x, bandwidths, None, smoothed=False).quantile(d, tau_q)
