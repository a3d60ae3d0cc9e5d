"""
Shared fixtures: small hand-checkable samples and coefficient triples with closed-form programs
"""

import os
import sys

import numpy as np
import pytest

# Add repository root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from qtebounds.models.dataset_models import Dataset, InstrumentSupport  # noqa: E402
from qtebounds.models.estimate_models import CdfKind, make_triple  # noqa: E402
from qtebounds.models.sim_models import SimParams  # noqa: E402


@pytest.fixture
def quadratic_triple():
    """F(y) = 0.6 − y²/2, Δ₁(y) = 0.5y, Δ₀ = 0.1 on 201 points of [−1, 1]

    Upper value 0.58 attained through the active point y = −0.2; lower value 0.1 with dual mass
    0.6 at −1 and 0.4 at +1. Q(θ₂) = 0.6 + θ₂²/8 − 0.1θ₂ off the grid.
    """
    grid = np.linspace(-1.0, 1.0, 201)
    return make_triple(0.0, [0.1], (0.5 * grid).reshape(1, -1), grid, 0.6 - grid ** 2 / 2,
                       kind=CdfKind.SMOOTHED)


@pytest.fixture
def tiny_dataset():
    """Eight rows, two per (d, z) cell"""
    return Dataset(
        y=np.array([0.3, 1.1, -0.4, 0.9, 1.7, 0.2, 2.3, -0.8]),
        d=np.array([1, 1, 0, 0, 1, 1, 0, 0]),
        z_index=np.array([0, 0, 0, 0, 1, 1, 1, 1]),
        support=InstrumentSupport((0.0, 1.0)),
    )


@pytest.fixture
def irrelevant_instrument_dataset():
    """Both instrument cells hold the same rows, so every Δ̂ vanishes identically"""
    y = np.array([0.1, 0.4, 0.5, 0.9, 1.3, -0.2, 0.7, 1.8, 2.2, 0.0])
    d = np.array([1, 0, 1, 0, 1, 0, 1, 0, 1, 0])
    return Dataset(
        y=np.concatenate([y, y]),
        d=np.concatenate([d, d]),
        z_index=np.repeat([0, 1], y.size),
        support=InstrumentSupport((0.0, 1.0)),
    )


@pytest.fixture
def constant_outcome_dataset():
    """Y ≡ 1; treated share 25% at z = 0 and 75% at the reference z = 1 (n = 400)"""
    d_z0 = np.r_[np.ones(50), np.zeros(150)]
    d_z1 = np.r_[np.ones(150), np.zeros(50)]
    return Dataset(
        y=np.ones(400),
        d=np.concatenate([d_z0, d_z1]).astype(int),
        z_index=np.repeat([0, 1], 200),
        support=InstrumentSupport((0.0, 1.0)),
    )


@pytest.fixture
def sim_params():
    return SimParams(n=400, n_instruments=2, seed=11)


@pytest.fixture
def tiny_csv(tmp_path, tiny_dataset):
    path = tmp_path / 'tiny.csv'
    rows = ["y,d,z"] + [f"{float(y)!r},{int(d)},{float(z)!r}"
                        for y, d, z in zip(tiny_dataset.y, tiny_dataset.d, tiny_dataset.z)]
    path.write_text("\n".join(rows) + "\n", encoding='utf-8')
    return path


@pytest.fixture
def ball_binding_dataset():
    """Three instrument values with separated outcome ranges, 60 rows per instrument value

    The treated contrast for z = 0 is nonnegative at every y while the untreated contrast at
    y0 = 1.5 is 0.2, so (0, 1, 0) recedes in both programs and both stop on the ℓ2 ball.
    """
    cells = [
        (0, 1, np.linspace(0.0, 1.0, 48)), (0, 0, np.linspace(0.05, 0.95, 12)),
        (1, 1, np.linspace(0.1, 2.9, 30)), (1, 0, np.linspace(0.0, 3.0, 30)),
        (2, 1, np.linspace(2.0, 3.0, 12)), (2, 0, np.linspace(2.05, 2.95, 48)),
    ]
    return Dataset(
        y=np.concatenate([y for _, _, y in cells]),
        d=np.concatenate([np.full(y.size, d) for _, d, y in cells]),
        z_index=np.concatenate([np.full(y.size, z) for z, _, y in cells]),
        support=InstrumentSupport((0.0, 0.5, 1.0)),
    )


@pytest.fixture
def offgrid_quadratic_triple():
    """quadratic_triple with Δ₀ = 0.1025: the tangency y = −0.205 falls between grid points

    The dual splits its mass equally between −0.21 and −0.20; the upper value is 0.578975.
    """
    grid = np.linspace(-1.0, 1.0, 201)
    return make_triple(0.0, [0.1025], (0.5 * grid).reshape(1, -1), grid, 0.6 - grid ** 2 / 2,
                       kind=CdfKind.SMOOTHED)


@pytest.fixture
def quartic_triple_at():
    """Builder of L = 3 triples F(y) = 0.3 + y²/4, Δ₁(y) = (y/2, −y⁴/10), Δ₀ = (0, a⁴/10)

    The upper program touches at ±a with mass 1/2 each and γ* = (0.3 + a²/8, 0, −1.25/a²).
    With θ₂ = γ₂, Q(θ₂) = 0.3 − 0.15625/θ₂ − θ₂a⁴/10 and the touching points are ±√(−1.25/θ₂).
    """
    grid = np.linspace(-1.0, 1.0, 201)

    def build(a: float):
        delta1 = np.vstack([0.5 * grid, -0.1 * grid ** 4])
        return make_triple(0.0, [0.0, 0.1 * a ** 4], delta1, grid, 0.3 + 0.25 * grid ** 2,
                           kind=CdfKind.SMOOTHED)

    return build
