"""
Configuration Management
Loads solver, estimation and runtime defaults from a .env file or environment variables
"""

import os
from pathlib import Path
from typing import Any, Dict, List

from dotenv import load_dotenv

# Load environment variables from .env file at the repository root
env_path = Path(__file__).resolve().parent.parent / '.env'
load_dotenv(env_path)


class Config:
    """Configuration class for the bound and inference engine"""

    # SILP settings
    DEFAULT_TAU = float(os.getenv('QTEB_TAU', '100'))
    MAX_CUTS = int(os.getenv('QTEB_MAX_CUTS', '100'))
    MAX_SIMPLEX_ITER = int(os.getenv('QTEB_MAX_SIMPLEX_ITER', '10000'))

    # Solver tolerances
    FEAS_TOL = float(os.getenv('QTEB_FEAS_TOL', '1e-9'))
    GAP_TOL = float(os.getenv('QTEB_GAP_TOL', '1e-8'))
    ACT_TOL = float(os.getenv('QTEB_ACT_TOL', '1e-7'))
    MASS_TOL = float(os.getenv('QTEB_MASS_TOL', '1e-9'))
    BALL_TOL = float(os.getenv('QTEB_BALL_TOL', '1e-8'))

    # Estimation settings
    GRID_CAP = int(os.getenv('QTEB_GRID_CAP', '2048'))
    MIN_CELL_SIZE = int(os.getenv('QTEB_MIN_CELL', '2'))
    MARGIN_MIN = float(os.getenv('QTEB_MARGIN_MIN', '0.05'))

    # Inference settings
    KAPPA = float(os.getenv('QTEB_KAPPA', '0.5'))
    SOLUTION_SET_CAP = int(os.getenv('QTEB_SOLUTION_SET_CAP', '50'))
    VALUE_TOL = float(os.getenv('QTEB_VALUE_TOL', '1e-7'))

    # Runtime settings
    N_WORKERS = int(os.getenv('QTEB_N_WORKERS', '1'))
    DEFAULT_OUTPUT_DIR = os.getenv('QTEB_OUTPUT_DIR', 'data/results')

    # Logging Settings
    LOG_LEVEL = os.getenv('QTEB_LOG_LEVEL', 'INFO')
    LOG_RETENTION_DAYS = int(os.getenv('QTEB_LOG_RETENTION_DAYS', '7'))

    @classmethod
    def validate(cls) -> List[str]:
        """Validate configuration"""
        errors = []

        if not cls.DEFAULT_TAU > 0:
            errors.append("QTEB_TAU must be positive")

        for name in ('FEAS_TOL', 'GAP_TOL', 'ACT_TOL', 'MASS_TOL', 'BALL_TOL', 'VALUE_TOL'):
            if not getattr(cls, name) > 0:
                errors.append(f"QTEB_{name} must be positive")

        if cls.GRID_CAP < 2:
            errors.append("QTEB_GRID_CAP must be at least 2")

        if cls.MIN_CELL_SIZE < 1:
            errors.append("QTEB_MIN_CELL must be at least 1")

        if not 0 < cls.KAPPA <= 1:
            errors.append("QTEB_KAPPA must lie in (0, 1]")

        if cls.N_WORKERS < 1:
            errors.append("QTEB_N_WORKERS must be at least 1")

        return errors

    @classmethod
    def as_dict(cls) -> Dict[str, Any]:
        """Current configuration as a plain dictionary (for artifact headers)"""
        return {
            name.lower(): getattr(cls, name)
            for name in dir(cls)
            if name.isupper() and not name.startswith('_')
        }


# Create global config instance
config = Config()
