"""
Partial identification of quantile treatment effects on the treated with a discrete instrument.
Bounds come from regularized semi-infinite linear programs solved by a cutting-plane simplex.
"""

__version__ = "1.0.0"
SCHEMA_VERSION = "1"
