"""Regularization-by-noise numerical laboratory."""

from ._rbnlab import (
    DomainError,
    NumericalFailure,
    RegimeRefusal,
    classify_regime,
    config_hash,
    default_config,
    fbm_covariance,
    kinds,
    run_experiment,
    sample_fbm,
    set_thread_count,
    version,
)

__version__ = version()

__all__ = [
    "DomainError",
    "NumericalFailure",
    "RegimeRefusal",
    "classify_regime",
    "config_hash",
    "default_config",
    "fbm_covariance",
    "kinds",
    "run_experiment",
    "sample_fbm",
    "set_thread_count",
    "version",
]
