"""Exact detection statistics for two Fock-state condensates in a four-detector
interferometer: population oscillations versus the symmetry-broken baseline."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    InterferometerConfig,
    OutcomeRecord,
    SourceConfig,
    enumerate_outcomes,
    standard_mode_expansion,
)
