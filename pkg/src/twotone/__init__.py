"""Wireless reference-clock distribution with a frequency-hopped two-tone waveform.

A leader emits two tones spaced by the reference frequency and hops their
center; followers self-mix, band-pass and level the beat to recover the
reference without knowing the hop pattern.
"""

from .errors import AnalysisError, ConfigurationError, StageError
from .rng import Rng, rng_next, substream
from .scenario import Scenario, load_scenario, scenario_digest

__all__ = [
    "AnalysisError",
    "ConfigurationError",
    "Rng",
    "Scenario",
    "StageError",
    "load_scenario",
    "rng_next",
    "scenario_digest",
    "substream",
]
