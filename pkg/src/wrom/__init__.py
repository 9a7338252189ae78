"""Data-driven reduced order models for waveform inversion at desk scale.

The package maps co-located array recordings of acoustic waves to the
symmetrized data series whose samples are Gram inner products of interior
wave snapshots, assembles mass/stiffness matrices from those samples,
factorizes them blockwise, and projects the wave propagator and wave
operator onto the (unknown) snapshot space. The resulting reduced models
drive waveform-inversion objectives with far better landscapes than the
classical least-squares data fit, and extend to passive recordings via
noise cross correlations.
"""

from .dataseries import DataSeries, build_data_series, restrict_series
from .fdtd import ResponseRecord, SimulationConfig, gather_response_matrix
from .geometry import ArrayGeometry, Grid2D, Medium, homogeneous_medium
from .rom import RomPair, build_rom, verify_data_fit
from .signals import SignalSpec

__all__ = [
    "ArrayGeometry",
    "DataSeries",
    "Grid2D",
    "Medium",
    "ResponseRecord",
    "RomPair",
    "SignalSpec",
    "SimulationConfig",
    "build_data_series",
    "build_rom",
    "gather_response_matrix",
    "homogeneous_medium",
    "restrict_series",
    "verify_data_fit",
]

__version__ = "0.1.0"
