"""Phase-coherent 2D spectroscopy of trapped-ion polariton chains.

Simulates a small Jaynes-Cummings-Hubbard chain under collective
dephasing, applies a post-selected three-pulse protocol, and turns the
resulting delay scans into 2D spectra with stick-spectrum predictions
for every resonance.

Frequencies in configs are linear kHz; everything internal is angular
(rad/ms). Times are ms throughout.
"""

__version__ = "0.1.0"

from .hilbert import Basis, BasisError, BasisSpec, build_basis
from .model import ModelParams, equilibrium_positions, phonon_network
from .protocol import DelayAxis, SequenceConfig, build_context, scan_signal
from .spectra import fourier_2d, find_peaks, lineshape_report, stick_spectrum

__all__ = [
    "__version__",
    "Basis",
    "BasisError",
    "BasisSpec",
    "build_basis",
    "ModelParams",
    "equilibrium_positions",
    "phonon_network",
    "DelayAxis",
    "SequenceConfig",
    "build_context",
    "scan_signal",
    "fourier_2d",
    "find_peaks",
    "lineshape_report",
    "stick_spectrum",
]
