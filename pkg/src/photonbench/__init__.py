"""photonbench: a virtual confocal single-photon microscope.

Simulates nanodiamond NV-center samples, two instrument profiles (a
high-NA reference confocal and a Blu-ray pickup based low-cost setup),
Hanbury Brown-Twiss photon timestamp streams, and the offline toolkit to
go with them: a high-throughput timestamp correlator and nonlinear
least-squares fits for antibunching dips, beam waists and scan images.
"""

__version__ = "0.1.0"

from . import actuation, analysis, correlator, detection, emitters, fitting, optics, profiles, scanning

__all__ = [
    "actuation",
    "analysis",
    "correlator",
    "detection",
    "emitters",
    "fitting",
    "optics",
    "profiles",
    "scanning",
    "__version__",
]
