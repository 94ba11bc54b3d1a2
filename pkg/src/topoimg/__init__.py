"""Topological-derivative imaging of scatterers from multistatic microwave data."""

from .errors import (
    ChecksumError,
    ConvergenceError,
    DomainError,
    FormatVersionError,
    GridMismatchError,
    ParseError,
    RankDeficientError,
    TopoImgError,
    ZeroNormalizerError,
)
from .geometry import FrequencySweep, Layout2D, Layout3D, wavenumber
from .dataset import Dataset, Record, load, save
from .topofield import InspectionGrid, MaterialSpec, ScalarGrid, evaluate_grid

__version__ = "0.1.0"
