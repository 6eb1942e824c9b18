"""Finite XY chains: fermionic sector spectra, exact diagonalization, ground-state
geometry, finite-size scaling and (gamma, h) phase scans."""

from .chain import ChainParams, RegionLabel, RegionTag, Sector, canonicalize, classify_region
from .exact import CaseLabel, classify_case, parity_resolved_spectrum
from .fermions import delta_gs, enumerate_many_body, sector_ground_energy
from .geometry import qgt_components, ricci_scalar
from .scaling import build_series, classify_decay

__all__ = [
    "CaseLabel",
    "ChainParams",
    "RegionLabel",
    "RegionTag",
    "Sector",
    "build_series",
    "canonicalize",
    "classify_case",
    "classify_decay",
    "classify_region",
    "delta_gs",
    "enumerate_many_body",
    "parity_resolved_spectrum",
    "qgt_components",
    "ricci_scalar",
    "sector_ground_energy",
]

__version__ = "0.1.0"
