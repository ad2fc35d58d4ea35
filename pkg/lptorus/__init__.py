"""
Littlewood-Paley calculus and Euler commutator estimates on the 2-torus.
"""

from importlib.metadata import version

from .config import RunConfiguration, init_seed, make_rng, params  # noqa: F401
from . import examples  # noqa: F401
from .bank import LPBank, build_bank, reconstruct  # noqa: F401
from .commutator import (  # noqa: F401
    ConvOp,
    commutator_direct,
    commutator_kernel,
    commutator_norm_scan,
    commutator_second,
)
from .euler import EulerSnapshot, advective_derivative, analysis_table  # noqa: F401
from .field import Field, TimeJet, TorusGrid  # noqa: F401
from .scan import QUANTITIES, ScanReport, scan  # noqa: F401
from .sim import SimConfig, SnapshotSeries, load_series, simulate  # noqa: F401
from .synth import synth_lacunary  # noqa: F401
from .trajectory import integrate_flow, taylor_check  # noqa: F401
from .verify import verify  # noqa: F401

__all__ = [
    "TorusGrid",
    "Field",
    "TimeJet",
    "LPBank",
    "build_bank",
    "reconstruct",
    "EulerSnapshot",
    "advective_derivative",
    "analysis_table",
    "ConvOp",
    "commutator_direct",
    "commutator_kernel",
    "commutator_second",
    "commutator_norm_scan",
    "SimConfig",
    "SnapshotSeries",
    "simulate",
    "load_series",
    "synth_lacunary",
    "scan",
    "ScanReport",
    "QUANTITIES",
    "integrate_flow",
    "taylor_check",
    "verify",
    "RunConfiguration",
    "params",
    "init_seed",
    "make_rng",
    "examples",
]

__version__ = version(__name__)
