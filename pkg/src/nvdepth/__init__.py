"""Depth of shallow NV centres from nanoscale NMR contrast dips."""

from . import core, linewidth, model, oracle, pipeline
from .core import (
    MAGIC_ANGLE,
    PROTON_GAMMA,
    NuclearSample,
    NvCenter,
    PhysicalConstants,
    PulseSequence,
    SemiInfinite,
    Slab,
    StaticField,
    larmor_frequency,
)

__version__ = "0.1.0"

__all__ = [
    "core",
    "model",
    "oracle",
    "pipeline",
    "linewidth",
    "MAGIC_ANGLE",
    "PROTON_GAMMA",
    "NuclearSample",
    "NvCenter",
    "PhysicalConstants",
    "PulseSequence",
    "SemiInfinite",
    "Slab",
    "StaticField",
    "larmor_frequency",
]
