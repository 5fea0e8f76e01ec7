from __future__ import annotations

from .base import EntryLaw, InitialLaw
from .entries import GaussianEntries, RademacherEntries, UniformEntries
from .initial import GaussInit, LaplaceInit, SkewInit, UniformInit

_ENTRY_LAWS = {
    "gaussian": GaussianEntries,
    "rademacher": RademacherEntries,
    "uniform": UniformEntries,
}

_INITIAL_LAWS = {
    "gauss": GaussInit,
    "uniform": UniformInit,
    "laplace": LaplaceInit,
    "skew": SkewInit,
}


def create_entry_law(name: str) -> EntryLaw:
    try:
        return _ENTRY_LAWS[name]()
    except KeyError:
        raise ValueError(f"Unknown entry family: {name}") from None


def create_initial_law(name: str, v0: float) -> InitialLaw:
    if v0 <= 0:
        raise ValueError("v0 must be positive")
    try:
        return _INITIAL_LAWS[name](v0=float(v0))
    except KeyError:
        raise ValueError(f"Unknown initial density: {name}") from None
