"""Enclosure-method reconstruction of sound-hard polygons and cracks from far-field data."""

import importlib

__version__ = "0.1.0"

# re-exports load lazily so the CLI can set BLAS thread variables before numpy starts
_EXPORTS = {
    "CrackSet": "geometry",
    "Direction": "geometry",
    "PolygonalObstacle": "geometry",
    "support_function": "geometry",
    "ScheduleParams": "herglotz",
    "density_coeffs": "herglotz",
    "tau_schedule": "herglotz",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(importlib.import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
