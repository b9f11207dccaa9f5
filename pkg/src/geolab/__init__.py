"""geolab: curvature of coordinate metrics, Penrose plane-wave limits,
Rosen/Brinkmann conversion and Wick-rotation identities."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import GeolabError  # noqa: E402
from .expr import differentiate, evaluate, parse, to_string  # noqa: E402
from .tensor import MetricSpec, curvature_at, metric_from_strings  # noqa: E402

__all__ = [
    "__version__",
    "GeolabError",
    "MetricSpec",
    "curvature_at",
    "differentiate",
    "evaluate",
    "metric_from_strings",
    "parse",
    "to_string",
]
