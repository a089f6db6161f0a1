"""simviz: spatial similarity-map decomposition, rendering, and
region-restricted retrieval for pooled embedding networks."""

from . import cli, render, retrieval, simcore, tensorio, toyextract  # noqa: F401

__version__ = "0.1.0"
