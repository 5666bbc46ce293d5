"""streamgov: temporal, spectral and spatial analysis of daily streamflow
collections.

Submodules
----------
ingest      loading, validation, gap handling, detrending
temporal    trajectory affinity matrices and hierarchical clustering
spectral    periodogram / Welch estimation and Whittle-deviance selection
alignment   governing-process estimation via integer offset alignment
evolution   rolling correlation eigenstructure and rolling PSD
spatial     geodesic distances, K-means, elbow selection
synth       deterministic synthetic collections with ground truth
cli         the ``streamgov`` command-line front end
"""
from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
