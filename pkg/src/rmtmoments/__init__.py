"""Moment-method toolkit for Wigner and band random matrices.

Submodules: :mod:`ensembles` (graphs, entry laws, sampling),
:mod:`spectra` (eigenvalues, measures, rescaling, distances),
:mod:`moments` (raw and modified moments, reference values, bounds),
:mod:`paths` (exact walk oracles), :mod:`polytope` and :mod:`diagrams`
(diagram catalog, polytope volumes, the edge transform series) and
:mod:`cli` (the experiment runner).
"""

__version__ = "0.1.0"
