"""Torsional rigidity of Brownian-fractured cylinders.

Deterministic spectral series live in :mod:`fracrig.spectral`, exact
geometry and trace handling in :mod:`fracrig.geometry`, path sampling in
:mod:`fracrig.stochastic`, walk-on-spheres potential-theory estimators in
:mod:`fracrig.potential`, and the headline bound experiments in
:mod:`fracrig.experiments`.  ``fracrig.cli`` exposes all of it as a
command line tool.
"""

__version__ = "0.1.0"
