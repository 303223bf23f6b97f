"""Numerical lab for the 2D Allen-Cahn energy and weighted separating networks.

Pipeline: multi-well potential -> 1D heteroclinic connections (surface
tensions) -> 2D energy minimization on a masked grid -> diffuse-interface
extraction -> network optimization -> explicit upper-bound test maps ->
cross-validation of the scaling bounds.

Submodules are imported explicitly, e.g. ``from acnets import potential``.
"""

__version__ = "0.1.0"
