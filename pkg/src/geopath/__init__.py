"""Random-background geodesic deviation, phase-summed kernels and a Schrodinger-analogue solver."""

__version__ = "0.1.0"
