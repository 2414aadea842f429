"""Pseudo-spectral simulator and semiclassical-analysis toolkit for the
modified 2D critical Schrodinger equation with dispersion relation
F(xi) = F1(xi1) + F2(xi2) and nonlinearity lam*|u|u."""

__version__ = "0.1.0"
