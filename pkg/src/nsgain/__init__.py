"""Pseudospectral 2D Navier-Stokes with Littlewood-Paley verification tools."""
