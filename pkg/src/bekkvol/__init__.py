"""Bivariate VAR(1)-BEKK(1,1) volatility modelling."""
