"""Stationary fluid-structure equilibria of a channel flow past an elastic beam."""
