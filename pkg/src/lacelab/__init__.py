"""Bond percolation laboratory for the hypercube Q_n and the torus."""

__version__ = "0.1.0"
