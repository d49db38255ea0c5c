"""Heat conduction in pinned anharmonic chains: Langevin simulation and a
discrete-time polymer expansion with numerical certificates."""

__version__ = "0.1.0"
