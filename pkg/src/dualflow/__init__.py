"""dualflow: branching-dual voting simulations and level-set MCF verification."""

__version__ = "0.1.0"
