"""Social burden auditing and burden-gap-constrained training for
strategic classification."""

__version__ = "0.1.0"
