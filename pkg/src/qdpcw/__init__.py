"""Single quantum emitters in photonic-crystal waveguides: simulation and analysis."""

__version__ = "0.1.0"
