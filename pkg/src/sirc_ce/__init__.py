"""Cross-entropy optimization of SIRC epidemic controls, with rank-selection
and stochastic vehicle routing companions."""

__version__ = "0.1.0"
