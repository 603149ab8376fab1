"""Random wavelet series: Besov priors, sequence norms and regularity experiments."""

__version__ = "0.1.0"
