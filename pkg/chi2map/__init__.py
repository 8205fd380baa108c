"""
chi2map: explicit feature maps for the chi2 and exponential-chi2 kernels,
with out-of-core PCA and ridge regression on top.
"""

__version__ = "0.1.0"
