"""
hopfduet - two identical coupled oscillators near Hopf bifurcation.

Truncated coupled-Hopf normal form with its analytic bifurcation taxonomy,
the coupled and periodically forced Wilson-Cowan pair, numerical extraction
of normal-form coefficients, and simulation/continuation tooling.
"""

try:
    from importlib.metadata import PackageNotFoundError, version

    try:
        __version__ = version("hopfduet")
    except PackageNotFoundError:
        # Package is not installed, use a default version
        __version__ = "0.1.0"
except ImportError:
    __version__ = "0.1.0"
