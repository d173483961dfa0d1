"""QED corrections to Abraham and Aharonov-Casher momenta of hydrogenic Rydberg states."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"
