"""Chirp-spread-spectrum baseband toolkit for noisy multipath links.

Modulation and demodulation of cyclic-shift chirp symbols, superbin energy
detection with optional running-mean averaging, AWGN/multipath channel
models, closed-form decision-statistic models, and a seeded Monte Carlo
symbol-error-rate harness with a command-line front end.
"""

__version__ = "0.1.0"

from .core import ComplexSignal, CssParams  # noqa: F401
