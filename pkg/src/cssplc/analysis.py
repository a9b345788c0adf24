"""Closed-form models of the decision statistics, for prediction and for
cross-validation against Monte Carlo runs.

After dechirp + DFT, each noise bin's energy is exponentially distributed;
a superbin (sum of P bins) is Gamma-distributed and is approximated here as
Normal(P*mu, P*sigma2), where mu and sigma2 are the single-bin energy mean
and variance.  Averaging over Q frames narrows the variance to P*sigma2/Q.
The correct-symbol bin is Rician with shape k = Es/(2*sigma_branch^2) =
Es/N0, taking sigma_branch^2 = N0/2 per real branch; at superbin level its
mean is modeled as P*mu + Es with all dispersed multipath energy captured.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class NoiseModel:
    """Single-bin noise-energy statistics plus the grouping geometry."""

    mu: float
    sigma2: float
    p: int
    g_count: int
    q: int = 1

    def __post_init__(self):
        if not (self.mu > 0 and self.sigma2 > 0):
            raise ParameterError("mu and sigma2 must be positive")
        if self.p < 1 or self.g_count < 1 or self.q < 1:
            raise ParameterError("p, g_count and q must be >= 1")

    @property
    def superbin_mean(self):
        return self.p * self.mu

    @property
    def superbin_var(self):
        return self.p * self.sigma2

    @property
    def enhanced_var(self):
        return self.p * self.sigma2 / self.q


@dataclass(frozen=True)
class SignalBinModel:
    """Correct-symbol bin: constant amplitude in complex Gaussian noise."""

    es: float
    n0: float

    def __post_init__(self):
        if self.es < 0 or not self.n0 > 0:
            raise ParameterError("es must be >= 0 and n0 positive")

    @property
    def k_shape(self):
        """Rician shape parameter Es/N0 (branch variance N0/2)."""
        return self.es / self.n0


def expected_max_noise(model):
    """Approximate mean of the largest of g_count-1 noise superbins:
    sqrt(2*ln(g-1)) standard deviations above the superbin mean.

    Natural logarithm; validated against the empirical maximum rather than
    trusted blindly (see the test suite).
    """
    if model.g_count < 2:
        raise ParameterError("expected_max_noise needs at least 2 superbins")
    return model.superbin_mean + math.sqrt(2.0 * math.log(model.g_count - 1)) * math.sqrt(
        model.superbin_var
    )


def predict_separation(noise, sig):
    """Normalized distance between the correct-symbol and noise superbin
    means, in units of the averaged noise standard deviation.

    The correct superbin's mean is P*mu + Es (dispersed symbol energy fully
    captured), so the mean difference is Es and the separation grows as
    sqrt(Q).
    """
    return sig.es / math.sqrt(noise.enhanced_var)


@dataclass(frozen=True)
class HistogramSummary:
    mean: float
    variance: float
    quantiles: tuple
    bin_edges: np.ndarray
    counts: np.ndarray


DEFAULT_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def histogram_stats(samples, quantiles=DEFAULT_QUANTILES):
    """Deterministic summary of an energy sample set.

    Population variance (ddof=0), quantiles by linear interpolation, and
    histogram counts over Freedman-Diaconis bin edges so summaries of the
    same data are stable across runs.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("histogram_stats needs at least one sample")
    edges = np.histogram_bin_edges(x, bins="fd")
    counts, edges = np.histogram(x, bins=edges)
    qv = np.quantile(x, quantiles)
    return HistogramSummary(
        mean=float(x.mean()),
        variance=float(x.var()),
        quantiles=tuple(zip(quantiles, (float(v) for v in qv))),
        bin_edges=edges,
        counts=counts,
    )
