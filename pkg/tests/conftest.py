import numpy as np
import pytest

from cssplc.core import ComplexSignal, CssParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_params(sf=7, p=1, q=1, bw=125e3, es=1.0):
    return CssParams(
        sf=sf,
        bandwidth_hz=bw,
        superbin_size_p=p,
        averaging_depth_q=q,
        symbol_energy_es=es,
    )


def noisy(signal, rng, sigma2):
    scale = np.sqrt(sigma2 / 2.0)
    noise = scale * (rng.standard_normal(len(signal)) + 1j * rng.standard_normal(len(signal)))
    return ComplexSignal(signal.samples + noise, signal.sample_rate_hz)
