"""Pure-numpy implementations of the per-frame demodulation hot kernels.

Mirror of the compiled extension in `_kernels.pyx`; same signatures, same
results up to floating-point summation order.
"""

import numpy as np


def dechirp_frames(frames, reference):
    """Multiply each row of `frames` (F, M) by the dechirp `reference` (M,)."""
    return frames * reference[None, :]


def superbin_energies_frames(spectra, p):
    """Per-frame superbin energies: |y|^2 summed over blocks of p bins.

    spectra: complex (F, M) with p dividing M; returns float64 (F, M // p).
    """
    f, m = spectra.shape
    mags = spectra.real ** 2 + spectra.imag ** 2
    return mags.reshape(f, m // p, p).sum(axis=2)


def argmax_frames(values):
    """Row-wise argmax of a float64 (F, G) array; lowest index wins ties."""
    return np.argmax(values, axis=1).astype(np.int64)
