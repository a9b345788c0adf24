# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-frame demodulation hot kernels.

Fused single-pass versions of the numpy fallbacks in `py_kernels.py`:
the superbin reduction computes |y|^2 and the block sums without
materializing intermediate arrays, which is where the batched numpy
pipeline spends most of its non-FFT time.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()


def dechirp_frames(cnp.complex128_t[:, ::1] frames, cnp.complex128_t[::1] reference):
    cdef Py_ssize_t f = frames.shape[0]
    cdef Py_ssize_t m = frames.shape[1]
    if reference.shape[0] != m:
        raise ValueError("reference length does not match frame width")
    out_arr = np.empty((f, m), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(f):
            for j in range(m):
                out[i, j] = frames[i, j] * reference[j]
    return out_arr


def superbin_energies_frames(cnp.complex128_t[:, ::1] spectra, Py_ssize_t p):
    cdef Py_ssize_t f = spectra.shape[0]
    cdef Py_ssize_t m = spectra.shape[1]
    if p < 1 or m % p != 0:
        raise ValueError("superbin size must divide the spectrum length")
    cdef Py_ssize_t g = m // p
    out_arr = np.empty((f, g), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, b, j, base
    cdef double acc, re, im
    with nogil:
        for i in range(f):
            for b in range(g):
                acc = 0.0
                base = b * p
                for j in range(base, base + p):
                    re = spectra[i, j].real
                    im = spectra[i, j].imag
                    acc += re * re + im * im
                out[i, b] = acc
    return out_arr


def argmax_frames(cnp.float64_t[:, ::1] values):
    cdef Py_ssize_t f = values.shape[0]
    cdef Py_ssize_t g = values.shape[1]
    if g == 0:
        raise ValueError("cannot take argmax of empty rows")
    out_arr = np.empty(f, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t i, j, best
    cdef double best_val
    with nogil:
        for i in range(f):
            best = 0
            best_val = values[i, 0]
            for j in range(1, g):
                if values[i, j] > best_val:
                    best_val = values[i, j]
                    best = j
            out[i] = best
    return out_arr
