# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled descriptor kernel.

Scalar twin of ``_kernels_py``: same accumulation order (ascending byte
index, float64, division by 255.0 before squaring) so results are
bit-identical between engines.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ENGINE_NAME = "compiled"


def block_min_ssd(bytes data, int u, int half, int m, int n, bint scaled):
    cdef const unsigned char[::1] b = data
    cdef Py_ssize_t length = b.shape[0]
    cdef Py_ssize_t n_centers = 0
    if length >= u:
        n_centers = (length - u) // u + 1

    cdef int bins = m * n
    out_arr = np.full((n_centers, bins), np.inf, dtype=np.float64)
    centers_arr = np.arange(0, length - u + 1 if length >= u else 0, u, dtype=np.int64)
    if n_centers == 0:
        return out_arr, centers_arr

    cdef double[:, ::1] out = out_arr
    cdef int ang_neg = 0 if m == 1 else m // 2
    cdef Py_ssize_t ci, c, s, i
    cdef int gap, radial, g, col
    cdef double acc, diff

    with nogil:
        for ci in range(n_centers):
            c = ci * u
            for gap in range(1, half + 1):
                # radial bin: floor(log2(gap)) clamped to n - 1
                radial = 0
                g = gap
                while g > 1:
                    g >>= 1
                    radial += 1
                if radial > n - 1:
                    radial = n - 1

                # candidate window starting right of the center
                s = c + gap
                if s + u <= length:
                    acc = 0.0
                    for i in range(u):
                        diff = <double> b[c + i] - <double> b[s + i]
                        if scaled:
                            diff = diff / 255.0
                        acc += diff * diff
                    col = radial  # angular sector 0
                    if acc < out[ci, col]:
                        out[ci, col] = acc

                # candidate window starting left of the center
                s = c - gap
                if s >= 0:
                    acc = 0.0
                    for i in range(u):
                        diff = <double> b[c + i] - <double> b[s + i]
                        if scaled:
                            diff = diff / 255.0
                        acc += diff * diff
                    col = ang_neg * n + radial
                    if acc < out[ci, col]:
                        out[ci, col] = acc

    return out_arr, centers_arr
