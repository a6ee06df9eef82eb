# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: spectral scatter/gather, fused gain accumulation and
the O(N^(2d)) direct kernel-mode sum."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def scatter_half(double complex[:, ::1] dest, const double complex[:, ::1] src,
                 weight, const Py_ssize_t[::1] row_map, Py_ssize_t N):
    cdef Py_ssize_t r, c, row
    cdef Py_ssize_t rows = src.shape[0]
    cdef const double[:, ::1] w
    if weight is None:
        with nogil:
            for r in range(rows):
                row = row_map[r]
                for c in range(N + 1):
                    dest[row, c] = src[r, N + c]
    else:
        w = weight
        with nogil:
            for r in range(rows):
                row = row_map[r]
                for c in range(N + 1):
                    dest[row, c] = src[r, N + c] * w[r, N + c]


def gather_half(double complex[:, ::1] out, const double complex[:, ::1] spec,
                const Py_ssize_t[::1] row_map, Py_ssize_t N):
    cdef Py_ssize_t r, c, row
    cdef Py_ssize_t rows = out.shape[0]
    cdef double complex z
    with nogil:
        for r in range(rows):
            row = row_map[r]
            for c in range(N + 1):
                out[r, N + c] = spec[row, c]
        for r in range(rows):
            for c in range(1, N + 1):
                z = out[rows - 1 - r, N + c]
                out[r, N - c] = z.real - 1j * z.imag


def accumulate_product(acc, double w, a, b):
    cdef double[::1] av = acc.reshape(-1)
    cdef const double[::1] xv = a.reshape(-1)
    cdef const double[::1] yv = b.reshape(-1)
    cdef Py_ssize_t i, size = av.shape[0]
    with nogil:
        for i in range(size):
            av[i] = av[i] + w * (xv[i] * yv[i])


cdef inline Py_ssize_t _lo(Py_ssize_t c, Py_ssize_t N) nogil:
    # smallest m with |m| <= N and |c + m| <= N
    return -N - c if c < 0 else -N


cdef inline Py_ssize_t _hi(Py_ssize_t c, Py_ssize_t N) nogil:
    return N - c if c > 0 else N


def direct_sum(cnp.ndarray table, cnp.ndarray f, int d, Py_ssize_t N):
    """``q_k = sum_{l+m=k} table[l, m] f_l f_m``.

    ``table`` must hold zeros wherever ``l + m`` leaves the lattice.  For a
    fixed ``l`` the flat index of ``k`` is the flat index of ``m`` plus a
    constant, so every valid ``m`` lies in one contiguous run and the gaps
    inside that run contribute exact zeros.
    """
    if not (cnp.PyArray_IS_C_CONTIGUOUS(table) and cnp.PyArray_IS_C_CONTIGUOUS(f)):
        raise ValueError("direct_sum needs C-contiguous inputs")
    if table.dtype != np.float64 or f.dtype != np.complex128:
        raise TypeError("direct_sum needs a float64 table and complex128 coefficients")
    cdef Py_ssize_t n = 2 * N + 1
    cdef Py_ssize_t size = f.shape[0]
    if table.shape[0] != size or table.shape[1] != size or size != n ** d:
        raise ValueError("table shape does not match the coefficient count")
    cdef cnp.ndarray out = np.zeros(size, dtype=np.complex128)
    cdef double* q = <double*> cnp.PyArray_DATA(out)
    cdef const double* fr = <const double*> cnp.PyArray_DATA(f)
    cdef const double* tab = <const double*> cnp.PyArray_DATA(table)
    cdef const double* row
    cdef Py_ssize_t l, m, c, first, last, shift, stride
    cdef Py_ssize_t idx[3]
    cdef double ar, ai, t
    if d < 1 or d > 3:
        raise ValueError("direct_sum supports d = 1, 2, 3")
    with nogil:
        for c in range(d):
            idx[c] = -N
        for l in range(size):
            ar = fr[2 * l]
            ai = fr[2 * l + 1]
            if ar != 0.0 or ai != 0.0:
                row = tab + l * size
                first = 0
                last = 0
                shift = 0
                stride = 1
                for c in range(d - 1, -1, -1):
                    shift += idx[c] * stride
                    first += (_lo(idx[c], N) + N) * stride
                    last += (_hi(idx[c], N) + N) * stride
                    stride *= n
                for m in range(first, last + 1):
                    t = row[m]
                    q[2 * (m + shift)] += t * (ar * fr[2 * m] - ai * fr[2 * m + 1])
                    q[2 * (m + shift) + 1] += t * (ar * fr[2 * m + 1] + ai * fr[2 * m])
            # advance the mode multi-index of l, last axis fastest
            c = d - 1
            idx[c] += 1
            while c > 0 and idx[c] > N:
                idx[c] = -N
                c -= 1
                idx[c] += 1
    return out
