# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_kernels_py``; identical arithmetic, typed loops."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _smix(uint64_t z) nogil:
    z = z + _GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _mix(uint64_t h, int64_t v) nogil:
    return _smix(h ^ (<uint64_t>v * _GOLDEN))


def mix64(h, v):
    return _mix(<uint64_t>(h & 0xFFFFFFFFFFFFFFFF), <int64_t>v)


def local_markov_predict(const int64_t[::1] positions, const int64_t[::1] tokens,
                         const int64_t[::1] rows, int64_t radius, seed, int64_t vocab,
                         int64_t eos_permille, int64_t mask_id, int64_t eos_id,
                         int64_t first_regular, double conf_floor, double conf_ceil,
                         double exponent):
    cdef Py_ssize_t n = positions.shape[0]
    cdef Py_ssize_t nq = rows.shape[0]
    out_tok_arr = np.empty(nq, dtype=np.int64)
    out_conf_arr = np.empty(nq, dtype=np.float64)
    cdef int64_t[::1] out_tok = out_tok_arr
    cdef double[::1] out_conf = out_conf_arr
    cdef uint64_t useed = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef double span = conf_ceil - conf_floor
    cdef uint64_t n_regular = <uint64_t>(vocab - first_regular)
    cdef Py_ssize_t i, j, r
    cdef int64_t q, n_c, n_m
    cdef uint64_t h, acc
    cdef double frac
    with nogil:
        for i in range(nq):
            r = rows[i]
            q = positions[r]
            h = _mix(useed, q)
            acc = 0
            n_c = 0
            n_m = 0
            j = r - 1
            while j >= 0 and q - positions[j] <= radius:
                if tokens[j] == mask_id:
                    n_m += 1
                else:
                    n_c += 1
                    acc += _smix(((<uint64_t>(positions[j] - q) << 32) ^ <uint64_t>tokens[j]) * _GOLDEN)
                j -= 1
            j = r + 1
            while j < n and positions[j] - q <= radius:
                if tokens[j] == mask_id:
                    n_m += 1
                else:
                    n_c += 1
                    acc += _smix(((<uint64_t>(positions[j] - q) << 32) ^ <uint64_t>tokens[j]) * _GOLDEN)
                j += 1
            h = _mix(h, <int64_t>acc)
            h = _mix(h, n_m)
            h = _mix(h, positions[n - 1] - q)
            h = _mix(h, tokens[n - 1])
            if n_c + n_m:
                frac = <double>n_c / <double>(n_c + n_m)
            else:
                frac = 0.0
            out_conf[i] = conf_floor + span * pow(frac, exponent)
            if h % 1000 < <uint64_t>eos_permille:
                out_tok[i] = eos_id
            else:
                out_tok[i] = first_regular + <int64_t>((h >> 16) % n_regular)
    return out_tok_arr, out_conf_arr
