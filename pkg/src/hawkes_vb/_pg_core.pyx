# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Polya-Gamma PG(1, c) sampler.

Same exact alternating-series rejection sampler as ``_pg_fallback`` but
drawing uniforms straight from the numpy bit generator, which makes bulk
draws roughly two orders of magnitude faster.  The uniform stream and all
floating-point operations mirror the fallback exactly, so both backends
produce bitwise-identical output for the same seed.
"""

from libc.math cimport M_PI, cos, erfc, exp, log, pow, sqrt

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t

cnp.import_array()

BACKEND_NAME = "cython"

cdef double _TRUNC = 0.64
cdef double _HALF_PI2 = M_PI * M_PI / 8.0
cdef double _NEG_INF = float("-inf")


cdef inline double _u(bitgen_t *bg) noexcept:
    return bg.next_double(bg.state)


cdef inline double _log_norm_cdf(double x) noexcept:
    cdef double p = 0.5 * erfc(-x / sqrt(2.0))
    if p <= 0.0:
        return _NEG_INF
    return log(p)


cdef inline double _series_coef(int n, double x) noexcept:
    cdef double k = (n + 0.5) * M_PI
    if x > _TRUNC:
        return k * exp(-0.5 * k * k * x)
    return k * pow(0.5 * M_PI * x, -1.5) * exp(-2.0 * (n + 0.5) * (n + 0.5) / x)


cdef inline double _right_piece_mass(double z) noexcept:
    cdef double fz = _HALF_PI2 + 0.5 * z * z
    cdef double rt = sqrt(1.0 / _TRUNC)
    cdef double x0 = log(fz) + fz * _TRUNC
    cdef double xb = x0 - z + _log_norm_cdf(rt * (_TRUNC * z - 1.0))
    cdef double xa = x0 + z + _log_norm_cdf(-rt * (_TRUNC * z + 1.0))
    cdef double qdivp = 4.0 / M_PI * (exp(xb) + exp(xa))
    return 1.0 / (1.0 + qdivp)


cdef double _trunc_inv_gauss(double z, bitgen_t *bg) noexcept:
    cdef double t = _TRUNC
    cdef double e1, e2, x, mu, u1, u2, nrm, y
    if z * t < 1.0:
        while True:
            while True:
                e1 = -log(1.0 - _u(bg))
                e2 = -log(1.0 - _u(bg))
                if e1 * e1 <= 2.0 * e2 / t:
                    break
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            if _u(bg) <= exp(-0.5 * z * z * x):
                return x
    mu = 1.0 / z
    while True:
        u1 = _u(bg)
        u2 = _u(bg)
        nrm = sqrt(-2.0 * log(1.0 - u1)) * cos(2.0 * M_PI * u2)
        y = nrm * nrm
        x = mu + 0.5 * mu * mu * y - 0.5 * mu * sqrt(4.0 * mu * y + (mu * y) * (mu * y))
        if _u(bg) > mu / (mu + x):
            x = mu * mu / x
        if x <= t:
            return x


cdef double _pg_draw(double c, bitgen_t *bg) noexcept:
    cdef double z = 0.5 * (c if c >= 0.0 else -c)
    cdef double fz = _HALF_PI2 + 0.5 * z * z
    cdef double ratio = _right_piece_mass(z)
    cdef double x, s, y
    cdef int n
    while True:
        if _u(bg) < ratio:
            x = _TRUNC - log(1.0 - _u(bg)) / fz
        else:
            x = _trunc_inv_gauss(z, bg)
        s = _series_coef(0, x)
        y = _u(bg) * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _series_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _series_coef(n, x)
                if y > s:
                    break


cdef bitgen_t *_get_bitgen(object rng) except NULL:
    cdef object capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid numpy bit generator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


def pg_draw(double c, object rng):
    """One exact draw from PG(1, c) using uniforms from ``rng``."""
    cdef bitgen_t *bg = _get_bitgen(rng)
    with rng.bit_generator.lock:
        return _pg_draw(c, bg)


def pg_draw_arr(object c, object rng):
    """Elementwise exact PG(1, c[i]) draws; returns a float64 array."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = \
        np.ascontiguousarray(np.asarray(c, dtype=np.float64).ravel())
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(flat.shape[0], dtype=np.float64)
    cdef bitgen_t *bg = _get_bitgen(rng)
    cdef Py_ssize_t i
    with rng.bit_generator.lock:
        for i in range(flat.shape[0]):
            out[i] = _pg_draw(flat[i], bg)
    return out.reshape(np.asarray(c).shape)
