"""Pure-Python Polya-Gamma PG(1, c) sampler.

Exact alternating-series rejection sampler (Devroye-type): proposals are drawn
from a two-piece mixture (inverse-Gaussian body, exponential tail split at
x = 0.64) and accepted against the partial sums of the Jacobi-theta series, so
no truncation bias is introduced.

This module is the fallback twin of the compiled extension ``_pg_core``.  Both
implementations consume uniforms from the same ``numpy.random.Generator``
stream in exactly the same order, so chains produced with either backend are
bitwise identical for a given seed.  Keep any change here in lockstep with
``_pg_core.pyx``.
"""

import math

import numpy as np

BACKEND_NAME = "python"

_TRUNC = 0.64
_HALF_PI2 = math.pi * math.pi / 8.0
_LOG_MAX = 709.782712893384  # log(DBL_MAX); math.exp raises above this


def _exp(x):
    # C exp() semantics: overflow to +inf instead of raising.
    if x > _LOG_MAX:
        return math.inf
    return math.exp(x)


def _log_norm_cdf(x):
    # log Phi(x) with C semantics at Phi(x) == 0 (-> -inf).
    p = 0.5 * math.erfc(-x / math.sqrt(2.0))
    if p <= 0.0:
        return -math.inf
    return math.log(p)


def _series_coef(n, x):
    # n-th coefficient of the alternating series for the Jacobi-type density,
    # using the large-x form above the truncation point and the small-x
    # (reciprocal) form below it.
    k = (n + 0.5) * math.pi
    if x > _TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    return k * (0.5 * math.pi * x) ** (-1.5) * math.exp(-2.0 * (n + 0.5) ** 2 / x)


def _right_piece_mass(z):
    # Probability that the proposal falls in the exponential tail (x > 0.64).
    fz = _HALF_PI2 + 0.5 * z * z
    rt = math.sqrt(1.0 / _TRUNC)
    x0 = math.log(fz) + fz * _TRUNC
    xb = x0 - z + _log_norm_cdf(rt * (_TRUNC * z - 1.0))
    xa = x0 + z + _log_norm_cdf(-rt * (_TRUNC * z + 1.0))
    qdivp = 4.0 / math.pi * (_exp(xb) + _exp(xa))
    return 1.0 / (1.0 + qdivp)


def _trunc_inv_gauss(z, rng):
    # Inverse-Gaussian(mu=1/z, lambda=1) restricted to (0, 0.64].
    t = _TRUNC
    if z * t < 1.0:
        # mu > t (covers z == 0): rejection from the reciprocal-chi-square
        # proposal, thinned by the Gaussian tilt.
        while True:
            while True:
                e1 = -math.log(1.0 - rng.random())
                e2 = -math.log(1.0 - rng.random())
                if e1 * e1 <= 2.0 * e2 / t:
                    break
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            if rng.random() <= _exp(-0.5 * z * z * x):
                return x
    mu = 1.0 / z
    while True:
        # Box-Muller keeps the uniform stream identical to the compiled core.
        u1 = rng.random()
        u2 = rng.random()
        nrm = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
        y = nrm * nrm
        x = mu + 0.5 * mu * mu * y - 0.5 * mu * math.sqrt(4.0 * mu * y + (mu * y) ** 2)
        if rng.random() > mu / (mu + x):
            x = mu * mu / x
        if x <= t:
            return x


def pg_draw(c, rng):
    """One exact draw from PG(1, c) using uniforms from ``rng``."""
    z = 0.5 * abs(c)
    fz = _HALF_PI2 + 0.5 * z * z
    ratio = _right_piece_mass(z)
    while True:
        if rng.random() < ratio:
            x = _TRUNC - math.log(1.0 - rng.random()) / fz
        else:
            x = _trunc_inv_gauss(z, rng)
        s = _series_coef(0, x)
        y = rng.random() * s
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


def pg_draw_arr(c, rng):
    """Elementwise exact PG(1, c[i]) draws; returns a float64 array."""
    c = np.asarray(c, dtype=np.float64)
    out = np.empty(c.shape, dtype=np.float64)
    flat_c = c.ravel()
    flat_o = out.ravel()
    for i in range(flat_c.shape[0]):
        flat_o[i] = pg_draw(flat_c[i], rng)
    return out
