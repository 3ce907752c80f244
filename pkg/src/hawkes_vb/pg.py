"""Polya-Gamma distribution utilities.

PG(1, c) is the tilted distribution with density

    p(w; 1, c) = cosh(c/2) * exp(-c^2 w / 2) * p(w; 1, 0),

whose mean tanh(c/2)/(2c) drives the closed-form variational updates, while
exact draws feed the Gibbs sampler.  The identity

    sigmoid(x) = E_{w ~ PG(1,0)}[ exp(g(w, x)) ],
    g(w, x) = -w x^2 / 2 + x / 2 - log 2,

is what turns the sigmoid likelihood into a conditionally Gaussian one.
"""

import math
from dataclasses import dataclass

import numpy as np

from hawkes_vb._backend import BACKEND, pg_draw, pg_draw_arr
from hawkes_vb.errors import DomainError

__all__ = ["BACKEND", "TiltedPG", "pg_mean", "pg_sample", "pg_sample_arr", "log_g"]

_TAYLOR_CUTOFF = 1e-4


def pg_mean(c):
    """Mean of PG(1, c): tanh(c/2)/(2c), continuously extended to 1/4 at 0.

    Accepts scalars or arrays; a Taylor branch 1/4 - c^2/48 avoids
    cancellation for tiny c.  Negative tilts are a domain error.
    """
    arr = np.asarray(c, dtype=np.float64)
    if np.any(arr < 0.0):
        raise DomainError("pg_mean requires a nonnegative tilt c")
    small = arr < _TAYLOR_CUTOFF
    safe = np.where(small, 1.0, arr)
    out = np.where(small,
                   0.25 - arr * arr / 48.0,
                   np.tanh(0.5 * safe) / (2.0 * safe))
    if np.ndim(c) == 0:
        return float(out)
    return out


def pg_sample(c, rng):
    """One exact draw from PG(1, c)."""
    if c < 0.0:
        raise DomainError("pg_sample requires a nonnegative tilt c")
    return pg_draw(c, rng)


def pg_sample_arr(c, rng):
    """Vector of exact draws, one per entry of c (used in bulk by Gibbs)."""
    arr = np.asarray(c, dtype=np.float64)
    if np.any(arr < 0.0):
        raise DomainError("pg_sample_arr requires nonnegative tilts")
    return pg_draw_arr(arr, rng)


def log_g(omega, x):
    """Exponent of the sigmoid mixture representation: -w x^2/2 + x/2 - log 2."""
    if np.ndim(omega) == 0 and omega <= 0.0:
        raise DomainError("log_g requires omega > 0")
    return -0.5 * np.asarray(omega) * x * x + 0.5 * x - math.log(2.0)


@dataclass(frozen=True)
class TiltedPG:
    """PG(1, c): the exponentially tilted distribution with

    p(w; 1, c) = cosh(c/2) * exp(-c^2 w / 2) * p(w; 1, 0).
    """

    c: float

    def __post_init__(self):
        if self.c < 0.0:
            raise DomainError("the tilt c must be nonnegative")

    @property
    def b(self):
        return 1

    def mean(self):
        return pg_mean(self.c)

    def sample(self, rng, size=None):
        if size is None:
            return pg_draw(self.c, rng)
        return pg_draw_arr(np.full(size, self.c), rng)

    def log_tilt(self, omega):
        """log p(w;1,c) - log p(w;1,0); integrates to one against PG(1,0)."""
        omega = np.asarray(omega, dtype=np.float64)
        return np.log(np.cosh(0.5 * self.c)) - 0.5 * self.c**2 * omega
