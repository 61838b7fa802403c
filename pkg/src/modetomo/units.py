"""Unit conversions at the configuration boundary.

All internal quantities are SI: times in seconds, rates and detunings as
angular frequencies in rad/s.  Configuration files and CLI flags use MHz
(ordinary frequency) and ns/us, converted here and nowhere else.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def mhz_to_angular(f_mhz):
    """Ordinary frequency in MHz -> angular frequency in rad/s."""
    return TWO_PI * 1e6 * np.asarray(f_mhz, dtype=float)


def angular_to_mhz(w):
    """Angular frequency in rad/s -> ordinary frequency in MHz."""
    return np.asarray(w, dtype=float) / (TWO_PI * 1e6)


def ns_to_seconds(t_ns):
    return np.asarray(t_ns, dtype=float) * 1e-9


def seconds_to_ns(t):
    return np.asarray(t, dtype=float) * 1e9


def us_to_seconds(t_us):
    return np.asarray(t_us, dtype=float) * 1e-6
