"""Temporal filter shapes, orthogonality, and virtual-cavity couplings.

A filter f(t) = v(t) exp(i (Delta t + phi)) selects one propagating mode of
the emitted field.  Its capture by a fictitious cavity is encoded in the
time-dependent coupling g(t) = -f(t) / sqrt(integral_0^t |f|^2), which this
module evaluates with the integrable start-of-window singularity of the
boxcar regularized by the caller-supplied epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial.hermite import hermval
from scipy.integrate import quad

NORM_TOL = 1e-6
COUPLING_CAP_FACTOR = 1e3
_HG_SUPPORT_SIGMAS = 6.0  # Gaussian tails beyond 6 w are < 2e-8 of the peak
_HG_GRID = 1 << 14


@dataclass(frozen=True)
class Boxcar:
    """Flat envelope of the filter's full duration."""


@dataclass(frozen=True)
class HermiteGauss:
    """H_n(t/w) exp(-t^2 / 2 w^2) envelope, centered in its window."""

    order: int
    width: float

    def __post_init__(self):
        if self.order < 0:
            raise ValueError(f"Hermite-Gauss order must be >= 0, got {self.order}")
        if self.width <= 0:
            raise ValueError(f"Hermite-Gauss width must be > 0, got {self.width}")


@dataclass(frozen=True)
class TemporalFilter:
    """One temporal mode filter in the drive rotating frame.

    Parameters
    ----------
    shape : Boxcar or HermiteGauss
    detuning : carrier detuning from the emitter frequency, rad/s
    phase : global phase phi, radians
    start : nominal start time t0 (steady state must be reached by then), s
    duration : boxcar window length, s (ignored for Hermite-Gauss, whose
        window is the truncated +-6 w support placed after ``start``)
    delay : additional shift of this filter's window, s (may be negative)
    """

    shape: Boxcar | HermiteGauss
    detuning: float = 0.0
    phase: float = 0.0
    start: float = 0.0
    duration: float | None = None
    delay: float = 0.0

    def __post_init__(self):
        if isinstance(self.shape, Boxcar):
            if self.duration is None or self.duration <= 0:
                raise ValueError("boxcar filter needs duration > 0")
        elif not isinstance(self.shape, HermiteGauss):
            raise TypeError(f"unsupported filter shape {self.shape!r}")

    @property
    def window(self) -> tuple[float, float]:
        """Support [t_lo, t_hi] outside which the filter vanishes."""
        t_lo = self.start + self.delay
        if isinstance(self.shape, Boxcar):
            return (t_lo, t_lo + self.duration)
        half = _HG_SUPPORT_SIGMAS * self.shape.width
        return (t_lo, t_lo + 2 * half)

    @property
    def window_length(self) -> float:
        t_lo, t_hi = self.window
        return t_hi - t_lo

    @cached_property
    def _norm(self) -> float:
        """Envelope normalization so that integral |f|^2 dt = 1."""
        if isinstance(self.shape, Boxcar):
            return 1.0 / np.sqrt(self.duration)
        t_lo, t_hi = self.window
        val, _ = quad(lambda t: self._raw_envelope(t) ** 2, t_lo, t_hi, limit=200)
        return 1.0 / np.sqrt(val)

    def _raw_envelope(self, t):
        sh = self.shape
        t_lo, t_hi = self.window
        if isinstance(sh, Boxcar):
            return np.where((t >= t_lo) & (t <= t_hi), 1.0, 0.0)
        center = 0.5 * (t_lo + t_hi)
        x = (np.asarray(t, dtype=float) - center) / sh.width
        coef = np.zeros(sh.order + 1)
        coef[-1] = 1.0
        inside = (t >= t_lo) & (t <= t_hi)
        return np.where(inside, hermval(x, coef) * np.exp(-0.5 * x * x), 0.0)

    def envelope(self, t):
        """Normalized real envelope v(t)."""
        return self._norm * self._raw_envelope(t)

    def value(self, t):
        """f(t) = v(t) exp(i (Delta t + phi))."""
        t = np.asarray(t, dtype=float)
        return self.envelope(t) * np.exp(1j * (self.detuning * t + self.phase))

    @cached_property
    def _cumulative_table(self):
        """Dense Simpson table of integral |f|^2 from the window start (HG only)."""
        t_lo, t_hi = self.window
        grid = np.linspace(t_lo, t_hi, 2 * _HG_GRID + 1)
        y = self.envelope(grid) ** 2
        h = grid[1] - grid[0]
        # composite Simpson over consecutive interval pairs (width 2h each)
        pair = (h / 3.0) * (y[:-2:2] + 4.0 * y[1:-1:2] + y[2::2])
        cum = np.concatenate([[0.0], np.cumsum(pair)])
        return grid[::2], cum

    def norm_cumulative(self, t):
        """integral_{window start}^{t} |f(t')|^2 dt', clipped to [0, 1]."""
        t = np.asarray(t, dtype=float)
        t_lo, t_hi = self.window
        if isinstance(self.shape, Boxcar):
            out = np.clip((t - t_lo) / self.duration, 0.0, 1.0)
        else:
            grid, cum = self._cumulative_table
            out = np.clip(np.interp(t, grid, cum, left=0.0, right=cum[-1]), 0.0, 1.0)
        return out if out.ndim else float(out)

    def coupling(self, t, epsilon: float = 0.0):
        """Virtual-cavity coupling g(t) = -f(t) / sqrt(norm_cumulative(t)).

        Zero before the window opens and after it closes.  Within the first
        ``epsilon`` of the window the evaluation point is pushed forward to
        t_lo + epsilon; the magnitude is additionally capped at
        ``COUPLING_CAP_FACTOR / sqrt(window length)``.
        """
        t = np.asarray(t, dtype=float)
        t_lo, t_hi = self.window
        te = np.maximum(t, t_lo + epsilon)
        active = (t > t_lo) & (te <= t_hi)
        cum = np.maximum(np.asarray(self.norm_cumulative(te), dtype=float), 1e-300)
        g = np.where(active, -self.value(te) / np.sqrt(cum), 0.0 + 0.0j)
        # Gaussian tails make 0/0 ratios below the support floor: treat as off
        g = np.where(np.asarray(self.norm_cumulative(te)) < 1e-12, 0.0 + 0.0j, g)
        cap = COUPLING_CAP_FACTOR / np.sqrt(self.window_length)
        mag = np.abs(g)
        over = mag > cap
        if np.any(over):
            g = np.where(over, g * (cap / np.where(mag > 0, mag, 1.0)), g)
        return g if g.ndim else complex(g)


def overlap(f1: TemporalFilter, f2: TemporalFilter) -> complex:
    """integral f1*(t) f2(t) dt by adaptive quadrature (abs error <= 1e-8)."""
    lo = max(f1.window[0], f2.window[0])
    hi = min(f1.window[1], f2.window[1])
    if hi <= lo:
        return 0.0 + 0.0j

    def integrand_re(t):
        return (np.conj(f1.value(t)) * f2.value(t)).real

    def integrand_im(t):
        return (np.conj(f1.value(t)) * f2.value(t)).imag

    re, _ = quad(integrand_re, lo, hi, limit=400, epsabs=1e-9)
    im, _ = quad(integrand_im, lo, hi, limit=400, epsabs=1e-9)
    return complex(re, im)


def check_normalized(f: TemporalFilter, tol: float = NORM_TOL) -> None:
    """Raise unless integral |f|^2 = 1 within ``tol``."""
    val = overlap(f, f).real
    if abs(val - 1.0) > tol:
        raise ValueError(f"filter norm {val!r} deviates from 1 beyond {tol}")
