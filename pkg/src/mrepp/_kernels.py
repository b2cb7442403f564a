"""Compiled inner loops for orbit generation.

Maps are passed to the kernels as ``(kind, a, breakpoints, slopes)``; see
:func:`mrepp.dynamics.kernel_params`.
"""

import numpy as np
from numba import njit

MOD1 = 0
PWL = 1
LSV = 2


@njit(cache=True, nogil=True)
def apply_map(kind, a, breakpoints, slopes, x):
    if kind == MOD1:
        return (a * x) % 1.0
    if kind == LSV:
        if x < 0.5:
            y = x * (1.0 + 2.0**a * x**a)
            if y >= 1.0:
                y -= 1.0
            return y
        return 2.0 * x - 1.0
    # piecewise linear: branch i covers [breakpoints[i], breakpoints[i+1])
    i = np.searchsorted(breakpoints, x, side="right") - 1
    if i < 0:
        i = 0
    if i > slopes.shape[0] - 1:
        i = slopes.shape[0] - 1
    return (slopes[i] * (x - breakpoints[i])) % 1.0


@njit(cache=True, nogil=True)
def iterate_forward(kind, a, breakpoints, slopes, x0, n, burn_in):
    x = x0
    for _ in range(burn_in):
        x = apply_map(kind, a, breakpoints, slopes, x)
    out = np.empty(n)
    for i in range(n):
        out[i] = x
        x = apply_map(kind, a, breakpoints, slopes, x)
    return out


@njit(cache=True, nogil=True)
def digit_orbit(digits, tail, m):
    """Orbit of ``0.d0 d1 d2 ...`` (base m) under ``x -> m x mod 1``.

    Built backwards through the inverse branches ``y -> (d + y) / m``, which
    contract, so every state is accurate to round-off.
    """
    n = digits.shape[0]
    out = np.empty(n)
    y = tail
    for i in range(n - 1, -1, -1):
        y = (digits[i] + y) / m
        out[i] = y
    return out


@njit(cache=True, nogil=True)
def induce_forward(kind, a, breakpoints, slopes, x0, lo, hi, n_returns, max_iter):
    """Returns (states before each return, return times, ok, state after the last return)."""
    states = np.empty(n_returns)
    rtimes = np.empty(n_returns, dtype=np.int64)
    x = x0
    total = 0
    for j in range(n_returns):
        states[j] = x
        r = 0
        while True:
            x = apply_map(kind, a, breakpoints, slopes, x)
            r += 1
            total += 1
            if lo <= x < hi:
                break
            if total >= max_iter:
                return states[:j], rtimes[:j], False, x
        rtimes[j] = r
    return states, rtimes, True, x
