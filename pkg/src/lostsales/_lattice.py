"""Integer-grid helpers shared by the exact routines."""

from __future__ import annotations

import math

import numpy as np
from scipy import signal


def dense_demand(pmf, step):
    """Spread a demand pmf onto a grid where one demand unit is ``step`` cells."""
    f = np.zeros(step * (len(pmf) - 1) + 1)
    f[::step] = pmf
    return f


def reduced_walk(inc):
    """Coarsest grid carrying the walk J -> (J + r - D)^+.

    Returns (unit, a, f) with ``a`` the order in units, ``f[c]`` = P(D = c * unit).
    """
    g = math.gcd(inc.K * inc.demand.support_gcd, inc.r_steps)
    pmf = inc.demand.pmf
    idx = np.flatnonzero(pmf > 0)
    f = np.zeros((inc.K * idx[-1]) // g + 1)
    f[(inc.K * idx) // g] = pmf[idx]
    return g * inc.span, inc.r_steps // g, f


def lindley_step(pi, shift, f):
    """Law of (J + shift - D)^+ given J ~ pi and D ~ f, all on one integer grid."""
    x = np.concatenate([np.zeros(shift), pi]) if shift else np.asarray(pi, float)
    m = len(f)
    c = signal.convolve(x, f[::-1])
    out = c[m - 1:].copy()
    out[0] += c[: m - 1].sum()
    np.clip(out, 0.0, None, out=out)
    return out


def positive_part_mean(pmf, shift_units, step=1):
    """E[(a - D)^+] in grid units, where D = k * step has mass pmf[k]."""
    k = np.arange(len(pmf)) * step
    return float(np.dot(pmf, np.maximum(shift_units - k, 0)))
