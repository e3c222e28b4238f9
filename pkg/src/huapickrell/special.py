"""Small numerical kernels shared across modules: complex log-gamma and
adaptive quadrature for integrals over the real line."""

from __future__ import annotations

import cmath
import math
from typing import Callable

import numpy as np

# Lanczos approximation, g = 7, 9 coefficients.  Relative accuracy ~ 1e-13
# over the right half plane; the reflection formula covers Re(z) < 0.5.
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def log_gamma_complex(z: complex) -> complex:
    """log Gamma(z) for complex z (poles excluded).

    The real part (log |Gamma|) is accurate everywhere; in the reflected
    region Re(z) < 0.5 the imaginary part may differ from the continuous
    analytic continuation by a multiple of 2 pi.  All callers in this package
    consume only the real part.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == int(z.real):
        raise ValueError(f"log-gamma pole at z={z}")
    if z.real < 0.5:
        # log Gamma(z) = log(pi / sin(pi z)) - log Gamma(1 - z)
        return cmath.log(math.pi) - cmath.log(cmath.sin(math.pi * z)) - log_gamma_complex(1.0 - z)
    z -= 1.0
    x = _LANCZOS_COEFFS[0]
    for i, c in enumerate(_LANCZOS_COEFFS[1:], start=1):
        x += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (z + 0.5) * cmath.log(t) - t + cmath.log(x)


def log_abs_gamma_sq(u: float, v: float) -> float:
    """log |Gamma(u + iv)|^2, combined in log space."""
    return 2.0 * log_gamma_complex(complex(u, v)).real


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 48,
) -> float:
    """Adaptive Simpson quadrature with local error control.

    The local acceptance test is the standard 15-point Richardson estimate;
    tolerance is divided between halves so the global error is ~ tol.
    """

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        if depth <= 0:
            return left + right
        err = left + right - whole
        if abs(err) <= 15.0 * tol:
            return left + right + err / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2.0, depth - 1
        )

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = simpson(fa, fm, fb, b - a)
    return recurse(a, b, fa, fm, fb, whole, tol, max_depth)


def integrate_real_line(f: Callable[[float], float], tol: float = 1e-10) -> float:
    """Integral of f over the real line via x = tan(theta).

    The substitution maps decaying rational-type integrands to a smooth
    compactly supported one; the integrand must decay faster than 1/x^2 for
    the transformed endpoints to be regular.
    """

    def g(theta: float) -> float:
        c = math.cos(theta)
        if c <= 1e-300:
            return 0.0
        x = math.tan(theta)
        val = f(x) / (c * c)
        return val if math.isfinite(val) else 0.0

    return adaptive_simpson(g, -math.pi / 2.0, math.pi / 2.0, tol=tol)


def gauss_legendre_nodes(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights mapped to [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return mid + half * x, half * w
